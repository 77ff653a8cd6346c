"""Compactly supported potentials on [-1, 1], their norms and class membership."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError

DEFAULT_NODES = 2001


@dataclass(frozen=True)
class Potential:
    """Real potential sampled on a uniform grid over [-1, 1].

    Between nodes the potential is linear. A node listed in ``jumps`` carries a
    discontinuity: ``(index, left_limit, right_limit)``; its sample holds the
    average of the two limits. Outside [-1, 1] the potential is zero.

    Attributes:
        samples: Values at the nodes -1 + k * grid_step.
        grid_step: Node spacing.
        label: Free-form name.
        jumps: Interior discontinuities as (node index, left limit, right limit).
    """

    samples: np.ndarray
    grid_step: float
    label: str = ""
    jumps: tuple[tuple[int, float, float], ...] = field(default=())

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ConfigError("potential needs a 1-D array of at least two samples")
        if not np.all(np.isfinite(s)):
            raise ConfigError("potential samples must be finite")
        h = float(self.grid_step)
        if not h > 0 or abs(h * (s.size - 1) - 2.0) > 1e-12:
            raise ConfigError("grid_step * (len(samples) - 1) must equal 2")
        jumps = tuple((int(k), float(a), float(b)) for k, a, b in self.jumps)
        for k, a, b in jumps:
            if not 0 < k < s.size - 1:
                raise ConfigError("jumps must sit at interior nodes")
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ConfigError("jump limits must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "grid_step", h)
        object.__setattr__(self, "jumps", jumps)

    # ------------------------------------------------------------------ grid
    @property
    def n_nodes(self) -> int:
        return self.samples.size

    @property
    def nodes(self) -> np.ndarray:
        return -1.0 + self.grid_step * np.arange(self.n_nodes)

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        """Left and right limits at every node."""
        left = self.samples.copy()
        right = self.samples.copy()
        for k, a, b in self.jumps:
            left[k] = a
            right[k] = b
        return left, right

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end values of the linear piece on each grid cell."""
        left, right = self.limits()
        return right[:-1].copy(), left[1:].copy()

    def breakpoints(self, kinks: bool = True, rtol: float = 1e-13) -> np.ndarray:
        """Node indices where the linear formula changes.

        Jumps are always included, slope changes only when ``kinks`` is true.
        The first and last node are always present.
        """
        start, end = self.cells()
        scale = max(1.0, float(np.max(np.abs(self.samples))))
        slope = end - start
        jump = np.abs(start[1:] - end[:-1]) > rtol * scale
        kink = np.abs(slope[1:] - slope[:-1]) > rtol * scale
        inner = np.nonzero(jump | kink if kinks else jump)[0] + 1
        return np.concatenate([[0], inner, [self.n_nodes - 1]]).astype(np.int64)

    # ------------------------------------------------------------ evaluation
    def __call__(self, x) -> np.ndarray:
        """Evaluate at x; nodes return their samples, |x| > 1 returns 0."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) <= 1.0
        if not np.any(inside):
            return out
        u = (x[inside] + 1.0) / self.grid_step
        n = self.n_nodes
        k = np.clip(np.floor(u).astype(np.int64), 0, n - 2)
        frac = u - k
        start, end = self.cells()
        val = start[k] + (end[k] - start[k]) * frac
        knear = np.clip(np.rint(u).astype(np.int64), 0, n - 1)
        on_node = np.abs(u - knear) < 1e-9
        val[on_node] = self.samples[knear[on_node]]
        out[inside] = val
        return out

    def cumulative(self) -> np.ndarray:
        """Exact integral from -1 to each node of the piecewise-linear function."""
        start, end = self.cells()
        inc = 0.5 * self.grid_step * (start + end)
        return np.concatenate([[0.0], np.cumsum(inc)])

    def tail_integral(self, x) -> np.ndarray:
        """Exact integral from x to 1 (zero for x >= 1)."""
        x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        cum = self.cumulative()
        u = (x + 1.0) / self.grid_step
        k = np.clip(np.floor(u).astype(np.int64), 0, self.n_nodes - 2)
        frac = np.clip(u - k, 0.0, 1.0)
        start, end = self.cells()
        partial = self.grid_step * frac * (start[k] + 0.5 * (end[k] - start[k]) * frac)
        return cum[-1] - (cum[k] + partial)

    # ---------------------------------------------------------- construction
    @classmethod
    def zero(cls, n_nodes: int = DEFAULT_NODES, label: str = "zero") -> "Potential":
        return cls(np.zeros(n_nodes), 2.0 / (n_nodes - 1), label)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray],
                      n_nodes: int = DEFAULT_NODES, label: str = "") -> "Potential":
        x = np.linspace(-1.0, 1.0, n_nodes)
        return cls(np.asarray(f(x), dtype=float) * np.ones_like(x), 2.0 / (n_nodes - 1), label)

    @classmethod
    def box(cls, lo: float, hi: float, height: float,
            n_nodes: int = DEFAULT_NODES, label: str = "") -> "Potential":
        return cls.sum_of_boxes([(lo, hi, height)], n_nodes, label)

    @classmethod
    def sum_of_boxes(cls, boxes: Iterable[Sequence[float]],
                     n_nodes: int = DEFAULT_NODES, label: str = "") -> "Potential":
        """Piecewise-constant potential with edges snapped to grid nodes."""
        h = 2.0 / (n_nodes - 1)
        left = np.zeros(n_nodes)
        right = np.zeros(n_nodes)
        for lo, hi, height in boxes:
            lo, hi, height = float(lo), float(hi), float(height)
            if not (-1.0 - 1e-12 <= lo < hi <= 1.0 + 1e-12):
                raise ConfigError(f"box [{lo}, {hi}] must satisfy -1 <= lo < hi <= 1")
            ilo = int(round((lo + 1.0) / h))
            ihi = int(round((hi + 1.0) / h))
            if ihi <= ilo:
                raise ConfigError(f"box [{lo}, {hi}] is narrower than the grid step")
            right[ilo:ihi] += height
            left[ilo + 1:ihi + 1] += height
        samples = 0.5 * (left + right)
        samples[0] = right[0]
        samples[-1] = left[-1]
        jumps = tuple((k, left[k], right[k]) for k in range(1, n_nodes - 1)
                      if left[k] != right[k])
        return cls(samples, h, label, jumps)

    def scaled(self, c: float) -> "Potential":
        return Potential(self.samples * c, self.grid_step, self.label,
                         tuple((k, a * c, b * c) for k, a, b in self.jumps))

    def plus_samples(self, extra: np.ndarray, label: str | None = None) -> "Potential":
        """Add a continuous correction given at the nodes, keeping the jumps."""
        extra = np.asarray(extra, dtype=float)
        return Potential(self.samples + extra, self.grid_step,
                         self.label if label is None else label,
                         tuple((k, a + extra[k], b + extra[k]) for k, a, b in self.jumps))

    def to_dict(self) -> dict:
        out = {"kind": "grid", "nodes": [float(v) for v in self.samples], "label": self.label}
        if self.jumps:
            out["jumps"] = [{"index": k, "left": a, "right": b} for k, a, b in self.jumps]
        return out


@dataclass(frozen=True)
class ClassParams:
    """Admissible class B_delta(Q) with Lebesgue exponent p."""

    Q: float
    delta: float
    p: float = 2.0

    def __post_init__(self):
        if not self.Q > 0:
            raise ConfigError("Q must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not 1.0 < self.p <= 2.0:
            raise ConfigError("p must lie in (1, 2]")


@dataclass
class ClassReport:
    ok: bool
    l1_norm: float
    s0_abs: float
    reasons: list[str]


def _cell_trapezoid(q: Potential, g: Callable[[np.ndarray], np.ndarray]) -> float:
    start, end = q.cells()
    return float(0.5 * q.grid_step * np.sum(g(start) + g(end)))


def norm_l1(q: Potential) -> float:
    """Trapezoid approximation of the integral of |q| over [-1, 1]."""
    return _cell_trapezoid(q, np.abs)


def norm_lp(q: Potential, p: float) -> float:
    """Trapezoid approximation of (integral of |q|^p)^(1/p), 1 < p <= 2."""
    if not 1.0 < p <= 2.0:
        raise ConfigError(f"p={p} outside (1, 2]")
    return _cell_trapezoid(q, lambda v: np.abs(v) ** p) ** (1.0 / p)


def check_class(q: Potential, params: ClassParams, s0: complex) -> ClassReport:
    """Test ||q||_1 <= Q and |s(0)| >= delta."""
    l1 = norm_l1(q)
    reasons = []
    if l1 > params.Q:
        reasons.append("L1 bound")
    if abs(s0) < params.delta:
        reasons.append("delta bound")
    return ClassReport(not reasons, l1, abs(s0), reasons)


def apriori_kappa(Q: float) -> float:
    """kappa(Q) = Q + 4 Q^2 e^{2Q}, the bound on |w(z) - 2iz| for Im z >= 0."""
    return Q + 4.0 * Q * Q * math.exp(2.0 * Q)


def load_potential(source: str | Path | dict) -> Potential:
    """Load a potential from a JSON file or an already parsed dictionary.

    Recognised kinds are ``grid`` (``nodes`` holds samples, optional
    ``interval`` [c, d] rescales a support [c, d] to [-1, 1]), ``box`` (one
    entry in ``boxes``) and ``sum_of_boxes``. ``n_nodes`` overrides the
    default grid for the box kinds.
    """
    if isinstance(source, dict):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read potential file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in potential file: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("potential file must hold a JSON object")
    kind = data.get("kind")
    label = str(data.get("label", ""))
    if kind == "grid":
        nodes = np.asarray(data.get("nodes", []), dtype=float)
        if nodes.size < 2:
            raise ConfigError("grid potential needs at least two nodes")
        c, d = data.get("interval", (-1.0, 1.0))
        c, d = float(c), float(d)
        if not d > c:
            raise ConfigError("interval must satisfy c < d")
        # affine change x -> (2x - c - d)/(d - c) scales q by ((d - c)/2)^2
        scale = ((d - c) / 2.0) ** 2
        jumps = tuple((int(j["index"]), scale * float(j["left"]), scale * float(j["right"]))
                      for j in data.get("jumps", []))
        return Potential(nodes * scale, 2.0 / (nodes.size - 1), label, jumps)
    if kind in ("box", "sum_of_boxes"):
        boxes = data.get("boxes")
        if not isinstance(boxes, list) or not boxes:
            raise ConfigError("box potentials need a non-empty 'boxes' list")
        if kind == "box" and len(boxes) != 1:
            raise ConfigError("kind 'box' takes exactly one box")
        try:
            triples = [(b["lo"], b["hi"], b["height"]) for b in boxes]
        except (KeyError, TypeError) as exc:
            raise ConfigError("each box needs 'lo', 'hi' and 'height'") from exc
        n_nodes = int(data.get("n_nodes", DEFAULT_NODES))
        return Potential.sum_of_boxes(triples, n_nodes, label)
    raise ConfigError(f"unknown potential kind {kind!r}")
