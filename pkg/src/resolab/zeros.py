"""Counting, locating and matching zeros of entire functions in disks.

Functions passed to this module must accept and return complex numpy arrays
(they are evaluated in batches).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .errors import ConfigError, ContourTooCloseError, NumericError, ZeroMatchError
from .potential import ClassParams, Potential, apriori_kappa, norm_l1

ComplexFn = Callable[[np.ndarray], np.ndarray]


def fd_step(z):
    return 1e-6 * (1.0 + np.abs(z))


def fd_derivative(f: ComplexFn, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """f(z) and the central difference f'(z) with step 1e-6 (1 + |z|)."""
    z = np.asarray(z, dtype=complex)
    h = fd_step(z)
    vals = f(np.concatenate([z, z + h, z - h]))
    n = z.size
    return vals[:n], (vals[n:2 * n] - vals[2 * n:]) / (2 * h)


# ------------------------------------------------------------------- ZeroSet
@dataclass
class ZeroSet:
    """Zeros with multiplicities inside D(radius).

    Attributes:
        zeros: (location, multiplicity) pairs.
        radius: Disk radius R.
        function_tag: "w" or "s".
        residual: Largest |f| at the reported zeros.
        im_bound: When set, the search covered only |Im z| <= im_bound.
    """

    zeros: list[tuple[complex, int]]
    radius: float
    function_tag: str
    residual: float = 0.0
    im_bound: float | None = None

    def __post_init__(self):
        if self.function_tag not in ("w", "s"):
            raise ConfigError("function_tag must be 'w' or 's'")
        self.zeros = sorted(((complex(z), int(m)) for z, m in self.zeros),
                            key=lambda p: (round(p[0].real, 12), round(p[0].imag, 12)))

    @property
    def count(self) -> int:
        return sum(m for _, m in self.zeros)

    def locations(self) -> np.ndarray:
        """Zero locations repeated by multiplicity."""
        return np.array([z for z, m in self.zeros for _ in range(m)], dtype=complex)

    def within(self, radius: float, center: complex = 0.0) -> "ZeroSet":
        keep = [(z, m) for z, m in self.zeros if abs(z - center) < radius]
        return ZeroSet(keep, radius, self.function_tag, self.residual, self.im_bound)

    def to_dict(self) -> dict:
        out = {"tag": self.function_tag, "radius": self.radius,
               "zeros": [{"re": z.real, "im": z.imag, "mult": m} for z, m in self.zeros],
               "residual": self.residual}
        if self.im_bound is not None:
            out["im_bound"] = self.im_bound
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ZeroSet":
        try:
            zs = [(complex(e["re"], e["im"]), int(e.get("mult", 1))) for e in data["zeros"]]
            return cls(zs, float(data["radius"]), str(data["tag"]),
                       float(data.get("residual", 0.0)), data.get("im_bound"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed zero-set JSON: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "ZeroSet":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read zero set: {exc}") from exc


@dataclass
class MatchedPair:
    """Optimal one-to-one matching of two zero sets."""

    pairs: list[tuple[int, complex, complex, float]]
    epsilon: float
    unmatched: int = 0


# ------------------------------------------------------------------ counting
def count_zeros(f: ComplexFn, center: complex, radius: float, n_initial: int = 256,
                max_nodes: int = 1 << 16, contour_floor: float = 1e-6) -> int:
    """Winding number of f around the circle |z - center| = radius.

    The integral of f'/f is approximated by the trapezoid rule with a central
    difference derivative; the node count doubles until the value settles
    within 0.05 of an integer.

    Raises:
        ContourTooCloseError: |f/f'| on the contour (a local estimate of the
            distance to the nearest zero) falls below contour_floor * radius.
        NumericError: No convergence to an integer within max_nodes.
    """
    n = n_initial
    prev = None
    while n <= max_nodes:
        theta = 2.0 * np.pi * np.arange(n) / n
        e = np.exp(1j * theta)
        z = center + radius * e
        fz, dfz = fd_derivative(f, z)
        if np.any(fz == 0) or not np.all(np.isfinite(fz)):
            raise ContourTooCloseError("f vanishes or overflows on the contour")
        dist = np.abs(fz / dfz)
        if np.min(dist) < contour_floor * radius:
            raise ContourTooCloseError(f"zero within {np.min(dist):.2e} of the contour")
        val = float(np.real(np.sum(dfz / fz * radius * e) / n))
        if prev is not None and abs(val - prev) < 0.05 and abs(val - round(val)) < 0.05:
            return int(round(val))
        prev = val
        n *= 2
    if prev is not None and abs(prev - round(prev)) < 0.25:
        return int(round(prev))
    raise NumericError("winding integral did not settle to an integer")


def count_zeros_with_retry(f: ComplexFn, center: complex, radius: float,
                           retries: int = 5, **kw) -> tuple[int, float]:
    """count_zeros, enlarging the radius by 1% on contour-too-close errors."""
    r = radius
    for attempt in range(retries + 1):
        try:
            return count_zeros(f, center, r, **kw), r
        except ContourTooCloseError:
            if attempt == retries:
                raise
            r *= 1.01
    raise AssertionError("unreachable")


# -------------------------------------------------------- phase-tracked edges
class _EdgeBook:
    """Argument increments of f along straight segments, shared between cells."""

    def __init__(self, f: ComplexFn, density: float, max_rounds: int = 40,
                 max_points: int = 20000):
        self.f = f
        self.density = density
        self.max_rounds = max_rounds
        self.max_points = max_points
        self.cache: dict[tuple, float] = {}
        self.evaluations = 0

    @staticmethod
    def _key(a: complex, b: complex) -> tuple:
        return (round(a.real, 13), round(a.imag, 13), round(b.real, 13), round(b.imag, 13))

    def increments(self, edges: list[tuple[complex, complex]]) -> list[float]:
        """Phase change of f from a to b for each edge (nan if a zero sits on it)."""
        todo = []
        for a, b in edges:
            if self._key(a, b) not in self.cache and self._key(b, a) not in self.cache:
                todo.append((a, b))
        todo = list(dict.fromkeys(todo))
        if todo:
            self._compute(todo)
        out = []
        for a, b in edges:
            k = self._key(a, b)
            out.append(self.cache[k] if k in self.cache else -self.cache[self._key(b, a)])
        return out

    def _compute(self, edges: list[tuple[complex, complex]]) -> None:
        params = []
        for a, b in edges:
            m = max(8, int(math.ceil(abs(b - a) * self.density)))
            params.append(np.linspace(0.0, 1.0, m + 1))
        points = np.concatenate([a + (b - a) * s for (a, b), s in zip(edges, params)])
        vals = self.f(points)
        self.evaluations += points.size
        values = np.split(vals, np.cumsum([s.size for s in params])[:-1])
        bad = [False] * len(edges)
        for _ in range(self.max_rounds):
            new_pts, where = [], []
            for e, ((a, b), s, v) in enumerate(zip(edges, params, values)):
                if bad[e]:
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    quot = v[1:] / v[:-1]
                if not np.all(np.isfinite(quot)):
                    bad[e] = True
                    continue
                d = np.abs(np.angle(quot))
                ratio = np.abs(quot)
                refine = (d > 0.8) | (ratio > 4.0) | (ratio < 0.25)
                if not np.any(refine):
                    continue
                idx = np.nonzero(refine)[0]
                if np.min(s[idx + 1] - s[idx]) < 1e-12 or s.size + idx.size > self.max_points:
                    bad[e] = True
                    continue
                mids = 0.5 * (s[idx] + s[idx + 1])
                new_pts.append(a + (b - a) * mids)
                where.append((e, idx, mids))
            if not new_pts:
                break
            allv = self.f(np.concatenate(new_pts))
            self.evaluations += allv.size
            pos = 0
            for e, idx, mids in where:
                nv = allv[pos:pos + mids.size]
                pos += mids.size
                params[e] = np.insert(params[e], idx + 1, mids)
                values[e] = np.insert(values[e], idx + 1, nv)
        for e, ((a, b), v) in enumerate(zip(edges, values)):
            if bad[e] or np.any(v == 0) or not np.all(np.isfinite(v)):
                self.cache[self._key(a, b)] = math.nan
            else:
                self.cache[self._key(a, b)] = float(np.sum(np.angle(v[1:] / v[:-1])))


@dataclass
class _Cell:
    x0: float
    x1: float
    y0: float
    y1: float
    depth: int = 0

    @property
    def corners(self) -> list[complex]:
        return [complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1)]

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def size(self) -> float:
        return max(self.x1 - self.x0, self.y1 - self.y0)

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.x0 - pad <= z.real <= self.x1 + pad
                and self.y0 - pad <= z.imag <= self.y1 + pad)

    def split(self, fx: float = 0.5, fy: float = 0.5) -> list["_Cell"]:
        xm = self.x0 + fx * (self.x1 - self.x0)
        ym = self.y0 + fy * (self.y1 - self.y0)
        wide = (self.x1 - self.x0) > 1.5 * (self.y1 - self.y0)
        tall = (self.y1 - self.y0) > 1.5 * (self.x1 - self.x0)
        d = self.depth + 1
        if wide:
            return [_Cell(self.x0, xm, self.y0, self.y1, d), _Cell(xm, self.x1, self.y0, self.y1, d)]
        if tall:
            return [_Cell(self.x0, self.x1, self.y0, ym, d), _Cell(self.x0, self.x1, ym, self.y1, d)]
        return [_Cell(self.x0, xm, self.y0, ym, d), _Cell(xm, self.x1, self.y0, ym, d),
                _Cell(xm, self.x1, ym, self.y1, d), _Cell(self.x0, xm, ym, self.y1, d)]


def _edges_of(cell: _Cell) -> list[tuple[complex, complex]]:
    c = cell.corners
    return [(c[k], c[(k + 1) % 4]) for k in range(4)]


def _windings(book: _EdgeBook, cells: list[_Cell]) -> list[float]:
    edges = [e for c in cells for e in _edges_of(c)]
    inc = book.increments(edges)
    return [sum(inc[4 * k:4 * k + 4]) / (2 * math.pi) for k in range(len(cells))]


def _newton(f: ComplexFn, z0: np.ndarray, iters: int = 60,
            box: tuple[float, float, float, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Batched Newton with finite-difference derivatives; returns (z, converged).

    Iterates leaving ``box`` = (x0, x1, y0, y1) are abandoned as failures.
    """
    z = np.array(z0, dtype=complex)
    active = np.ones(z.size, dtype=bool)
    done = np.zeros(z.size, dtype=bool)
    for _ in range(iters):
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        fz, dfz = fd_derivative(f, z[idx])
        ok = (dfz != 0) & np.isfinite(dfz) & np.isfinite(fz)
        step = np.where(ok, fz / np.where(ok, dfz, 1.0), 0.0)
        z[idx] = z[idx] - step
        small = np.abs(step) <= 1e-14 * (1.0 + np.abs(z[idx]))
        zero_f = fz == 0
        fin = small | zero_f | ~ok
        done[idx[small | zero_f]] = True
        active[idx[fin]] = False
        zi = z[idx]
        if box is not None:
            out = ((zi.real < box[0]) | (zi.real > box[1]) | (zi.imag < box[2]) | (zi.imag > box[3]))
        else:
            out = np.abs(zi) > 1e6
        active[idx[out]] = False
        done[idx[out]] = False
    return z, done


def locate_zeros(f: ComplexFn, radius: float, tol: float = 1e-10, center: complex = 0.0,
                 im_bound: float | None = None, min_cell: float | None = None,
                 tag: str = "w", density: float = 12.0) -> ZeroSet:
    """Zeros of f in D(center, radius) by quadtree subdivision and Newton refinement.

    Cell winding numbers come from phase increments of f along the cell edges
    (adaptively sampled so that consecutive samples differ in argument by less
    than 0.8 rad). Cells holding one zero are handed to Newton from their
    centre; a Newton iterate that leaves its cell or fails causes further
    subdivision. Cells smaller than ``min_cell`` report their winding number as
    the multiplicity.

    Args:
        f: Vectorised entire function.
        radius: Disk radius.
        tol: Newton acceptance: |f(z)| <= tol * max(1, |f(center of cell)|)
            or a relative step below machine precision.
        center: Disk centre.
        im_bound: Optional limit |Im z| <= im_bound for the search rectangle.
        min_cell: Smallest cell edge (default 1e-7 (1 + radius)).
        tag: "w" or "s" for the resulting ZeroSet.
        density: Initial samples per unit edge length.
    """
    center = complex(center)
    min_cell = 1e-7 * (1.0 + radius) if min_cell is None else min_cell
    y0, y1 = center.imag - radius, center.imag + radius
    if im_bound is not None:
        y0, y1 = max(y0, -im_bound), min(y1, im_bound)
    pad = 1e-3 * radius
    root = _Cell(center.real - radius - pad, center.real + radius + pad, y0 - pad, y1 + pad)
    book = _EdgeBook(f, density)
    for attempt in range(6):
        wind = _windings(book, [root])[0]
        if math.isfinite(wind) and abs(wind - round(wind)) < 0.25:
            break
        grow = 1e-3 * radius * (attempt + 2)
        root = _Cell(root.x0 - grow, root.x1 + grow, root.y0 - grow, root.y1 + grow)
    else:
        raise ContourTooCloseError("zero on the search boundary")
    total = int(round(wind))
    bounds = (root.x0, root.x1, root.y0, root.y1)
    found: list[tuple[complex, int]] = []
    pending = [(root, total)] if total > 0 else []
    while pending:
        singles = [c for c, w in pending if w == 1]
        nxt: list[tuple[_Cell, int]] = []
        if singles:
            zs, conv = _newton(f, np.array([c.center for c in singles]), box=bounds)
            for c, z, ok in zip(singles, zs, conv):
                if ok and c.contains(z, 1e-12 * (1 + abs(z))):
                    found.append((complex(z), 1))
                else:
                    nxt.append((c, 1))
        multi = [(c, w) for c, w in pending if w > 1]
        for c, w in multi:
            if c.size < min_cell:
                z, ok = _newton(f, np.array([c.center]), box=bounds)
                zc = complex(z[0]) if ok[0] and c.contains(complex(z[0]), c.size) else c.center
                warnings.warn(f"multiple zero (order {w}) reported near {zc}", RuntimeWarning)
                found.append((zc, w))
            else:
                nxt.append((c, w))
        # subdivide everything still pending
        todo = []
        for c, w in nxt:
            if c.size < min_cell:
                found.append((c.center, w))
                continue
            for fx in (0.5, 0.47, 0.53, 0.44, 0.56, 0.41):
                kids = c.split(fx, fx)
                wk = _windings(book, kids)
                if all(math.isfinite(v) and abs(v - round(v)) < 0.25 for v in wk) and \
                        sum(int(round(v)) for v in wk) == w:
                    break
            else:
                raise NumericError(f"cannot subdivide cell around {c.center} cleanly")
            todo.extend((k, int(round(v))) for k, v in zip(kids, wk) if int(round(v)) > 0)
        pending = todo
    if sum(m for _, m in found) != total:
        raise NumericError("zero count mismatch between cells and the search boundary")
    inside = [(z, m) for z, m in found if abs(z - center) < radius]
    if inside:
        res = float(np.max(np.abs(f(np.array([z for z, _ in inside])))))
    else:
        res = 0.0
    return ZeroSet(inside, radius, tag, res, im_bound)


# ------------------------------------------------------------------ matching
def assign(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimal assignment minimising the sum of distances; returns index arrays."""
    D = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    return linear_sum_assignment(D)


def match_zero_sets(a: ZeroSet, b: ZeroSet, epsilon_max: float) -> MatchedPair:
    """Match zeros of a and b one to one (Hungarian assignment on distances)."""
    if not math.isclose(a.radius, b.radius, rel_tol=1e-12):
        raise ZeroMatchError("zero sets have different radii")
    la, lb = a.locations(), b.locations()
    if la.size != lb.size:
        raise ZeroMatchError(f"count mismatch: {la.size} vs {lb.size}")
    if la.size == 0:
        return MatchedPair([], 0.0, 0)
    r, c = assign(la, lb)
    pairs = [(n, complex(la[i]), complex(lb[j]), float(abs(la[i] - lb[j])))
             for n, (i, j) in enumerate(zip(r, c))]
    eps = max(p[3] for p in pairs)
    if eps > epsilon_max:
        raise ZeroMatchError(f"matched distance {eps:.3e} exceeds {epsilon_max:.3e}")
    return MatchedPair(pairs, eps, 0)


# ----------------------------------------------------------- region checks
def strip_depth(l1: float) -> float:
    """Half of (1/4) e^{-4 ||q||_1}: off-axis resonances have |Im k| at least this."""
    return 0.125 * math.exp(-4.0 * l1)


def lowbound_gamma(params: ClassParams) -> float:
    """Largest gamma with delta - C gamma e^{4 gamma} >= 0, C = 8Q^2 e^{2Q} + Q."""
    C = 8.0 * params.Q ** 2 * math.exp(2.0 * params.Q) + params.Q
    g = lambda r: params.delta - C * r * math.exp(4.0 * r)
    return brentq(g, 0.0, params.delta / C)


@dataclass
class ZeroFreeReport:
    strip_depth: float
    strip_violations: list[complex]
    gamma: float
    disk_violations: list[complex]

    @property
    def ok(self) -> bool:
        return not self.strip_violations and not self.disk_violations


def verify_zero_free_regions(zs: ZeroSet, q: Potential, params: ClassParams,
                             s_zeros: ZeroSet | None = None, tol: float = 1e-8) -> ZeroFreeReport:
    """Check the resonance-free strip and the zero-free disk D(gamma)."""
    depth = strip_depth(norm_l1(q))
    strip_bad = [z for z, _ in zs.zeros if abs(z.real) > tol and abs(z.imag) < depth]
    gamma = lowbound_gamma(params)
    disk_bad = [z for z, _ in zs.zeros if abs(z) < gamma]
    if s_zeros is not None:
        disk_bad += [z for z, _ in s_zeros.zeros if abs(z) < gamma]
    return ZeroFreeReport(depth, strip_bad, gamma, disk_bad)


def wnum_bound(r: float, rho: float, kappa: float) -> float:
    """Jensen bound on the number of zeros of w in D(r, 3 i rho)."""
    return 4.0 * math.e * r + 12.0 * rho + math.log(5.0 * kappa)


def snum_bound(r: float, kappa: float, delta: float) -> float:
    """Jensen bound on the number of zeros of s in D(r)."""
    return 2.0 * math.e * r + math.log(kappa / delta)


def count_in_disk(zs: ZeroSet, r: float, center: complex = 0.0) -> int:
    return sum(m for z, m in zs.zeros if abs(z - center) < r)


__all__ = ["ZeroSet", "MatchedPair", "count_zeros", "count_zeros_with_retry", "locate_zeros",
           "match_zero_sets", "verify_zero_free_regions", "ZeroFreeReport", "assign",
           "wnum_bound", "snum_bound", "strip_depth", "lowbound_gamma", "count_in_disk",
           "apriori_kappa", "fd_derivative"]
