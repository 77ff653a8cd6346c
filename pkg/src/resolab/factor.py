"""Truncated Hadamard models of w and s from finite zero data.

A model evaluates e^{a0 + a1 z} z^m prod_n (1 - z/z_n) e^{z/z_n} over the zeros
it holds. For w the constants a0, a1 come from a least-squares fit of
log(2iz) - log(product) on the circle |z - 3i rho| = rho, rho = R^{1/3}.
The fit carries extra nuisance columns (z^2, 1/z, 1/z^2, 1/z^3) that absorb
the truncated tail and the first asymptotic corrections; they are kept for
diagnostics but do not enter the evaluator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ClassViolationError, ConfigError, FitError, HalfBoundStateError,
                     OutOfValidityError, UnsupportedOrderError)
from .potential import ClassParams, apriori_kappa
from .zeros import ZeroSet, lowbound_gamma, match_zero_sets

ARC_POINTS = 32
FIT_BASIS = ("1", "z", "z2", "1/z", "1/z2", "1/z3")
FIT_TOL = 1e-2
ORIGIN_TOL = 1e-10
SMALL_ZERO = 1e-3

# Envelope constants calibrated against the forward solver on square wells of
# height -4, -2, -1, 1.5 with R in {20, 40, 80}: the largest observed ratio was
# 18.4 for w and 18.7 for s, times a safety factor of 10. Not derived from theory.
ENVELOPE_C_W = 200.0
ENVELOPE_C_S = 200.0


def _basis_columns(z: np.ndarray, basis=FIT_BASIS) -> np.ndarray:
    cols = {"1": np.ones_like(z), "z": z, "z2": z * z, "1/z": 1 / z,
            "1/z2": 1 / z ** 2, "1/z3": 1 / z ** 3}
    return np.stack([cols[b] for b in basis], 1)


def arc_points(rho: float, n: int = ARC_POINTS) -> np.ndarray:
    """n equispaced points on |z - 3 i rho| = rho."""
    th = 2.0 * np.pi * np.arange(n) / n
    return 3j * rho + rho * np.exp(1j * th)


@dataclass
class HadamardModel:
    """Genus-one Hadamard model e^{g(z)} z^m prod (1 - z/z_n) e^{z/z_n}.

    Attributes:
        zero_data: Zeros kept in the product (a zero at the origin is carried
            by origin_order instead).
        exp_linear: a1 (or b1).
        exp_const: a0 (or b0).
        origin_order: m (or l).
        tail_radius: R, the truncation radius.
        kind: "w" or "s".
        nuisance: Fitted non-evaluated coefficients (w models only).
        fit_residual: RMS residual of the arc fit.
        rho: Arc parameter of the fit.
        params: Class parameters used by tail bounds, when known.
    """

    zero_data: ZeroSet
    exp_linear: complex
    exp_const: complex
    origin_order: int
    tail_radius: float
    kind: str = "w"
    nuisance: dict = field(default_factory=dict)
    fit_residual: float = 0.0
    rho: float = 0.0
    params: ClassParams | None = None

    def __post_init__(self):
        if self.kind == "w" and self.origin_order not in (0, 1):
            raise ConfigError("w models have origin order 0 or 1")
        if self.origin_order < 0:
            raise ConfigError("origin order must be nonnegative")
        self._zeros = self.zero_data.locations()
        self._zeros = self._zeros[np.abs(self._zeros) > ORIGIN_TOL]
        # For tiny zeros e^{z/z_n} is huge and must cancel against the fitted
        # linear exponent; w models drop it there and let a1 absorb it.
        self._expo = ((np.abs(self._zeros) >= SMALL_ZERO) if self.kind == "w"
                      else np.ones(self._zeros.size, dtype=bool))

    @property
    def zeros(self) -> np.ndarray:
        return self._zeros

    def log_product(self, z) -> np.ndarray:
        """Sum of log((1 - z/z_n) e^{z/z_n}) (principal branch, factorwise).

        In w models the exponential is omitted for |z_n| < SMALL_ZERO.
        """
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        parts = max(1, self._zeros.size // 256)
        for chunk, expo in zip(np.array_split(self._zeros, parts), np.array_split(self._expo, parts)):
            if chunk.size:
                r = z[..., None] / chunk
                out += np.sum(np.log1p(-r) + r * expo, axis=-1)
        return out

    def log_eval(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = self.exp_const + self.exp_linear * z + self.log_product(z)
        if self.origin_order:
            out = out + self.origin_order * np.log(z)
        return out

    def __call__(self, z) -> np.ndarray:
        return np.exp(self.log_eval(z))

    @property
    def kernel_corner(self) -> complex:
        """Estimate of K(-1,-1) = (1/2) integral of q from the 1/z fit coefficient."""
        return 1j * complex(self.nuisance.get("1/z", 0.0))

    # -------------------------------------------------------------- I/O
    def to_dict(self) -> dict:
        c = lambda v: [complex(v).real, complex(v).imag]
        out = {"kind": self.kind, "zeros": self.zero_data.to_dict(),
               "exp_linear": c(self.exp_linear), "exp_const": c(self.exp_const),
               "origin_order": self.origin_order, "tail_radius": self.tail_radius,
               "nuisance": {k: c(v) for k, v in self.nuisance.items()},
               "fit_residual": self.fit_residual, "rho": self.rho}
        if self.params is not None:
            out["params"] = {"Q": self.params.Q, "delta": self.params.delta, "p": self.params.p}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "HadamardModel":
        try:
            cx = lambda v: complex(v[0], v[1])
            params = ClassParams(**d["params"]) if "params" in d else None
            return cls(ZeroSet.from_dict(d["zeros"]), cx(d["exp_linear"]), cx(d["exp_const"]),
                       int(d["origin_order"]), float(d["tail_radius"]), d.get("kind", "w"),
                       {k: cx(v) for k, v in d.get("nuisance", {}).items()},
                       float(d.get("fit_residual", 0.0)), float(d.get("rho", 0.0)), params)
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ConfigError(f"malformed model JSON: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "HadamardModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model: {exc}") from exc


def _split_origin(zs: ZeroSet) -> int:
    return sum(m for z, m in zs.zeros if abs(z) <= ORIGIN_TOL)


def build_w_model(zeros_w: ZeroSet, params: ClassParams | None = None,
                  origin_order: int | None = None, n_arc: int = ARC_POINTS,
                  basis=FIT_BASIS, fit_tol: float = FIT_TOL) -> HadamardModel:
    """Hadamard model of w normalised by w(z) ~ 2iz on the arc |z - 3i rho| = rho.

    Args:
        zeros_w: Zeros of w in D(R).
        params: Class parameters (stored for tail bounds).
        origin_order: Force m; by default a zero at the origin raises
            HalfBoundStateError.
        n_arc: Number of arc points.
        basis: Fit columns; must contain "1" and "z".
        fit_tol: Largest acceptable RMS residual of the fit.
    """
    if zeros_w.function_tag != "w":
        raise ConfigError("build_w_model needs a zero set tagged 'w'")
    m0 = _split_origin(zeros_w)
    if origin_order is None:
        if m0:
            raise HalfBoundStateError("w vanishes at the origin (half-bound state)")
        m = 0
    else:
        m = int(origin_order)
    bad = [z for z, _ in zeros_w.zeros if abs(z.imag) < ORIGIN_TOL and abs(z.real) > ORIGIN_TOL]
    if bad:
        raise ConfigError(f"w zeros on the real axis away from 0: {bad[:3]}")
    R = zeros_w.radius
    rho = R ** (1.0 / 3.0)
    z = arc_points(rho, n_arc)
    z0 = 3j * rho
    model = HadamardModel(zeros_w, 0.0, 0.0, m, R, "w", rho=rho, params=params)
    wn = model.zeros
    # branch-continuous logs on the arc: log(1 - z/w) = log(1 - z0/w) + log((w - z)/(w - z0))
    logp = np.sum(np.log1p(-z0 / wn) + np.log((wn - z[:, None]) / (wn - z0))
                  + z[:, None] / wn * model._expo, axis=1) if wn.size else np.zeros_like(z)
    target = math.log(2.0) + 0.5j * math.pi + np.log(z) - logp
    if m:
        target = target - m * np.log(z)
    M = _basis_columns(z, basis)
    coef, *_ = np.linalg.lstsq(M, target, rcond=None)
    resid = float(np.sqrt(np.mean(np.abs(M @ coef - target) ** 2)))
    if not np.isfinite(resid) or resid > fit_tol:
        raise FitError(f"arc fit residual {resid:.2e} exceeds {fit_tol:.2e}")
    cf = dict(zip(basis, coef))
    model.exp_const = complex(cf["1"])
    model.exp_linear = complex(cf["z"])
    model.nuisance = {k: complex(v) for k, v in cf.items() if k not in ("1", "z")}
    model.fit_residual = resid
    return model


def unitarity_order(w_model: HadamardModel, n_steps: int = 6) -> int:
    """Vanishing order (in z^2) at 0 of w(z) w(-z) - 4 z^2 by ratio tests."""
    z = 10.0 ** -np.arange(1, n_steps + 1)
    F = np.abs(w_model(z) * w_model(-z) - 4 * z * z)
    if np.all(F == 0):
        raise UnsupportedOrderError("w(z)w(-z) - 4z^2 vanishes identically")
    ratio = F[-2] / max(F[-1], 1e-300)
    return max(0, int(round(math.log10(ratio) / 2.0)))


def build_s_model(zeros_s: ZeroSet, w_model: HadamardModel, eigen_hint: complex | None = None,
                  b1: complex = 0.0, delta: float | None = None) -> HadamardModel:
    """Hadamard model of s^- normalised by s(0) = -w(0) and a given b1.

    Args:
        zeros_s: Zeros of s^- in D(R).
        w_model: Model of w for the same potential.
        eigen_hint: Unused when l = 0 (kept for the half-bound-state branch).
        b1: Linear exponent (shift convention), default 0.
        delta: Class lower bound on |s(0)|; |w(0)| < delta makes the sign
            of e^{b0} ambiguous.
    """
    if zeros_s.function_tag != "s":
        raise ConfigError("build_s_model needs a zero set tagged 's'")
    ell = unitarity_order(w_model)
    if ell != 0 or _split_origin(zeros_s):
        raise HalfBoundStateError(f"s has a zero of order {ell} at the origin")
    w0 = complex(w_model(np.array([0.0]))[0])
    if delta is None and w_model.params is not None:
        delta = w_model.params.delta
    if delta is not None and abs(w0) < delta:
        raise ClassViolationError(f"|w(0)| = {abs(w0):.3e} below delta; sign of e^b0 ambiguous")
    if w0 == 0:
        raise HalfBoundStateError("w(0) = 0")
    # e^{b0} = s(0) = -w(0)
    b0 = complex(np.log(-w0))
    return HadamardModel(zeros_s, complex(b1), b0, 0, zeros_s.radius, "s",
                         rho=w_model.rho, params=w_model.params)


# ----------------------------------------------------------------- bounds
def tail_constant(model: HadamardModel, params: ClassParams | None = None) -> float:
    params = params or model.params
    if params is None:
        raise ConfigError("tail bound needs class parameters")
    kappa = apriori_kappa(params.Q)
    if model.kind == "w":
        return 18.0 * (4.0 + math.log((kappa + 2.0) / 3.0))
    return 18.0 * (2.0 + math.log(kappa / params.delta))


def tail_bound(model: HadamardModel, z, params: ClassParams | None = None) -> np.ndarray:
    """Bound on |Pi(R, z) - 1| for the truncated tail, valid for |z| <= R/2."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > model.tail_radius / 2.0 * (1 + 1e-12)):
        raise OutOfValidityError("tail bound requires |z| <= R/2")
    C = tail_constant(model, params)
    x = C * np.abs(z) ** 2 / model.tail_radius
    return x * np.exp(x)


def w_product(za: np.ndarray, zb: np.ndarray, z) -> np.ndarray:
    """W(z) = prod (z - a_n)/(z - b_n) for matched zero lists."""
    z = np.asarray(z, dtype=complex)
    if za.size == 0:
        return np.ones(z.shape, dtype=complex)
    return np.exp(np.sum(np.log((z[..., None] - za) / (z[..., None] - zb)), axis=-1))


def w_product_bound(epsilon: float, n_zeros: int, params: ClassParams) -> float:
    """C eps N e^{C eps N} with 2/C = min(gamma, e^{-4Q}/8)."""
    C = 2.0 / min(lowbound_gamma(params), math.exp(-4.0 * params.Q) / 8.0)
    x = C * epsilon * n_zeros
    return x * math.exp(x) if x < 700 else math.inf


def difference_envelope(model_a: HadamardModel, model_b: HadamardModel, z: float,
                        eta: float, epsilon: float | None = None,
                        constant: float | None = None) -> float:
    """Right-hand side of the model-difference estimate at real z.

    For w: C (1 + |z|) (R^{-1/3} + eps N). For s: C (eps N / eta + R^{-1/3}
    + (1 + |z|) eps N) + |s_a(0) - s_b(0)|. The constant is the calibrated
    default unless given.
    """
    if model_a.kind != model_b.kind:
        raise ConfigError("envelope needs two models of the same kind")
    R = model_a.tail_radius
    lim = R ** (1.0 / 3.0)
    if abs(z) > lim:
        raise OutOfValidityError(f"|z| = {abs(z):.3g} outside [-R^(1/3), R^(1/3)]")
    if epsilon is None:
        epsilon = match_zero_sets(model_a.zero_data, model_b.zero_data, math.inf).epsilon
    N = model_a.zero_data.count
    eN = epsilon * N
    if model_a.kind == "w":
        C = ENVELOPE_C_W if constant is None else constant
        return C * (1 + abs(z)) * (R ** (-1.0 / 3.0) + eN)
    if not eta > 0:
        raise ConfigError("eta must be positive")
    real_zeros = [s.real for s in model_a.zeros if abs(s.imag) < 1e-8]
    if real_zeros and min(abs(z - s) for s in real_zeros) < eta:
        raise OutOfValidityError("z within eta of a real zero of s")
    C = ENVELOPE_C_S if constant is None else constant
    s0 = abs(complex(model_a(np.array([0.0]))[0] - model_b(np.array([0.0]))[0]))
    return C * (eN / eta + R ** (-1.0 / 3.0) + (1 + abs(z)) * eN) + s0


def model_ratio(model_a: HadamardModel, model_b: HadamardModel, z) -> np.ndarray:
    """model_a(z) / model_b(z) computed as one exponential of log differences."""
    return np.exp(model_a.log_eval(z) - model_b.log_eval(z))


__all__ = ["HadamardModel", "build_w_model", "build_s_model", "tail_bound", "tail_constant",
           "difference_envelope", "model_ratio", "w_product", "w_product_bound",
           "unitarity_order", "arc_points", "FIT_BASIS", "ARC_POINTS"]
