"""Jost solutions, the Wronskians w and s, and the scattering matrix.

The equation -y'' + q y = z^2 y is integrated as a first-order system for
(y, y') with complex entries. The interval is cut at the kinks and jumps of
the piecewise-linear q. On non-constant pieces an adaptive Dormand-Prince
8(5,3) step is used (tableau taken from scipy); on constant pieces the exact
transfer matrix is applied unless ``method="rk"`` forces Runge-Kutta.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np
from numba import njit, prange
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import ConfigError, IntegrationError, NearSingularError, OverflowGuardError
from .potential import Potential

TOL_ODE = 1e-10
ATOL_ODE = 1e-12
IM_GUARD = 50.0

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS], dtype=float)
_B = np.ascontiguousarray(_dop.B, dtype=float)
_C = np.ascontiguousarray(_dop.C[:_NS], dtype=float)
_E3 = np.ascontiguousarray(_dop.E3, dtype=float)
_E5 = np.ascontiguousarray(_dop.E5, dtype=float)


def _configure_threads() -> None:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    env = os.environ.get("RESOLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"RESOLAB_THREADS must be an integer, got {env!r}") from exc
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


_configure_threads()


# --------------------------------------------------------------------- kernels
@njit(cache=True)
def _qval(cs, ce, h, klo, khi, x):
    u = (x + 1.0) / h
    k = int(np.floor(u))
    if k < klo:
        k = klo
    if k > khi:
        k = khi
    return cs[k] + (ce[k] - cs[k]) * (u - k)


@njit(cache=True)
def _rhs(cs, ce, h, klo, khi, z2, x, y, out):
    qz = _qval(cs, ce, h, klo, khi, x) - z2
    for j in range(y.shape[0] // 2):
        out[2 * j] = y[2 * j + 1]
        out[2 * j + 1] = qz * y[2 * j]


@njit(cache=True)
def _rk_piece(cs, ce, h, klo, khi, z2, u, v, y, hstep, rtol, atol, A, B, C, E3, E5,
              K, ytmp, ynew, f):
    """Adaptive DOP853 from u to v on one smooth piece. Returns (status, x, hstep)."""
    m = y.shape[0]
    direction = 1.0 if v > u else -1.0
    x = u
    _rhs(cs, ce, h, klo, khi, z2, x, y, f)
    span = abs(v - u)
    hs = min(hstep, span)
    hmin = 1e-14 * (1.0 + abs(u))
    while (v - x) * direction > 0.0:
        if hs < hmin:
            return 1, x, hs
        step = hs * direction
        xn = x + step
        if (xn - v) * direction > 0.0:
            xn = v
        step = xn - x
        for i in range(m):
            K[0, i] = f[i]
        for s in range(1, 12):
            for i in range(m):
                acc = 0j
                for j in range(s):
                    acc += A[s, j] * K[j, i]
                ytmp[i] = y[i] + step * acc
            _rhs(cs, ce, h, klo, khi, z2, x + C[s] * step, ytmp, K[s])
        for i in range(m):
            acc = 0j
            for s in range(12):
                acc += B[s] * K[s, i]
            ynew[i] = y[i] + step * acc
        _rhs(cs, ce, h, klo, khi, z2, xn, ynew, K[12])
        e5 = 0.0
        e3 = 0.0
        for i in range(m):
            a5 = 0j
            a3 = 0j
            for s in range(13):
                a5 += E5[s] * K[s, i]
                a3 += E3[s] * K[s, i]
            sc = atol + max(abs(y[i]), abs(ynew[i])) * rtol
            e5 += (abs(a5) / sc) ** 2
            e3 += (abs(a3) / sc) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = abs(step) * e5 / np.sqrt((e5 + 0.01 * e3) * m)
        if err < 1.0:
            factor = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            x = xn
            for i in range(m):
                y[i] = ynew[i]
                f[i] = K[12, i]
            hs = hs * factor
        else:
            hs = hs * max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return 0, x, hs


@njit(cache=True)
def _transfer(z2, q0, d, y):
    """Exact propagation over length d where q = q0 is constant."""
    k2 = z2 - q0
    k = np.sqrt(k2 + 0j)
    kd = k * d
    if abs(kd) < 1e-4:
        # Taylor series of cos(kd) and sin(kd)/k
        c = 1.0 - kd * kd / 2.0 + kd ** 4 / 24.0
        sk = d * (1.0 - kd * kd / 6.0 + kd ** 4 / 120.0)
    else:
        c = np.cos(kd)
        sk = np.sin(kd) / k
    for j in range(y.shape[0] // 2):
        a = y[2 * j]
        b = y[2 * j + 1]
        y[2 * j] = c * a + sk * b
        y[2 * j + 1] = -k2 * sk * a + c * b


@njit(cache=True)
def _propagate(cs, ce, h, kb, const, z, xa, xb, y, exact, rtol, atol, A, B, C, E3, E5):
    """Carry y from xa to xb (both in [-1, 1]) across all linear pieces."""
    if xa == xb:
        return 0, xa
    z2 = z * z
    hstep = 0.05 / (1.0 + abs(z))
    npieces = kb.shape[0] - 1
    forward = xb > xa
    m = y.shape[0]
    K = np.empty((13, m), dtype=np.complex128)
    ytmp = np.empty(m, dtype=np.complex128)
    ynew = np.empty(m, dtype=np.complex128)
    f = np.empty(m, dtype=np.complex128)
    for pp in range(npieces):
        p = pp if forward else npieces - 1 - pp
        lo = -1.0 + kb[p] * h
        hi = -1.0 + kb[p + 1] * h
        if forward:
            u = max(lo, xa)
            v = min(hi, xb)
        else:
            u = min(hi, xa)
            v = max(lo, xb)
        if (forward and v <= u) or ((not forward) and v >= u):
            continue
        if exact and const[p]:
            _transfer(z2, cs[kb[p]], v - u, y)
        else:
            st, xf, hstep = _rk_piece(cs, ce, h, kb[p], kb[p + 1] - 1, z2, u, v, y,
                                      hstep, rtol, atol, A, B, C, E3, E5,
                                      K, ytmp, ynew, f)
            if st != 0:
                return st, xf
    return 0, xb


@njit(cache=True, parallel=True)
def _ws_batch(cs, ce, h, kb, const, xlo, xhi, zs, xe, exact, rtol, atol, A, B, C, E3, E5,
              w_out, s_out, status, xfail):
    # Start at the support edges: carrying a recessive exponential across a
    # potential-free stretch loses everything to cancellation when |Im z| is large.
    xe = min(max(xe, xlo), xhi)
    for n in prange(zs.shape[0]):
        z = zs[n]
        ez = np.exp(-1j * z * xlo)
        emz = np.exp(1j * z * xlo)
        fp = np.empty(2, dtype=np.complex128)
        fp[0] = np.exp(1j * z * xhi)
        fp[1] = 1j * z * fp[0]
        st, xf = _propagate(cs, ce, h, kb, const, z, xhi, xe, fp, exact,
                            rtol, atol, A, B, C, E3, E5)
        if st != 0:
            status[n] = st
            xfail[n] = xf
            continue
        fm = np.empty(4, dtype=np.complex128)
        fm[0] = ez
        fm[1] = -1j * z * ez
        fm[2] = emz
        fm[3] = 1j * z * emz
        st, xf = _propagate(cs, ce, h, kb, const, z, xlo, xe, fm, exact,
                            rtol, atol, A, B, C, E3, E5)
        if st != 0:
            status[n] = st
            xfail[n] = xf
            continue
        w_out[n] = fm[0] * fp[1] - fm[1] * fp[0]
        s_out[n] = fp[0] * fm[3] - fp[1] * fm[2]
        status[n] = 0


# ------------------------------------------------------------------ wrappers
@dataclass(frozen=True)
class _Prepared:
    cs: np.ndarray
    ce: np.ndarray
    h: float
    kb: np.ndarray
    const: np.ndarray
    lo: float
    hi: float


def _prepare(q: Potential) -> _Prepared:
    cache = getattr(q, "_jost_cache", None)
    if cache is not None:
        return cache
    cs, ce = q.cells()
    kb = q.breakpoints()
    const = np.array([np.all(cs[kb[p]:kb[p + 1]] == cs[kb[p]])
                      and np.all(ce[kb[p]:kb[p + 1]] == cs[kb[p]])
                      for p in range(kb.size - 1)], dtype=np.bool_)
    # support hull; outside it the Jost solutions are pure exponentials
    nz = np.nonzero((cs != 0.0) | (ce != 0.0))[0]
    lo, hi = (-1.0 + nz[0] * q.grid_step, -1.0 + (nz[-1] + 1) * q.grid_step) if nz.size else (0.0, 0.0)
    prep = _Prepared(np.ascontiguousarray(cs), np.ascontiguousarray(ce),
                     q.grid_step, kb, const, lo, hi)
    object.__setattr__(q, "_jost_cache", prep)
    return prep


def _guard(z: np.ndarray) -> None:
    if z.size and np.max(np.abs(z.imag)) > IM_GUARD:
        raise OverflowGuardError(f"|Im z| exceeds the guard {IM_GUARD}")


def _exact_flag(method: str) -> bool:
    if method not in ("auto", "rk"):
        raise ConfigError(f"unknown integration method {method!r}")
    return method == "auto"


def w_and_s(q: Potential, z, x_eval: float = 0.0, method: str = "auto",
            rtol: float = TOL_ODE, atol: float = ATOL_ODE) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised w(z) and s^-(z) as Wronskians at ``x_eval``.

    Args:
        q: Potential.
        z: Complex scalar or array.
        x_eval: Point where the Wronskians are formed, clamped into the
            support hull of q (the Wronskians do not depend on it).
        method: ``"auto"`` (exact on constant pieces) or ``"rk"``.

    Returns:
        Arrays (w, s_minus) with the shape of z.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zs = np.ascontiguousarray(z.ravel())
    _guard(zs)
    if not -1.0 <= x_eval <= 1.0:
        raise ConfigError("x_eval must lie in [-1, 1]")
    p = _prepare(q)
    w = np.empty(zs.size, dtype=complex)
    s = np.empty(zs.size, dtype=complex)
    status = np.zeros(zs.size, dtype=np.int64)
    xfail = np.zeros(zs.size)
    _ws_batch(p.cs, p.ce, p.h, p.kb, p.const, p.lo, p.hi, zs, float(x_eval), _exact_flag(method),
              rtol, atol, _A, _B, _C, _E3, _E5, w, s, status, xfail)
    if np.any(status):
        i = int(np.nonzero(status)[0][0])
        raise IntegrationError(f"step size underflow at z={zs[i]}", float(xfail[i]))
    return w.reshape(shape), s.reshape(shape)


@dataclass(frozen=True)
class JostEval:
    """Value and x-derivative of a Jost solution at (x, z)."""

    value: complex
    derivative: complex
    side: str
    x: float
    z: complex


def jost_solve(q: Potential, z: complex, side: str, x_targets: Sequence[float],
               method: str = "auto") -> list[JostEval]:
    """Jost solution f^+ (side "plus") or f^- (side "minus") at the targets.

    Outside the support of q the solutions are the pure exponentials. Inside,
    integration starts at the support edge with that data and proceeds inward
    through the sorted targets.
    """
    if side not in ("plus", "minus"):
        raise ConfigError(f"side must be 'plus' or 'minus', got {side!r}")
    z = complex(z)
    _guard(np.array([z]))
    xs = [float(x) for x in x_targets]
    if any(not -1.0 <= x <= 1.0 for x in xs):
        raise ConfigError("x_targets must lie in [-1, 1]")
    p = _prepare(q)
    sign = 1.0 if side == "plus" else -1.0
    x0 = p.hi if side == "plus" else p.lo
    order = sorted(range(len(xs)), key=lambda i: -sign * xs[i])
    y = np.array([np.exp(sign * 1j * z * x0), sign * 1j * z * np.exp(sign * 1j * z * x0)])
    out: list[JostEval | None] = [None] * len(xs)
    cur = x0
    for i in order:
        if sign * (xs[i] - x0) >= 0.0:
            e = np.exp(sign * 1j * z * xs[i])
            out[i] = JostEval(complex(e), complex(sign * 1j * z * e), side, xs[i], z)
            continue
        st, xf = _propagate(p.cs, p.ce, p.h, p.kb, p.const, z, cur, xs[i], y,
                            _exact_flag(method), TOL_ODE, ATOL_ODE, _A, _B, _C, _E3, _E5)
        if st != 0:
            raise IntegrationError(f"step size underflow at z={z}", float(xf))
        cur = xs[i]
        out[i] = JostEval(complex(y[0]), complex(y[1]), side, xs[i], z)
    return out  # type: ignore[return-value]


def compute_w(q: Potential, z: complex, x_eval: float = 0.0, method: str = "auto") -> complex:
    """w(z) = f^- f^+' - f^-' f^+ evaluated at ``x_eval`` (default 0)."""
    return complex(w_and_s(q, z, x_eval, method)[0])


def compute_s(q: Potential, z: complex, sign: str = "minus", method: str = "auto") -> complex:
    """s^-(z) = [f^+(., z), f^-(., -z)]; s^+(z) is returned as s^-(-z)."""
    if sign not in ("plus", "minus"):
        raise ConfigError(f"sign must be 'plus' or 'minus', got {sign!r}")
    z = complex(z)
    return complex(w_and_s(q, z if sign == "minus" else -z, 0.0, method)[1])


@dataclass
class ScatteringPair:
    """Evaluators for w and s^- from one source."""

    w_eval: Callable[[np.ndarray], np.ndarray]
    s_eval: Callable[[np.ndarray], np.ndarray]
    source: str
    meta: dict = field(default_factory=dict)

    def s_plus(self, z):
        return self.s_eval(-np.asarray(z, dtype=complex))


def forward_pair(q: Potential, method: str = "auto") -> ScatteringPair:
    """ScatteringPair backed by the ODE solver."""
    return ScatteringPair(lambda z: w_and_s(q, z, method=method)[0],
                          lambda z: w_and_s(q, z, method=method)[1],
                          "forward", {"label": q.label, "method": method})


def scattering_matrix(q: Potential, z: float, method: str = "auto") -> np.ndarray:
    """[[T, R^-], [R^+, T]] with T = 2iz/w and R^{+-} = s^{+-}/w at real z != 0."""
    z = float(z)
    if z == 0.0:
        raise ConfigError("scattering matrix needs real z != 0")
    w, s = w_and_s(q, np.array([z, -z]), method=method)
    if abs(w[0]) < 1e-12 * (1.0 + abs(z)):
        raise NearSingularError(f"|w({z})| below threshold")
    t = 2j * z / w[0]
    return np.array([[t, s[0] / w[0]], [s[1] / w[0], t]])
