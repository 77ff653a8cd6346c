"""Transformation-operator kernels and their representations of w and s.

All kernels live on the triangle {-1 <= x <= t <= 2 - x}, parametrised by the
characteristic variables alpha = (x + t)/2 in [-1, 1] and beta = (t - x)/2 in
[0, 1 + alpha]. Node (i, j) sits at alpha = -1 + i h, beta = j h with j <= i.
The line x = -1 is the diagonal i = j (t = -1 + 2 i h) and the diagonal of the
kernel, K(x, x), is the column j = 0.

A general Goursat problem transforming a source potential p_s into a target
potential p_t reads u_{alpha beta} = (p_s(alpha + beta) - p_t(alpha - beta)) u
with u(alpha, 0) = (1/2) int_alpha^1 (p_t - p_s). K^+ has p_s = 0, p_t = q.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergenceError, UnsupportedOrderError
from .potential import Potential, norm_l1

_MAGIC = b"RSLBKERN"


# ----------------------------------------------------------------- grid tools
def grid_size(step: float) -> int:
    n = int(round(2.0 / step))
    if n < 4 or abs(n * step - 2.0) > 1e-9:
        raise ConfigError(f"step {step} must divide 2 evenly")
    return n


def triangle_mask(n: int) -> np.ndarray:
    i = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    return j <= i


def sample_source(p: Potential | None, t: np.ndarray) -> np.ndarray:
    """Source potential at t; the support edges t = +-1 are interior lines of
    the triangle, so they take the average of the one-sided limits."""
    if p is None:
        return np.zeros_like(t)
    v = p(t)
    edge = np.isclose(np.abs(t), 1.0, rtol=0.0, atol=1e-12)
    return np.where(edge, 0.5 * v, v)


def sample_target(p: Potential | None, x: np.ndarray) -> np.ndarray:
    """Target potential at x; x = -1 is the triangle boundary, so the inside
    value is used."""
    if p is None:
        return np.zeros_like(x)
    return p(x)


def coefficient(source: Potential | None, target: Potential | None, step: float) -> np.ndarray:
    """c(alpha, beta) = p_s(alpha + beta) - p_t(alpha - beta), zero off the triangle."""
    n = grid_size(step)
    i = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    alpha = -1.0 + i * step
    beta = j * step
    mask = j <= i
    t = np.broadcast_to(alpha + beta, mask.shape)
    x = np.broadcast_to(alpha - beta, mask.shape)
    c = sample_source(source, np.ascontiguousarray(t)) - sample_target(target, np.ascontiguousarray(x))
    return np.where(mask, c, 0.0)


def diagonal_data(source: Potential | None, target: Potential | None, step: float) -> np.ndarray:
    """(1/2) int_alpha^1 (p_t - p_s) at the alpha nodes, exact for the interpolant."""
    n = grid_size(step)
    alpha = -1.0 + step * np.arange(n + 1)
    out = np.zeros(n + 1)
    if target is not None:
        out += 0.5 * target.tail_integral(alpha)
    if source is not None:
        out -= 0.5 * source.tail_integral(alpha)
    return out


def cum_beta(F: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid integral from beta = 0 to each beta node, row by row."""
    out = np.zeros_like(F)
    out[:, 1:] = np.cumsum(0.5 * h * (F[:, 1:] + F[:, :-1]), axis=1)
    return out


def rcum_alpha(G: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid integral from each alpha node to alpha = 1, column by column."""
    inc = 0.5 * h * (G[1:] + G[:-1])
    out = np.zeros_like(G)
    out[:-1] = np.cumsum(inc[::-1], axis=0)[::-1]
    return out


def goursat_fixed_point(source: Potential | None, target: Potential | None, step: float,
                        tol: float = 1e-10, max_iter: int = 200) -> tuple[np.ndarray, int]:
    """Solve u = u(alpha, 0) - int_alpha^1 int_0^beta c u by successive approximation.

    Returns:
        Grid of u on the triangle and the number of iterations used.
    """
    n = grid_size(step)
    mask = triangle_mask(n)
    c = coefficient(source, target, step)
    h0 = np.where(mask, diagonal_data(source, target, step)[:, None], 0.0)
    u = h0.copy()
    for it in range(1, max_iter + 1):
        un = h0 - np.where(mask, rcum_alpha(cum_beta(c * u, step), step), 0.0)
        diff = float(np.max(np.abs(un - u)))
        u = un
        if diff < tol:
            return u, it
    raise DivergenceError(f"Goursat iteration did not reach {tol} in {max_iter} iterations")


def neumann_step(c: np.ndarray, term: np.ndarray, step: float, mask: np.ndarray) -> np.ndarray:
    """One application of the line-data operator:
    (T u)(alpha, beta) = int_alpha^1 d alpha' int_beta^{1 + alpha} c u d beta'."""
    D = rcum_alpha(cum_beta(c * term, step), step)
    return np.where(mask, np.diag(D)[:, None] - D, 0.0)


# --------------------------------------------------------------------- kernel
@dataclass
class KernelGrid:
    """K^+ on the characteristic triangle grid.

    Attributes:
        values: (n + 1, n + 1) array, entry (i, j) at alpha = -1 + i h,
            beta = j h for j <= i, zero elsewhere.
        step: Grid step h in alpha and beta.
        iterations_used: Fixed-point iterations of the construction.
        potential: The potential the kernel was built from, when known.
    """

    values: np.ndarray
    step: float
    iterations_used: int
    potential: Potential | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def t_line(self) -> np.ndarray:
        return -1.0 + 2.0 * self.step * np.arange(self.n + 1)

    @property
    def x_diag(self) -> np.ndarray:
        return -1.0 + self.step * np.arange(self.n + 1)

    def line(self) -> np.ndarray:
        """K(-1, t) at t = -1 + 2 i h."""
        return np.diag(self.values).copy()

    def diagonal(self) -> np.ndarray:
        """K(x, x) at x = -1 + i h."""
        return self.values[:, 0].copy()

    def at(self, x, t) -> np.ndarray:
        """Bilinear interpolation in (alpha, beta); zero for t > 2 - x."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        a = (0.5 * (x + t) + 1.0) / self.step
        b = 0.5 * (t - x) / self.step
        n = self.n
        i0 = np.clip(np.floor(a).astype(int), 0, n - 1)
        j0 = np.clip(np.floor(b).astype(int), 0, n - 1)
        fa = a - i0
        fb = b - j0
        V = self.values
        v = ((1 - fa) * (1 - fb) * V[i0, j0] + fa * (1 - fb) * V[i0 + 1, j0]
             + (1 - fa) * fb * V[i0, j0 + 1] + fa * fb * V[i0 + 1, j0 + 1])
        outside = (a > n + 1e-9) | (b < -1e-9) | (b > a + 1e-9)
        return np.where(outside, 0.0, v)

    def partials(self) -> tuple[np.ndarray, np.ndarray]:
        """Finite-difference K_x and K_t at all triangle nodes.

        Centred differences inside, second-order one-sided differences at the
        edges of the triangle.
        """
        Ka, Kb = _alpha_beta_partials(self.values, self.step)
        return 0.5 * (Ka - Kb), 0.5 * (Ka + Kb)

    def line_partials(self) -> tuple[np.ndarray, np.ndarray]:
        """(K_x - K_t, K_x + K_t) along x = -1, i.e. (-K_beta, K_alpha).

        When the potential is known the partials come from differentiating the
        integral equation, K_beta = -int_alpha^1 c K d alpha' and
        K_alpha = -q(alpha)/2 + int_0^beta c K d beta', which keeps the
        trapezoid accuracy of K. Otherwise finite differences are used.
        """
        d = np.arange(self.n + 1)
        h = self.step
        if self.potential is None:
            Ka, Kb = _alpha_beta_partials(self.values, h)
            return -Kb[d, d], Ka[d, d]
        cu = coefficient(None, self.potential, h) * self.values
        Kb = -rcum_alpha(cu, h)[d, d]
        Ka = -0.5 * sample_target(self.potential, self.x_diag) + cum_beta(cu, h)[d, d]
        return -Kb, Ka

    def dump(self, path: str | Path) -> None:
        """Binary dump: magic, step, n, x range, t range, then row-major values."""
        header = _MAGIC + struct.pack("<dqdddd", self.step, self.n, -1.0, 1.0, -1.0, 3.0)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "KernelGrid":
        raw = Path(path).read_bytes()
        if raw[:8] != _MAGIC:
            raise ConfigError("not a kernel dump")
        step, n, *_ = struct.unpack("<dqdddd", raw[8:48])
        vals = np.frombuffer(raw[48:], dtype="<f8").reshape(n + 1, n + 1).copy()
        return cls(vals, step, 0)


def _alpha_beta_partials(V: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    n = V.shape[0] - 1
    Ka = np.zeros_like(V)
    Kb = np.zeros_like(V)
    for i in range(n + 1):
        row = V[i, :i + 1]
        if i >= 2:
            Kb[i, :i + 1] = np.gradient(row, h, edge_order=2)
        elif i == 1:
            Kb[1, :2] = (row[1] - row[0]) / h
    for j in range(n + 1):
        col = V[j:, j]
        if col.size >= 3:
            Ka[j:, j] = np.gradient(col, h, edge_order=2)
        elif col.size == 2:
            Ka[j:, j] = (col[1] - col[0]) / h
    # corners with a single admissible node: extrapolate linearly
    Kb[0, 0] = 2 * Kb[1, 1] - Kb[2, 2] if n >= 2 else 0.0
    Ka[n, n] = 2 * Ka[n - 1, n - 1] - Ka[n - 2, n - 2] if n >= 2 else 0.0
    return Ka, Kb


def build_kernel(q: Potential, step: float = 1e-2, tol: float = 1e-10,
                 max_iter: int = 200) -> KernelGrid:
    """K^+ for q by fixed-point iteration of the Goursat integral equation."""
    u, it = goursat_fixed_point(None, q, step, tol, max_iter)
    return KernelGrid(u, step, it, q)


def _trapezoid(y: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    return dx * (np.sum(y, axis=axis) - 0.5 * (np.take(y, 0, axis) + np.take(y, -1, axis)))


def kernel_w_s(kern: KernelGrid, q: Potential, z) -> tuple[np.ndarray, np.ndarray]:
    """w(z) and s^-(z) from the kernel representation along x = -1.

    w = 2iz - int q + int (K_x - K_t)(-1, t) e^{iz(t+1)} dt and
    s^- = -int (K_x + K_t)(-1, t) e^{iz(t-1)} dt, trapezoid in t.
    """
    z = np.asarray(z, dtype=complex)
    t = kern.t_line
    dm, dp = kern.line_partials()
    ph = np.exp(1j * z[..., None] * t)
    dt = 2.0 * kern.step
    total = float(q.cumulative()[-1])
    w = 2j * z - total + np.exp(1j * z) * _trapezoid(dm * ph, dt)
    s = -np.exp(-1j * z) * _trapezoid(dp * ph, dt)
    return w, s


def jost_from_kernel(kern: KernelGrid, z) -> np.ndarray:
    """f^+(-1, z) = e^{-iz} + int_{-1}^{3} K(-1, t) e^{izt} dt."""
    z = np.asarray(z, dtype=complex)
    t = kern.t_line
    return np.exp(-1j * z) + _trapezoid(kern.line() * np.exp(1j * z[..., None] * t),
                                        2.0 * kern.step)


def b1_estimate(kern: KernelGrid, rtol: float = 1e-8) -> complex:
    """b_1 = s'(0)/s(0) from the moment ratio of (K_x + K_t)(-1, t).

    b_1 = i int (t - 1) A dt / int A dt with A = (K_x + K_t)(-1, t); the
    numerator and denominator are real, so b_1 is purely imaginary.
    """
    _, A = kern.line_partials()
    t = kern.t_line
    dt = 2.0 * kern.step
    m0 = float(_trapezoid(A, dt))
    m1 = float(_trapezoid((t - 1.0) * A, dt))
    if abs(m0) <= rtol * (1.0 + float(_trapezoid(np.abs(A), dt))):
        raise UnsupportedOrderError("s(0) vanishes at grid tolerance; zero of s at the origin")
    return 1j * m1 / m0


# ----------------------------------------------------------------- envelopes
def kernel_bound(q: Potential) -> float:
    """(1/2) ||q||_1 e^{2 ||q||_1}."""
    l1 = norm_l1(q)
    return 0.5 * l1 * math.exp(2.0 * l1)


def kernel_derivative_bound(q: Potential) -> float:
    """(1/2) ||q||_1^2 e^{2 ||q||_1}, the envelope of |K_t + q((x+t)/2)/4|."""
    l1 = norm_l1(q)
    return 0.5 * l1 * l1 * math.exp(2.0 * l1)


@dataclass
class KernelBoundReport:
    sup_kernel: float
    kernel_bound: float
    sup_derivative_gap: float
    derivative_bound: float

    @property
    def ok(self) -> bool:
        return (self.sup_kernel <= self.kernel_bound
                and self.sup_derivative_gap <= self.derivative_bound)


def check_kernel_bounds(kern: KernelGrid, q: Potential) -> KernelBoundReport:
    """Compare |K| and |K_t + q((x+t)/2)/4| with their envelopes on all nodes."""
    n = kern.n
    mask = triangle_mask(n)
    _, Kt = kern.partials()
    alpha = -1.0 + kern.step * np.arange(n + 1)
    gap = np.abs(Kt + 0.25 * q(alpha)[:, None])
    # interior nodes only: the one-sided stencils at the edges are excluded
    inner = mask.copy()
    inner[:, 0] = False
    inner[np.arange(n + 1), np.arange(n + 1)] = False
    inner[-1, :] = False
    return KernelBoundReport(float(np.max(np.abs(kern.values[mask]))), kernel_bound(q),
                             float(np.max(gap[inner])) if np.any(inner) else 0.0,
                             kernel_derivative_bound(q))

