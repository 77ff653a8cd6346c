"""Inverse pipeline: zeros -> models -> f^+(-1, .) difference -> kernel line -> B -> Q.

Q(x) is the antiderivative difference int_x^1 (q - q_ref). The transformation
kernel B used here maps the reference potential q_ref onto the unknown q, so
its Goursat coefficient is q_ref(alpha + beta) - q(alpha - beta) and
Q(x) = 2 B(x, x). Its values on the line x = -1 follow from the kernel-line
difference dK(-1, t) = K(-1, t) - K_ref(-1, t) through the reference operator
L_ref that maps q_ref back to zero:

    B(-1, t) = dK(-1, t) + int_{-1}^{min(t, 2 - t)} dK(-1, s) L_ref(s, t) ds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import (ConfigError, ModelInconsistencyError, NearOriginError, NumericError,
                     PreconditionError, RefinementError, ResolabError, StageError)
from .factor import HadamardModel, build_s_model, build_w_model, model_ratio
from .jost import w_and_s
from .kernels import (b1_estimate, build_kernel, coefficient, goursat_fixed_point, grid_size,
                      neumann_step, triangle_mask)
from .potential import ClassParams, Potential, norm_l1
from .zeros import ZeroSet, assign, locate_zeros

Z_FLOOR = 1e-8
CLAMP_FLOOR = 1e-9


# ------------------------------------------------------------------ params
@dataclass
class ReconParams:
    """Pipeline parameters.

    Attributes:
        R: Zero-data radius.
        epsilon: Zero-data accuracy (0 for exact data).
        eta: Exclusion distance around real zeros of s (default from epsilon).
        A: Fourier cutoff (default max(20 R^{1/9}, 200)).
        p: Lebesgue exponent in (1, 2].
        step: Goursat grid step.
        valid_fraction: The models are used for |z| <= valid_fraction * R.
        refinements: Coefficient refinements of the B equation.
        legendre_degree: Degree of the smoothing fit used in refinements.
        im_bound: Imaginary-part limit for reference zero searches.
    """

    R: float
    epsilon: float = 0.0
    eta: float | None = None
    A: float | None = None
    p: float = 2.0
    step: float = 0.005
    valid_fraction: float = 0.25
    refinements: int = 2
    legendre_degree: int = 10
    im_bound: float | None = 40.0

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigError("R must be positive")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")
        if not 1.0 < self.p <= 2.0:
            raise ConfigError("p must lie in (1, 2]")
        if self.eta is None:
            self.eta = self.epsilon ** (6.0 / 7.0) if self.epsilon > 0 else 0.02
        if self.A is None:
            self.A = max(20.0 * self.R ** (1.0 / 9.0), 200.0)
        if self.A < self.R ** (1.0 / 9.0):
            raise ConfigError("A must be at least R^(1/9)")
        grid_size(self.step)

    @property
    def mu(self) -> float:
        return (self.p - 1.0) / (9.0 * self.p)

    @property
    def lam(self) -> float:
        e = self.epsilon
        return e ** (6 / 7) * self.R ** (11 / 9) + e ** (1 / 7) * self.R ** (1 / 9)

    def predicted_bound(self, C: float = 1.0, zero_potential: bool = False) -> float:
        """Shape of the theoretical bound with constant C (default 1)."""
        p, R = self.p, self.R
        if zero_potential:
            return C * (R ** (-(p - 1) ** 2 / (12 * p * (2 * p - 1)))
                        + math.sqrt(self.epsilon) * R ** (1 / 12) * math.log(R))
        return (C * math.log(R) ** (2 * (p - 1) / (2 * p - 1))
                * R ** (-(p - 1) ** 2 / (9 * p * (2 * p - 1)))
                + C * (p - 1) ** (-1 / p) * self.lam)


@dataclass
class ReconstructionResult:
    """Output of the inverse pipeline.

    Attributes:
        t: Kernel-line abscissae on [-1, 3].
        kernel_line: K-line difference dK(-1, t).
        x: Diagonal abscissae on [-1, 1].
        antiderivative: Q(x) = 2 B(x, x).
        params: Pipeline parameters.
        diagnostics: Region integrals, series data, bounds and timings.
    """

    t: np.ndarray
    kernel_line: np.ndarray
    x: np.ndarray
    antiderivative: np.ndarray
    params: ReconParams
    diagnostics: dict = field(default_factory=dict)

    def error_against(self, truth: np.ndarray) -> float:
        return float(np.max(np.abs(self.antiderivative - truth)))


# ----------------------------------------------------------- f difference
def f_difference(model_w_a: HadamardModel, model_s_a: HadamardModel | None,
                 model_w_b: HadamardModel | None, model_s_b: HadamardModel | None, z,
                 anchor: tuple[Callable, Callable] | None = None,
                 z_floor: float = Z_FLOOR) -> np.ndarray:
    """f^+(-1, z) - f_b^+(-1, z) = e^{-iz}(w - w_b)/(2iz) + e^{iz}(s - s_b)/(2iz).

    A missing b model stands for the zero potential (w_b = 2iz, s_b = 0); a
    missing s_a model drops the s term. With ``anchor = (w_ref, s_ref)`` the
    differences are formed as w_ref (w/w_b - 1) and s_ref (s/s_b - 1), using
    exact reference values together with model ratios.
    """
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) < z_floor):
        raise NearOriginError(f"|z| below {z_floor}")
    zc = z.astype(complex)
    if anchor is not None:
        if model_w_b is None or model_s_b is None or model_s_a is None:
            raise ConfigError("anchored difference needs all four models")
        w_ref, s_ref = anchor
        dw = w_ref(zc) * (model_ratio(model_w_a, model_w_b, zc) - 1.0)
        ds = s_ref(zc) * (model_ratio(model_s_a, model_s_b, zc) - 1.0)
    else:
        dw = model_w_a(zc) - (2j * zc if model_w_b is None else model_w_b(zc))
        if model_s_a is None:
            ds = np.zeros_like(zc)
        else:
            ds = model_s_a(zc) - (0.0 if model_s_b is None else model_s_b(zc))
    return (np.exp(-1j * zc) * dw + np.exp(1j * zc) * ds) / (2j * zc)


# ------------------------------------------------------------ endpoints
def endpoint_basis(z) -> np.ndarray:
    """Columns e^{-iz}/(1 - iz), e^{-iz}/(1 - iz)^2, e^{3iz}/(1 + iz)^2."""
    z = np.asarray(z, dtype=complex)
    return np.stack([np.exp(-1j * z) / (1 - 1j * z), np.exp(-1j * z) / (1 - 1j * z) ** 2,
                     np.exp(3j * z) / (1 + 1j * z) ** 2], -1)


def endpoint_line(c: np.ndarray, t) -> np.ndarray:
    """Exact inverse transform of the endpoint columns on the kernel line."""
    t = np.asarray(t, dtype=float)
    u = t + 1.0
    v = 3.0 - t
    out = c[0] * np.exp(-u) + c[1] * u * np.exp(-u) + c[2] * np.where(v >= 0, v * np.exp(-np.abs(v)), 0.0)
    return np.real(out)


def gl_panels(a: float, b: float, width: float = 0.5, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    n = max(1, int(math.ceil((b - a) / width - 1e-12)))
    x, w = npleg.leggauss(order)
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def fit_endpoints(f_diff: Callable, z_valid: float, corner: float | None) -> np.ndarray:
    """Endpoint coefficients by least squares on z_valid/2 <= |z| <= z_valid.

    ``corner`` fixes the first coefficient (the kernel-line value at t = -1).
    """
    z1, _ = gl_panels(0.5 * z_valid, z_valid, 0.25, 4)
    z = np.concatenate([-z1[::-1], z1])
    M = endpoint_basis(z)
    b = f_diff(z)
    if corner is not None:
        b = b - corner * M[:, 0]
        M = M[:, 1:]
    A = np.concatenate([M.real, M.imag])
    rhs = np.concatenate([b.real, b.imag])
    c, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return np.concatenate([[corner], c]) if corner is not None else c


# ------------------------------------------------------- Fourier inversion
@dataclass
class KernelLine:
    t: np.ndarray
    values: np.ndarray
    regions: dict
    endpoint: np.ndarray
    refinement_gap: float


def _regions(R: float, eta: float, s_real: np.ndarray, A: float) -> list[tuple[str, float, float]]:
    """Intervals labelled X1..X4 covering [-A, A]."""
    r_lo, r_hi = R ** (-1.0 / 9.0), R ** (1.0 / 9.0)
    out = [("X1", -r_lo, r_lo)]
    # near-zero sets on r_lo <= |z| <= r_hi
    bands = []
    for s in s_real:
        bands.append((s - eta, s + eta))
    for sign in (1.0, -1.0):
        lo, hi = r_lo, r_hi
        cuts = sorted({lo, hi, *[min(max(sign * a, lo), hi) for ab in bands for a in ab]})
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 0:
                continue
            m = 0.5 * (a + b)
            near = any(abs(sign * m - s) < eta for s in s_real)
            lab = "X3" if near else "X2"
            out.append((lab, -b, -a) if sign < 0 else (lab, a, b))
    if A > r_hi:
        out += [("X4", r_hi, A), ("X4", -A, -r_hi)]
    return out


def _integrate(intervals, g: Callable, t: np.ndarray, width: float, order: int) -> dict:
    res = {}
    for lab, a, b in intervals:
        z, w = gl_panels(a, b, width, order)
        if z.size == 0:
            continue
        vals = g(z)
        contrib = (np.exp(-1j * np.outer(t, z)) @ (w * vals)) / (2 * np.pi)
        res[lab] = res.get(lab, 0.0) + contrib
    return res


def invert_fourier(f_diff: Callable, R: float, eta: float, s_zeros: ZeroSet | None, A: float,
                   t_grid, endpoint: np.ndarray | None = None, z_valid: float | None = None,
                   q_tol: float = 1e-6, width: float = 0.5, order: int = 16) -> KernelLine:
    """(1/2 pi) int_{-A}^{A} f_diff(z) e^{-izt} dz on the regions X1..X4.

    With endpoint coefficients c the integrand is f_diff - c . endpoint_basis
    on |z| <= z_valid and zero beyond, and the exact inverse of the endpoint
    columns (over the whole line) is added back.

    Raises:
        RefinementError: Doubling the panel density changes a region by more
            than q_tol.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < -1 - 1e-12) or np.any(t > 3 + 1e-12):
        raise ConfigError("t_grid must lie in [-1, 3]")
    if A < R ** (1.0 / 9.0):
        raise ConfigError("A must be at least R^(1/9)")
    zv = A if z_valid is None else min(z_valid, A)
    c = np.zeros(3) if endpoint is None else np.asarray(endpoint)

    def g(z):
        out = np.zeros(z.shape, dtype=complex)
        m = np.abs(z) <= zv
        if np.any(m):
            out[m] = f_diff(z[m]) - endpoint_basis(z[m]) @ c
        return out

    s_real = np.array([s.real for s in (s_zeros.locations() if s_zeros is not None else [])
                       if abs(s.imag) < 1e-8])
    intervals = []
    for lab, a, b in _regions(R, eta, s_real, A):
        # split at the validity edge so panels do not straddle the cut
        if a < -zv < b:
            intervals += [(lab, a, -zv), (lab, -zv, b)]
        elif a < zv < b:
            intervals += [(lab, a, zv), (lab, zv, b)]
        else:
            intervals.append((lab, a, b))
    coarse = _integrate(intervals, g, t, width, order)
    fine = _integrate(intervals, g, t, 0.5 * width, order)
    gaps = {k: float(np.max(np.abs(fine[k] - coarse[k]))) for k in fine}
    worst = max(gaps, key=gaps.get) if gaps else "X1"
    if gaps and gaps[worst] > q_tol:
        raise RefinementError(f"quadrature refinement gap {gaps[worst]:.2e}", worst)
    ep = endpoint_line(c, t)
    total = np.real(sum(fine.values())) + ep
    regions = {k: np.real(v) for k, v in fine.items()}
    return KernelLine(t, total, regions, ep, max(gaps.values()) if gaps else 0.0)


# --------------------------------------------------------------- B solver
def line_convert(dk_line: np.ndarray, L_ref: np.ndarray, step: float) -> np.ndarray:
    """B(-1, t) from dK(-1, t) and the reference operator L_ref (triangle grid)."""
    n = L_ref.shape[0] - 1
    out = np.array(dk_line, dtype=float)
    for m in range(1, n):
        top = min(m, n - m)
        b = np.arange(top + 1)
        vals = dk_line[b] * L_ref[b + m, m - b]
        out[m] += 2 * step * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    return out


@dataclass
class BSolution:
    """Neumann-series solution of the B equation.

    Attributes:
        values: B on the triangle grid.
        iterations: Number of series terms added after B_0.
        increments: Sup norm of each added term.
        certificate: Tail bound after the last term.
        terminated_by: "certificate" or "cap".
        bitineq_ok: Every term obeyed the factorial envelope.
        bitineq_ratio: Largest ratio of a term to its envelope.
    """

    values: np.ndarray
    iterations: int
    increments: list
    certificate: float
    terminated_by: str
    bitineq_ok: bool
    bitineq_ratio: float

    @property
    def diagonal(self) -> np.ndarray:
        return self.values[:, 0].copy()


def coefficient_mass(c: np.ndarray, step: float) -> float:
    """Gamma = sup over alpha of the trapezoid integral of |c(alpha, .)| over beta."""
    g = step * (np.sum(np.abs(c), axis=1) - 0.5 * (np.abs(c[:, 0]) + np.abs(c[np.arange(c.shape[0]), np.arange(c.shape[0])])))
    return float(np.max(g))


def tail_certificate(term_sup: float, gamma: float) -> float:
    """Bound on the remaining series from |B_{n0}| <= m:
    |B_{n0 + k}| <= m (Gamma (1 - alpha))^k / k! <= m (2 Gamma)^k / k!."""
    return term_sup * math.expm1(2.0 * gamma)


def solve_B(kernel_line: np.ndarray, q: Potential | None, q_tilde: Potential | None,
            step: float, tol: float = 1e-10, max_iter: int = 60) -> BSolution:
    """Neumann series for B on the triangle from its values on x = -1.

    Args:
        kernel_line: B(-1, t) at t = -1 + 2 i step, i = 0..n.
        q: Target potential (the unknown, or its current estimate).
        q_tilde: Reference potential.
        step: Grid step.
        tol: Stop once the tail certificate drops below tol.
        max_iter: Iteration cap.

    Each term B_n is compared with the envelope
    2 C log(4) (2Q)^n / (n - 1)! (1 - alpha)^(n - 1), where C is the measured
    sup of |B(-1, t)| / min(1, 1/(t + 1)) and Q the larger L1 norm.
    """
    n = grid_size(step)
    line = np.asarray(kernel_line, dtype=float)
    if line.shape != (n + 1,):
        raise ConfigError(f"kernel line needs {n + 1} values")
    line = line.copy()
    line[-1] = 0.0  # B vanishes for x + t >= 2
    mask = triangle_mask(n)
    c = coefficient(q_tilde, q, step)
    alpha = -1.0 + step * np.arange(n + 1)
    term = np.where(mask, line[:, None], 0.0)
    u = term.copy()
    Q = max(norm_l1(q) if q is not None else 0.0, norm_l1(q_tilde) if q_tilde is not None else 0.0)
    tline = -1.0 + 2.0 * step * np.arange(n + 1)
    Cl = float(np.max(np.abs(line) / np.minimum(1.0, 1.0 / (tline + 1.0 + 1e-300))))
    worst = 0.0
    incs = []
    gamma = coefficient_mass(c, step)
    cert = math.inf
    how = "cap"
    it = 0
    for it in range(1, max_iter + 1):
        term = neumann_step(c, term, step, mask)
        u = u + term
        inc = float(np.max(np.abs(term)))
        incs.append(inc)
        env = 2 * Cl * math.log(4.0) * (2 * Q) ** it / math.factorial(it - 1) * \
            np.broadcast_to(((1.0 - alpha) ** (it - 1))[:, None], mask.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(mask & (env > 0), np.abs(term) / np.where(env > 0, env, 1.0), 0.0)
        worst = max(worst, float(np.max(r)))
        cert = tail_certificate(inc, gamma)
        if cert < tol:
            how = "certificate"
            break
    return BSolution(u, it, incs, cert, how, worst <= 1.0 + 1e-9, worst)


def _smooth_derivative(x: np.ndarray, Qv: np.ndarray, deg: int) -> Callable:
    cf = npleg.legfit(x, Qv, deg)
    d = npleg.legder(cf)
    return lambda y: npleg.legval(y, d)


def solve_antiderivative(b_line: np.ndarray, q_tilde: Potential | None, step: float,
                         refinements: int = 2, degree: int = 10,
                         grid_nodes: int | None = None) -> tuple[np.ndarray, BSolution]:
    """Q(x) = 2 B(x, x), refining the unknown potential in the coefficient.

    The first solve uses q_tilde for the unknown potential; each refinement
    replaces it with q_tilde - Q' from a smooth Legendre fit of Q.
    """
    n = grid_size(step)
    x = -1.0 + step * np.arange(n + 1)
    base = q_tilde if q_tilde is not None else Potential.zero(grid_nodes or 2001)
    sol = solve_B(b_line, base, q_tilde, step)
    Qv = 2.0 * sol.diagonal
    for _ in range(refinements):
        dq = _smooth_derivative(x, Qv, degree)
        q_est = base.plus_samples(-dq(base.nodes), label="estimate")
        sol = solve_B(b_line, q_est, q_tilde, step)
        Qv = 2.0 * sol.diagonal
    Qv[-1] = 0.0
    return Qv, sol


# ------------------------------------------------------------- pipeline
def perturb_zero_set(zs: ZeroSet, epsilon: float, rng: np.random.Generator) -> ZeroSet:
    """Move zeros uniformly within D(epsilon), keeping the z -> -conj(z) symmetry.

    One member of each symmetric pair is perturbed and the other mirrored;
    zeros on the imaginary axis move along it.
    """
    if epsilon == 0:
        return zs
    out = []
    for z, m in zs.zeros:
        if z.real < -1e-9:
            continue
        if abs(z.real) <= 1e-9:
            out.append((complex(0.0, z.imag + epsilon * rng.uniform(-1.0, 1.0)), m))
        else:
            d = epsilon * math.sqrt(rng.uniform()) * np.exp(2j * math.pi * rng.uniform())
            out += [(z + d, m), (-np.conj(z + d), m)]
    return ZeroSet(out, zs.radius, zs.function_tag, zs.residual, zs.im_bound)


def matched_subset(data: ZeroSet, pool: ZeroSet) -> ZeroSet:
    """Members of ``pool`` assigned to the zeros of ``data`` (radius of data)."""
    a, b = data.locations(), pool.locations()
    if b.size < a.size:
        raise PreconditionError(f"reference has {b.size} zeros, data {a.size}")
    if a.size == 0:
        return ZeroSet([], data.radius, data.function_tag, pool.residual, pool.im_bound)
    r, c = assign(a, b)
    return ZeroSet([(complex(b[j]), 1) for j in c], data.radius, data.function_tag,
                   pool.residual, pool.im_bound)


def reference_zeros(q_ref: Potential, R: float, im_bound: float | None,
                    margin: float = 2.0) -> tuple[ZeroSet, ZeroSet]:
    f_w = lambda z: w_and_s(q_ref, z)[0]
    f_s = lambda z: w_and_s(q_ref, z)[1]
    Rr = R + margin
    return (locate_zeros(f_w, Rr, im_bound=im_bound, tag="w"),
            locate_zeros(f_s, Rr, im_bound=im_bound, tag="s"))


def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except ResolabError as exc:
        raise StageError(name, exc) from exc


def reconstruct_antiderivative(zeros_w_a: ZeroSet, zeros_s_a: ZeroSet, reference: Potential,
                               params: ReconParams, class_params: ClassParams | None = None,
                               reference_zero_sets: tuple[ZeroSet, ZeroSet] | None = None,
                               b1: complex | None = None) -> ReconstructionResult:
    """Reconstruct Q(x) = int_x^1 (q - q_ref) from the zeros of w and s of q.

    The reference zeros (searched in a slightly larger disk unless given) are
    matched to the data so that both sides hold the same number of factors.
    Both sides use the same arc fit, so model ratios are relative fits.
    """
    R = params.R
    if reference_zero_sets is None:
        reference_zero_sets = _stage("reference-zeros", reference_zeros, reference, R, params.im_bound)
    rw_pool, rs_pool = reference_zero_sets
    rw = _stage("match", matched_subset, zeros_w_a, rw_pool)
    rs = _stage("match", matched_subset, zeros_s_a, rs_pool)
    kern_ref = _stage("kernel", build_kernel, reference, params.step)
    if b1 is None:
        b1 = _stage("kernel", b1_estimate, kern_ref)
    mwa = _stage("w-model", build_w_model, zeros_w_a, class_params)
    mwb = _stage("w-model", build_w_model, rw, class_params)
    msa = _stage("s-model", build_s_model, zeros_s_a, mwa, b1=b1)
    msb = _stage("s-model", build_s_model, rs, mwb, b1=b1)
    anchor = (lambda z: w_and_s(reference, z)[0], lambda z: w_and_s(reference, z)[1])
    fd = lambda z: f_difference(mwa, msa, mwb, msb, z, anchor=anchor)
    corner = float(np.real(mwa.kernel_corner - mwb.kernel_corner))
    zv = params.valid_fraction * R
    c = _stage("endpoints", fit_endpoints, fd, zv, corner)
    n = grid_size(params.step)
    t = -1.0 + 2.0 * params.step * np.arange(n + 1)
    kl = _stage("fourier", invert_fourier, fd, R, params.eta, zeros_s_a, params.A, t,
                endpoint=c, z_valid=zv)
    L_ref, _ = _stage("kernel", goursat_fixed_point, reference, None, params.step)
    b_line = line_convert(kl.values, L_ref, params.step)
    Qv, sol = _stage("solve-B", solve_antiderivative, b_line, reference, params.step,
                     params.refinements, params.legendre_degree)
    x = -1.0 + params.step * np.arange(n + 1)
    diag = {"R": R, "epsilon": params.epsilon, "eta": params.eta, "A": params.A, "p": params.p,
            "lambda": params.lam, "mu": params.mu, "predicted_bound": params.predicted_bound(),
            "corner": corner, "endpoint_coefficients": [float(v) for v in c],
            "regions_sup": {k: float(np.max(np.abs(v))) for k, v in kl.regions.items()},
            "refinement_gap": kl.refinement_gap, "b_iterations": sol.iterations,
            "b_certificate": sol.certificate, "b_terminated_by": sol.terminated_by,
            "bitineq_ok": sol.bitineq_ok, "bitineq_ratio": sol.bitineq_ratio, "b1": [complex(b1).real, complex(b1).imag],
            "n_w": zeros_w_a.count, "n_s": zeros_s_a.count}
    return ReconstructionResult(t, kl.values, x, Qv, params, diag)


def unitarity_modulus(w_model: HadamardModel, z: np.ndarray, floor: float = CLAMP_FLOOR) -> tuple[np.ndarray, int]:
    """|s(z)| from |s|^2 = |w|^2 - 4z^2 on the real line, with the clamp count."""
    z = np.asarray(z, dtype=float)
    F = np.abs(w_model(z.astype(complex))) ** 2 - 4.0 * z * z
    if np.any(F < -floor):
        k = int(np.argmin(F))
        raise ModelInconsistencyError(f"|w|^2 - 4z^2 = {F[k]:.3e} at z = {z[k]:.4g}")
    clamped = int(np.sum(F < 0))
    return np.sqrt(np.maximum(F, 0.0)), clamped


def zero_potential_pipeline(zeros_w: ZeroSet, params: ReconParams, strict: bool = True,
                            small_radius: float | None = None,
                            clamp_floor: float = CLAMP_FLOOR) -> ReconstructionResult:
    """Reconstruct int_x^1 q against the zero potential from the zeros of w alone.

    The s term of the f^+ difference is unknown; its modulus follows from
    |s|^2 = |w|^2 - 4z^2 and is reported as an envelope, while the w term
    is inverted.

    Args:
        zeros_w: Zeros of w.
        params: Pipeline parameters.
        strict: Require exactly one zero in D(small_radius) and none elsewhere
            in D(R). When false only the first condition is enforced.
        small_radius: Radius of the small disk (default epsilon, or 1 if
            epsilon is 0).
        clamp_floor: Negative values of |w|^2 - 4z^2 above -clamp_floor are
            set to zero; smaller ones raise ModelInconsistencyError.
    """
    R = params.R
    r0 = small_radius if small_radius is not None else (params.epsilon if params.epsilon > 0 else 1.0)
    near = [(z, m) for z, m in zeros_w.zeros if abs(z) < r0]
    if sum(m for _, m in near) != 1:
        raise PreconditionError(f"{sum(m for _, m in near)} zeros in D({r0}), expected one")
    if strict and zeros_w.count != 1:
        raise PreconditionError(f"{zeros_w.count - 1} further zeros in D({R})")
    at_origin = abs(near[0][0]) <= 1e-10
    mw = _stage("w-model", build_w_model, zeros_w, None, 1 if at_origin else None)
    n = grid_size(params.step)
    t = -1.0 + 2.0 * params.step * np.arange(n + 1)
    x = -1.0 + params.step * np.arange(n + 1)
    # a standalone model (no reference to cancel against) is only used on |z| <= R^{1/3}
    zv = R ** (1.0 / 3.0)
    zr, _ = gl_panels(0.0, zv, 0.5, 16)
    zr = np.concatenate([-zr[::-1], zr])
    s_abs, clamped = _stage("unitarity", unitarity_modulus, mw, zr, clamp_floor)
    envelope = float(np.sum(s_abs / (2 * np.abs(zr)) * np.gradient(zr)) / (2 * np.pi))
    fd = lambda z: f_difference(mw, None, None, None, z)
    corner = float(np.real(mw.kernel_corner))
    c = _stage("endpoints", fit_endpoints, fd, zv, corner)
    kl = _stage("fourier", invert_fourier, fd, R, params.eta, None, params.A, t,
                endpoint=c, z_valid=zv)
    kl_vals, regions, gap = kl.values, kl.regions, kl.refinement_gap
    Qv, sol = _stage("solve-B", solve_antiderivative, kl_vals, None, params.step,
                     params.refinements, params.legendre_degree)
    diag = {"R": R, "epsilon": params.epsilon, "eta": params.eta, "A": params.A, "p": params.p,
            "lambda": params.lam, "mu": params.mu,
            "predicted_bound": params.predicted_bound(zero_potential=True),
            "s_envelope": envelope, "clamped": clamped, "strict": strict,
            "endpoint_coefficients": [float(v) for v in c],
            "regions_sup": {k: float(np.max(np.abs(v))) for k, v in regions.items()},
            "refinement_gap": gap, "b_iterations": sol.iterations,
            "b_certificate": sol.certificate, "b_terminated_by": sol.terminated_by,
            "bitineq_ok": sol.bitineq_ok, "bitineq_ratio": sol.bitineq_ratio,
            "n_w": zeros_w.count}
    return ReconstructionResult(t, kl_vals, x, Qv, params, diag)


__all__ = ["ReconParams", "ReconstructionResult", "f_difference", "invert_fourier", "KernelLine",
           "solve_B", "BSolution", "line_convert", "solve_antiderivative",
           "reconstruct_antiderivative", "zero_potential_pipeline", "perturb_zero_set",
           "matched_subset", "reference_zeros", "endpoint_basis", "endpoint_line",
           "fit_endpoints", "gl_panels", "unitarity_modulus"]
