import numpy as np
import pytest

from resolab.errors import PreconditionError
from resolab.potential import Potential
from resolab.reconstruct import (ReconParams, invert_fourier, perturb_zero_set, reconstruct_antiderivative,
                                 solve_B, zero_potential_pipeline)
from resolab.zeros import ZeroSet, locate_zeros
from resolab.jost import w_and_s


def zeros_of(q, R, k):
    return locate_zeros(lambda z: w_and_s(q, z)[k], R, tag="ws"[k])


def test_zero_fdiff_gives_zero_line():
    t = np.linspace(-1, 3, 21)
    kl = invert_fourier(lambda z: np.zeros_like(np.asarray(z), dtype=complex), 20.0, 0.02, None,
                        200.0, t)
    assert np.all(kl.values == 0)


def test_solve_B_zero_line():
    q = Potential.box(-1, 1, -1.0)
    n = int(round(2 / 0.02))
    sol = solve_B(np.zeros(n + 1), q, q, 0.02)
    assert np.all(sol.values == 0)


def test_identical_inputs_give_zero():
    q = Potential.box(-1, 1, -4.0)
    R = 20.0
    zw, zs = zeros_of(q, R, 0), zeros_of(q, R, 1)
    res = reconstruct_antiderivative(zw, zs, q, ReconParams(R))
    assert np.max(np.abs(res.antiderivative)) < 1e-8
    assert res.antiderivative[-1] == 0.0


def test_perturbation_stays_in_disk_and_mirrors():
    zs = ZeroSet([(1 + 1j, 1), (-1 + 1j, 1), (2j, 1)], 10.0, "w")
    out = perturb_zero_set(zs, 1e-3, np.random.default_rng(3))
    a = {round(z.real, 12): z for z, _ in out.zeros}
    assert abs(a[round(out.zeros[0][0].real, 12)].real) > 0
    locs = out.locations()
    assert np.allclose(np.sort_complex(locs[locs.real > 0]), np.sort_complex(-np.conj(locs[locs.real < 0])))
    onaxis = [z for z in locs if abs(z.real) < 1e-14]
    assert len(onaxis) == 1 and abs(onaxis[0] - 2j) <= 1e-3
    assert np.max(np.abs(np.sort_complex(locs) - np.sort_complex(zs.locations()))) <= 1e-3


def test_zero_potential_mode():
    R = 20.0
    res = zero_potential_pipeline(zeros_of(Potential.zero(), R, 0), ReconParams(R))
    assert np.max(np.abs(res.antiderivative)) < 1e-8
    # a zero slightly off the origin
    res = zero_potential_pipeline(ZeroSet([(5e-10j, 1)], R, "w"), ReconParams(R, epsilon=1e-9))
    assert np.max(np.abs(res.antiderivative)) < 1e-8


def test_zero_potential_precondition():
    zw = ZeroSet([(1e-9j, 1), (3 - 1j, 1), (-3 - 1j, 1)], 20.0, "w")
    with pytest.raises(PreconditionError):
        zero_potential_pipeline(zw, ReconParams(20.0))


def test_params_defaults():
    p = ReconParams(40.0, epsilon=1e-5)
    assert p.eta == pytest.approx(1e-5 ** (6 / 7))
    assert p.A == max(20 * 40 ** (1 / 9), 200)
    assert ReconParams(40.0).eta == 0.02
