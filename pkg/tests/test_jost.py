import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import well_s, well_w
from resolab.errors import ConfigError, OverflowGuardError
from resolab.jost import compute_s, compute_w, forward_pair, jost_solve, scattering_matrix, w_and_s
from resolab.potential import Potential

WELL = Potential.box(-1, 1, -4.0)


def test_free_solutions():
    q = Potential.zero()
    e = jost_solve(q, 1.0, "plus", [0.0])[0]
    assert abs(e.value - 1) < 1e-14 and abs(e.derivative - 1j) < 1e-14
    z = 2 + 1j
    e = jost_solve(q, z, "minus", [-0.5])[0]
    assert abs(e.value - cmath.exp(-1j * z * -0.5)) < 1e-12


def test_well_jost_plus_at_left_edge():
    z = 1.0
    k = cmath.sqrt(z * z + 4)
    # f^+ = e^{iz} (cos k(x-1) + (iz/k) sin k(x-1)) inside the well
    ref = cmath.exp(1j * z) * (cmath.cos(-2 * k) + 1j * z / k * cmath.sin(-2 * k))
    got = jost_solve(WELL, z, "plus", [-1.0])[0].value
    assert abs(got - ref) < 1e-8


def test_w_examples():
    q = Potential.zero()
    assert abs(compute_w(q, 3.0) - 6j) < 1e-10
    assert abs(compute_w(q, 1j) + 2) < 1e-10
    assert abs(compute_w(WELL, 0.7) - well_w(0.7, -4.0)) < 1e-8


def test_s_examples():
    assert abs(compute_s(Potential.zero(), 2.0 + 1j)) < 1e-10
    assert abs(compute_s(WELL, 0.5) - well_s(0.5, -4.0)) < 1e-8


def test_rk_matches_exact():
    z = np.array([0.3, 2.0 + 0.5j, -1.5 - 0.2j])
    a = w_and_s(WELL, z)
    b = w_and_s(WELL, z, method="rk")
    assert np.allclose(a[0], b[0], rtol=1e-8) and np.allclose(a[1], b[1], rtol=1e-8)


def test_x_eval_independent():
    q = Potential.sum_of_boxes([(-0.8, -0.2, 1.5), (0.1, 0.6, -2.0)])
    z = np.array([0.7, 3.0 - 2.0j])
    a, b = w_and_s(q, z, 0.0), w_and_s(q, z, 0.4)
    assert np.allclose(a[0], b[0], rtol=1e-9) and np.allclose(a[1], b[1], rtol=1e-9)


def test_scattering_matrix():
    S = scattering_matrix(Potential.zero(), 1.0)
    assert np.allclose(S, np.eye(2), atol=1e-12)
    S = scattering_matrix(WELL, 1.0)
    assert abs(abs(S[0, 0]) ** 2 + abs(S[0, 1]) ** 2 - 1) < 1e-8
    q = Potential.box(-0.3, 0.8, 2.0)
    w, s = w_and_s(q, np.array([2.0]))
    assert abs(abs(s[0]) ** 2 - (abs(w[0]) ** 2 - 16)) < 1e-8 * abs(w[0]) ** 2
    with pytest.raises(ConfigError):
        scattering_matrix(WELL, 0.0)


def test_guards():
    with pytest.raises(OverflowGuardError):
        compute_w(WELL, 100j)
    with pytest.raises(ConfigError):
        w_and_s(WELL, 1.0, x_eval=2.0)
    with pytest.raises(ConfigError):
        jost_solve(WELL, 1.0, "left", [0.0])


def test_forward_pair():
    pair = forward_pair(WELL)
    z = np.array([0.5, 1.5])
    assert np.allclose(pair.s_plus(z), w_and_s(WELL, -z)[1])


@settings(max_examples=25, deadline=None)
@given(st.floats(-4, 4), st.floats(-3, 3), st.floats(-3, 3))
def test_unitarity_property(depth, x, y):
    q = Potential.box(-1, 1, depth)
    z = complex(x, y)
    w, s = w_and_s(q, np.array([z, -z]))
    scale = abs(w[0] * w[1]) + 4 * abs(z) ** 2 + 1
    assert abs(w[0] * w[1] - 4 * z * z - s[0] * s[1]) < 1e-8 * scale
