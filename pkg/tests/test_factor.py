import math

import numpy as np
import pytest

from resolab.errors import HalfBoundStateError, OutOfValidityError
from resolab.factor import (HadamardModel, build_s_model, build_w_model, difference_envelope,
                            model_ratio, tail_bound, tail_constant)
from resolab.jost import w_and_s
from resolab.potential import ClassParams, Potential
from resolab.zeros import ZeroSet, locate_zeros

WELL = Potential.box(-1, 1, -4.0)


@pytest.fixture(scope="module")
def well_models():
    R = 40.0
    zw = locate_zeros(lambda z: w_and_s(WELL, z)[0], R, tag="w")
    zs = locate_zeros(lambda z: w_and_s(WELL, z)[1], R, tag="s")
    mw = build_w_model(zw, ClassParams(8.0, 1e-3))
    return mw, build_s_model(zs, mw), zw, zs


def test_empty_set_forced_origin():
    model = build_w_model(ZeroSet([], 40.0, "w"), origin_order=1)
    z = np.array([0.5, -2.0, 1 + 1j])
    assert np.allclose(model(z), 2j * z, rtol=1e-8)


def test_origin_zero_raises():
    with pytest.raises(HalfBoundStateError):
        build_w_model(ZeroSet([(0j, 1)], 40.0, "w"))


def test_tail_bound():
    model = HadamardModel(ZeroSet([], 100.0, "w"), 0, 0, 0, 100.0, "w", params=ClassParams(8.0, 1e-3))
    assert tail_bound(model, 0.0) == 0.0
    kappa = 8 + 4 * 64 * math.exp(16)
    C1 = 18 * (4 + math.log((kappa + 2) / 3))
    x = C1 * 4 / 100
    assert abs(float(tail_bound(model, 2.0)) - x * math.exp(x)) < 1e-12 * x * math.exp(x)
    assert tail_constant(model) == C1
    with pytest.raises(OutOfValidityError):
        tail_bound(model, 51.0)


def test_models_match_forward(well_models):
    mw, ms, _, zs = well_models
    x = np.linspace(-3, 3, 61)
    x = x[np.abs(x) > 1e-3]
    w, s = w_and_s(WELL, x)
    env = np.array([difference_envelope(mw, mw, float(t), 0.05, epsilon=0.0) for t in x])
    assert np.all(np.abs(mw(x) - w) <= env)
    assert abs(ms(np.array([0.0]))[0] + mw(np.array([0.0]))[0]) < 1e-12
    real = zs.locations()[np.abs(zs.locations().imag) < 1e-8].real
    keep = np.array([np.min(np.abs(t - real)) >= 0.05 for t in x])
    env_s = np.array([difference_envelope(ms, ms, float(t), 0.05, epsilon=0.0) for t in x[keep]])
    assert np.all(np.abs(ms(x[keep]) - s[keep]) <= env_s)


def test_envelope_zero_eps(well_models):
    mw = well_models[0]
    R = mw.tail_radius
    assert difference_envelope(mw, mw, 1.0, 0.05, epsilon=0.0, constant=1.0) == pytest.approx(
        2 * R ** (-1 / 3))


def test_perturbed_models(well_models):
    mw, _, zw, _ = well_models
    rng = np.random.default_rng(0)
    moved = ZeroSet([(z + 1e-5 * rng.uniform(-0.7, 0.7) * (1 if z.real == 0 else 1 + 1j), m)
                     for z, m in zw.zeros], zw.radius, "w")
    mb = build_w_model(moved)
    x = np.linspace(-2, 2, 41)
    diff = np.max(np.abs(mw(x) - mb(x)))
    assert diff <= difference_envelope(mw, mb, 2.0, 0.05, epsilon=2e-5)
    assert np.allclose(model_ratio(mw, mb, x[x != 0]), mw(x[x != 0]) / mb(x[x != 0]))


def test_json_roundtrip(tmp_path, well_models):
    mw = well_models[0]
    mw.save(tmp_path / "m.json")
    back = HadamardModel.load(tmp_path / "m.json")
    z = np.array([0.3, 1.7, -2.2 + 0.4j])
    assert np.allclose(back(z), mw(z), rtol=1e-13)
