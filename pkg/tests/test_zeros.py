import numpy as np
import pytest

from oracles import well_w_zeros
from resolab.errors import ZeroMatchError
from resolab.jost import w_and_s
from resolab.potential import Potential
from resolab.zeros import (ZeroSet, count_zeros, locate_zeros, match_zero_sets, strip_depth,
                           verify_zero_free_regions)
from resolab.potential import ClassParams


def w_of(q):
    return lambda z: w_and_s(q, z)[0]


def test_count_examples():
    assert count_zeros(lambda z: z * z + 1, 0.0, 2.0) == 2
    assert count_zeros(w_of(Potential.zero()), 3j, 1.0) == 0
    q = Potential.box(-1, 1, -10.0)
    ref = well_w_zeros(-10.0, 5.0)
    assert count_zeros(w_of(q), 0.0, 5.0) == ref.size


def test_locate_polynomial():
    zs = locate_zeros(lambda z: z ** 3 - z, 2.0, tag="w")
    assert np.allclose(np.sort(zs.locations().real), [-1, 0, 1], atol=1e-10)


def test_locate_well_against_oracle():
    q = Potential.box(-1, 1, -4.0)
    zs = locate_zeros(w_of(q), 20.0)
    ref = well_w_zeros(-4.0, 20.0)
    assert zs.count == ref.size
    got = zs.locations()
    assert max(np.min(np.abs(got - r)) for r in ref) < 1e-8


def test_match_examples():
    a = ZeroSet([(1 + 1j, 1), (-1 + 1j, 1), (2 - 1j, 1)], 5.0, "w")
    assert match_zero_sets(a, a, 1.0).epsilon == 0.0
    b = ZeroSet([(z + 1e-4, m) for z, m in a.zeros], 5.0, "w")
    assert abs(match_zero_sets(a, b, 1.0).epsilon - 1e-4) < 1e-12
    with pytest.raises(ZeroMatchError):
        match_zero_sets(a, ZeroSet(a.zeros[:2], 5.0, "w"), 1.0)
    with pytest.raises(ZeroMatchError):
        match_zero_sets(a, b, 1e-6)


def test_match_two_wells():
    za = locate_zeros(w_of(Potential.box(-1, 1, -4.0)), 6.0)
    zb = locate_zeros(w_of(Potential.box(-1, 1, -4.01)), 6.0)
    pair = match_zero_sets(za, zb, 1.0)
    assert pair.unmatched == 0 and 0 < pair.epsilon < 0.1


def test_strip():
    q = Potential.box(-1, 1, -4.0)
    zs = locate_zeros(w_of(q), 10.0)
    rep = verify_zero_free_regions(zs, q, ClassParams(8.0, 1e-3))
    assert not rep.strip_violations
    assert strip_depth(0.0) == 0.125


def test_roundtrip_json(tmp_path):
    a = ZeroSet([(1 + 1j, 2), (-1 + 1j, 1)], 5.0, "s", residual=1e-12, im_bound=4.0)
    a.save(tmp_path / "z.json")
    b = ZeroSet.load(tmp_path / "z.json")
    assert b.zeros == a.zeros and b.im_bound == 4.0 and b.count == 3
