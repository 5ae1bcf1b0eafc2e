import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiscat.lattice import ExponentLattice, brute_force_exponents, check_delta, generate_lattice
from semiscat.potential import ConfigError


@pytest.mark.parametrize(
    "rhos,delta,nu_max",
    [((2.0, 3.0), 2.0, 8.0), ((2.0,), 2.0, 10.0), ((1.5, 2.5), 3.0, 9.0), ((2.0, 2.5, 4.0), 1.5, 7.0)],
)
def test_matches_brute_force(rhos, delta, nu_max):
    lat = generate_lattice(rhos, delta, nu_max)
    assert np.array_equal(np.round(lat.nus, 9), brute_force_exponents(rhos, delta, nu_max))


@given(st.floats(1.3, 4.0), st.floats(0.1, 2.0), st.floats(1.0, 3.0))
@settings(max_examples=40, deadline=None)
def test_lattice_properties(rho1, gap, extra):
    delta = 1.0 / (rho1 - 1.0) + gap
    lat = generate_lattice((rho1, rho1 + extra), delta, 3 * (delta * (rho1 - 1) - 1) + 2)
    nus = np.array(lat.nus)
    assert np.all(np.diff(nus) > 0)
    assert nus[0] == pytest.approx(delta * (rho1 - 1) - 1)
    for e in lat.entries:
        assert all(abs(pv.value(lat.mus, delta) - e.nu) < 1e-9 for pv in e.provenances)


def test_provenance_and_collisions():
    lat = generate_lattice((2.0, 3.0), 2.0, 5.0)
    assert lat.nus == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert lat.layer_index(2) == 3
    col = lat.collisions(2)
    assert {(pv.m, pv.p) for pv in col} == {((3, 0), 0)}
    four = {(pv.m, pv.p) for pv in lat.entries[3].provenances}
    assert four == {((4, 0), 0), ((1, 1), 0), ((1, 0), 1)}
    assert lat.pairs(3) == [(0, 3), (1, 2), (2, 1), (3, 0)]


def test_default_order_and_truncation():
    lat = generate_lattice((2.0, 3.0), 2.0, 10.0)
    assert lat.default_order() == 7
    t = lat.truncated(4)
    assert isinstance(t, ExponentLattice) and t.nus == [1.0, 2.0, 3.0, 4.0]


@pytest.mark.parametrize("rhos,delta", [((2.0,), 1.0), ((2.0,), 0.5), ((1.0,), 5.0), ((), 2.0)])
def test_invalid_delta(rhos, delta):
    with pytest.raises(ConfigError):
        check_delta(rhos, delta)


def test_nu_max_below_first():
    with pytest.raises(ValueError):
        generate_lattice((2.0,), 2.0, 0.5)
    with pytest.raises(ValueError):
        generate_lattice((2.0, 5.0), 2.0, 3.0).layer_index(2)
