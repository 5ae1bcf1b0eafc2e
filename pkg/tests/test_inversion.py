import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiscat.forward import default_h_grid, ray_specs, synthesize_dataset
from semiscat.inversion import (
    fit_powers,
    footprint_operator,
    lattice_for,
    lcurve,
    profile_error,
    reconstruct,
    recover_layer,
    schwartz_diagnostic,
    tikhonov,
)
from semiscat.potential import AngularProfile, PotentialExpansion
from semiscat.xray import default_rays

LAT = lattice_for((2.0, 3.0), 2.0, 7)


@pytest.fixture(scope="module")
def small_dataset(two_layer, experiment):
    """16 rays, enough for degree L = 1 profiles."""
    return synthesize_dataset(experiment, two_layer, LAT, ray_specs(default_rays(8, 2)), default_h_grid(), 7)


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=7, max_size=7))
@settings(max_examples=25, deadline=None)
def test_joint_fit_recovers_exact_series(c):
    c = np.array(c)
    h = default_h_grid()
    v = (h[:, None] ** np.array(LAT.nus[:7])) @ c
    fit = fit_powers((h, v), LAT, 7)
    scale = 1 + np.abs(c).max()
    assert np.allclose(fit.coeffs[:3], c[:3], atol=1e-9 * scale)
    assert fit.residual <= 1e-12 * scale * np.sqrt(len(h))


@pytest.mark.parametrize("method", ["joint", "joint-ridge", "peeling"])
def test_fit_methods_agree_on_leading_terms(method):
    rng = np.random.default_rng(0)
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    h = default_h_grid()
    v = (h[:, None] ** np.array(LAT.nus[:5])) @ c
    fit = fit_powers((h, v), LAT, 5, method=method)
    assert fit.method == method
    assert np.allclose(fit.coeffs[:2], c[:2], rtol=1e-6)


@pytest.mark.parametrize(
    "h,K,match",
    [
        (np.geomspace(1e-3, 1e-1, 5), 3, "insufficient"),
        (np.array([0.1, 0.1, 0.2, 0.3, 0.4, 0.5]), 2, "distinct"),
    ],
)
def test_fit_validation(h, K, match):
    with pytest.raises(ValueError, match=match):
        fit_powers((h, np.ones(len(h))), LAT, K)


def test_peeling_needs_two_decades():
    h = np.geomspace(1e-2, 5e-1, 12)
    with pytest.raises(ValueError, match="decades"):
        fit_powers((h, h), LAT, 2, method="peeling")
    with pytest.raises(ValueError):
        fit_powers((h, h), LAT, 2, method="bayes")


def test_tikhonov_matches_normal_equations(rng):
    M = rng.standard_normal((30, 6))
    b = rng.standard_normal(30)
    x, ridge, _ = tikhonov(M, b, 0.3)
    ref = np.linalg.solve(M.T @ M + 0.3 * np.eye(6), M.T @ b)
    assert ridge == 0.3 and np.allclose(x, ref)
    curve = lcurve(M, b, [1e-6, 1.0, 100.0])
    assert curve[0]["residual"] <= curve[-1]["residual"] and curve[0]["norm"] >= curve[-1]["norm"]


def test_profile_error():
    a = AngularProfile.isotropic(1.0)
    b = AngularProfile.harmonics(a.harmonic_coeffs(2) * 1.01)
    assert profile_error(a, a) == 0.0
    assert profile_error(b, a) == pytest.approx(0.01)


def test_reconstruct_small(small_dataset, two_layer, experiment):
    res = reconstruct(small_dataset, experiment, L=1, ground_truth=two_layer)
    assert max(res.errors) < 0.02
    assert res.layers[1].correction > 0 and res.layers[0].correction == 0
    assert {(pv.m, pv.p) for pv in res.layers[1].collisions} == {((3, 0), 0)}
    again = PotentialExpansion.from_dict(res.to_dict()["potential"])
    assert again.rhos == [2.0, 3.0]


def test_footprint_removes_midpoint_bias(small_dataset, two_layer, experiment):
    res = reconstruct(small_dataset, experiment, L=1, ground_truth=two_layer, footprint=True)
    assert max(res.errors) < 1e-6


def test_footprint_rows_average_point_rows(small_dataset):
    pairs = [(s.source, s.receiver) for s in small_dataset.series[:3]]
    F = footprint_operator(2.0, pairs, 1)
    assert F.shape == (3, 4) and np.all(np.isfinite(F))


def test_under_determined_layer_raises(small_dataset, experiment):
    fits = np.array([fit_powers((s.h, s.values), LAT, 7).coeffs for s in small_dataset.series])
    pairs = [(s.source, s.receiver) for s in small_dataset.series]
    with pytest.raises(ValueError, match="under-determined"):
        recover_layer(1, fits, PotentialExpansion(()), LAT, experiment, pairs, L=4)
    with pytest.raises(ValueError, match="must be recovered"):
        recover_layer(2, fits, PotentialExpansion(()), LAT, experiment, pairs, L=1)


def test_decay_diagnostic_on_synthetic_series():
    h = default_h_grid()
    base = 1j * h + h**2
    rep = schwartz_diagnostic([(h, base)], [(h, base + 0.3 * h**3)], LAT, 7)
    assert rep.slope == pytest.approx(3.0, abs=1e-6) and rep.verdict == 3.0
    assert rep.passed[:3] == [True, True, True] and not rep.passed[3]
    same = schwartz_diagnostic([(h, base)], [(h, base.copy())], LAT, 7)
    assert same.at_floor and same.slope is None and same.verdict == LAT.nus[6]
    with pytest.raises(ValueError):
        schwartz_diagnostic([(h, base)], [(h[::-1], base)], LAT, 7)
    with pytest.raises(ValueError):
        schwartz_diagnostic([], [], LAT, 7)
