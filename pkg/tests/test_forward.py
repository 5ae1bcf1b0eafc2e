import csv

import numpy as np
import pytest
from scipy.integrate import quad

from semiscat.config import ExperimentConfig, GridConfig
from semiscat.forward import (
    CACHE_ENV,
    NyquistError,
    ScatteringDataset,
    TestFunctionSpec,
    build_test_function,
    bump,
    energy_cutoff,
    evaluate_series,
    factorized_spectrum,
    lemma2_margin,
    lemma2_threshold,
    overlap,
    pairing_coefficients,
    pairing_grid,
    ray_specs,
    synthesize_dataset,
    synthesize_F,
    verify_lemma2,
)
from semiscat.inversion import lattice_for
from semiscat.symbols import SymbolExpansion
from semiscat.xray import Ray, default_rays, xray_full_line

RAYS = default_rays(4, 2, 2.0)


@pytest.fixture(scope="module")
def expansion(two_layer):
    lat = lattice_for(two_layer.rhos, 2.0, 7)
    return SymbolExpansion(two_layer, lat, 1.0, 7)


@pytest.mark.parametrize("alpha", [(1, 0, 0), (0, 2, 0), (1, 1, 1)])
def test_bump_derivatives(alpha):
    u = np.array([[0.1, -0.2, 0.3], [0.4, 0.2, -0.1]])
    eps = 1e-5
    i = next(k for k, a in enumerate(alpha) if a)
    lower = tuple(a - (k == i) for k, a in enumerate(alpha))
    e = np.eye(3)[i] * eps
    fd = (bump(u + e, lower) - bump(u - e, lower)) / (2 * eps)
    assert np.allclose(bump(u, alpha), fd, rtol=1e-6, atol=1e-9)
    assert bump(np.array([[1.0, 0.0, 0.0]]))[0] == 0.0


def test_spec_validation_and_id():
    w = (0.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="X_omega"):
        TestFunctionSpec(w, (1.2, 0.0, 0.0))
    with pytest.raises(ValueError):
        TestFunctionSpec((0.0, 0.0, 2.0), (2.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        TestFunctionSpec(w, (2.0, 0.0, 0.0), role="observer")
    a, b = TestFunctionSpec(w, (2.0, 0.0, 0.0)), TestFunctionSpec(w, (2.0, 0.0, 0.0), role="source")
    assert a.id == b.id and len(a.id) == 10
    assert TestFunctionSpec.from_dict(a.to_dict()) == a


def test_energy_cutoff_window(experiment):
    E = np.array([0.75, 0.8, 1.0, 1.2, 1.3, 1.5])
    chi = energy_cutoff(experiment, E)
    assert chi[1:4].tolist() == [1.0, 1.0, 1.0] and chi[4:].tolist() == [0.0, 0.0] and 0 < chi[0] < 1


@pytest.mark.parametrize("h", [0.1, 0.03, 0.01])
def test_spectrum_factorizes(experiment, h):
    spec = TestFunctionSpec.for_ray(RAYS[0])
    tf = build_test_function(spec, experiment, h)
    _, F = tf.spectrum()
    assert np.allclose(F, factorized_spectrum(tf), atol=1e-12 * np.abs(F).max())


def test_direct_fourier_when_resolved():
    cfg = ExperimentConfig(delta=0.5, epsilon=0.75, grid=GridConfig(3.0, 24))
    spec = TestFunctionSpec.for_ray(RAYS[0])
    tf = build_test_function(spec, cfg, 1.0)
    xi, F = tf.spectrum()
    idx = [(0, 0, 0), (1, 2, 3), (5, 0, 22)]
    direct = tf.direct_fourier(np.array([xi[i] for i in idx]))
    assert np.allclose(direct, [F[i] for i in idx], atol=1e-10)


def test_nyquist_error(experiment):
    tf = build_test_function(TestFunctionSpec.for_ray(RAYS[0]), experiment, 0.01)
    with pytest.raises(NyquistError):
        tf.to_physical()


def test_lemma2_threshold_and_failure_above(experiment):
    h0 = lemma2_threshold(experiment)
    assert lemma2_margin(experiment, h0) == pytest.approx(0.0, abs=1e-12)
    spec = TestFunctionSpec.for_ray(RAYS[0])
    rep = verify_lemma2(spec, experiment, 0.05)
    assert rep.holds and rep.margin > 0 and rep.h0 == h0
    wide = ExperimentConfig(lam=1.0, delta=2.0, epsilon=2.9, chi_halfwidth=0.05, chi_shoulder=0.05)
    bad = verify_lemma2(spec, wide, 0.9)
    assert bad.margin < 0 and not bad.holds


def test_pairing_grid_and_overlap():
    s = TestFunctionSpec.for_ray(RAYS[0])
    g = pairing_grid(s, s, 12)
    lateral = g.y - np.asarray(s.center)
    lateral -= (lateral @ g.omega)[:, None] * g.omega
    assert np.all(np.linalg.norm(lateral, axis=1) < s.radius)
    far = TestFunctionSpec(s.omega, tuple(np.asarray(s.center) * 3), 0.5)
    assert len(pairing_grid(s, far).y) == 0 and overlap(s, far) == 0.0
    # int bump(u)^2 over the unit ball
    ref = 4 * np.pi * quad(lambda r: r * r * np.exp(-2 / (1 - r * r)), 0, 1)[0] * s.radius**3
    assert overlap(s, s, 24) == pytest.approx(ref, rel=1e-6)


def test_routes_agree(expansion):
    pairs = ray_specs(RAYS[:2])
    a = pairing_coefficients(expansion, pairs, 7, "direct", n_pair=16)
    b = pairing_coefficients(expansion, pairs, 7, "operator", n_pair=16)
    assert np.allclose(a[:, :3], b[:, :3], rtol=1e-10, atol=1e-14)
    assert np.allclose(a, b, rtol=5e-3)


def test_leading_coefficient_is_weighted_xray(expansion, two_layer):
    s, r = ray_specs(RAYS[:1])[0]
    c1 = pairing_coefficients(expansion, [(s, r)], 1)[0, 0]
    g = pairing_grid(s, r, 16)
    V1 = two_layer.truncate(1)
    X = np.array([xray_full_line(V1, Ray.make(g.omega, y)) for y in g.y])
    ref = 0.5j * np.sum(g.w * s(g.points) * r(g.points) * X[:, None])
    assert c1 == pytest.approx(ref, rel=1e-9)


def test_pairing_validation(expansion):
    s = TestFunctionSpec.for_ray(RAYS[0])
    t = TestFunctionSpec.for_ray(RAYS[3])
    with pytest.raises(ValueError, match="share omega"):
        pairing_coefficients(expansion, [(s, t)], 1)
    with pytest.raises(ValueError):
        pairing_coefficients(expansion, [(s, s)], 8)
    with pytest.raises(ValueError):
        pairing_coefficients(expansion, [(s, s)], 1, route="adjoint")


def test_evaluate_series():
    c = np.array([1.0, 2.0j])
    assert np.allclose(evaluate_series(c, [1.0, 2.0], [0.1, 0.5]), [0.1 + 0.02j, 0.5 + 0.5j])


def test_synthesize_F_matches_dataset(expansion, two_layer, experiment):
    s, r = ray_specs(RAYS[:1])[0]
    h = np.geomspace(1e-3, 1e-1, 6)
    samples = synthesize_F(experiment, s, r, two_layer, expansion.lattice, expansion, h, 7)
    ds = synthesize_dataset(experiment, two_layer, expansion.lattice, [(s, r)], h, 7, expansion=expansion)
    assert np.allclose([x.value for x in samples], ds.series[0].values, rtol=1e-14)


def test_noise_is_seeded(expansion, two_layer, experiment):
    pairs = ray_specs(RAYS[:2])
    kw = dict(h_grid=np.geomspace(1e-3, 1e-1, 5), K=3, expansion=expansion)
    a = synthesize_dataset(experiment, two_layer, expansion.lattice, pairs, noise=1e-6, seed=5, **kw)
    b = synthesize_dataset(experiment, two_layer, expansion.lattice, pairs, noise=1e-6, seed=5, **kw)
    c = synthesize_dataset(experiment, two_layer, expansion.lattice, pairs, noise=1e-6, seed=6, **kw)
    assert np.array_equal(a.series[1].values, b.series[1].values)
    assert not np.array_equal(a.series[1].values, c.series[1].values)


def test_workers_do_not_change_results(expansion, two_layer, experiment):
    pairs = ray_specs(RAYS[:3])
    kw = dict(h_grid=np.geomspace(1e-3, 1e-1, 5), K=3)
    a = synthesize_dataset(experiment, two_layer, expansion.lattice, pairs, **kw)
    b = synthesize_dataset(experiment, two_layer, expansion.lattice, pairs, workers=2, **kw)
    assert np.allclose(a.coefficients, b.coefficients, rtol=1e-13, atol=1e-16)


def test_cache_round_trip(expansion, tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    pairs = ray_specs(RAYS[:1])
    a = pairing_coefficients(expansion, pairs, 2)
    assert len(list(tmp_path.glob("pairings-*.npy"))) == 1
    assert np.array_equal(pairing_coefficients(expansion, pairs, 2), a)


def test_dataset_io(expansion, two_layer, experiment, tmp_path):
    ds = synthesize_dataset(experiment, two_layer, expansion.lattice, ray_specs(RAYS[:2]), np.geomspace(1e-3, 1e-1, 4), 3)
    ds.manifest = {"run": "x"}
    ds.save(tmp_path / "d.json")
    back = ScatteringDataset.load(tmp_path / "d.json")
    assert np.array_equal(back.series[1].values, ds.series[1].values) and back.K == 3
    assert back.config == ds.config and np.array_equal(back.coefficients, ds.coefficients)
    ds.save(tmp_path / "d.csv")
    lines = open(tmp_path / "d.csv").read().splitlines()
    assert lines[0].startswith("# manifest")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 8 and complex(float(rows[0]["re"]), float(rows[0]["im"])) == ds.series[0].values[0]
