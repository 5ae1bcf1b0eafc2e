import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from semiscat.potential import AngularProfile, HomogeneousTerm, PotentialExpansion
from semiscat.xray import (
    Ray,
    XRayOperatorMatrix,
    assemble_xray_operator,
    default_rays,
    read_rays_csv,
    write_rays_csv,
    xray_full_line,
    xray_half_line,
    xray_rows,
)

PROFILE = AngularProfile.harmonics([0.3, 0.4, 0.8, -0.5, 0.1, 0.0, 0.2, -0.3, 0.05])


def brute_line(p, ray):
    f = lambda s: float(p.eval(ray.y + s * ray.omega))
    return quad(f, -np.inf, 0, epsabs=1e-13, limit=400)[0] + quad(f, 0, np.inf, epsabs=1e-13, limit=400)[0]


@pytest.mark.parametrize("rho,closed", [(2.0, lambda b: np.pi / b), (3.0, lambda b: 2.0 / b**2), (4.0, lambda b: np.pi / (2 * b**3))])
@pytest.mark.parametrize("b", [1.0, 2.0, 5.0])
def test_isotropic_closed_forms(rho, closed, b):
    p = PotentialExpansion((HomogeneousTerm(rho, AngularProfile.isotropic(1.0)),))
    ray = Ray(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, b]))
    assert xray_full_line(p, ray) == pytest.approx(closed(b), abs=1e-10)
    assert brute_line(p, ray) == pytest.approx(closed(b), abs=1e-8)


@pytest.mark.parametrize("rho", [1.5, 2.0, 3.0])
def test_anisotropic_against_brute_force(rho):
    p = PotentialExpansion((HomogeneousTerm(rho, PROFILE),))
    for ray in default_rays(4, 2, 1.7):
        assert xray_full_line(p, ray) == pytest.approx(brute_line(p, ray), abs=1e-8)


def test_half_lines_sum_to_full_line():
    p = PotentialExpansion((HomogeneousTerm(2.5, PROFILE),))
    ray = default_rays(3, 1, 2.0)[1]
    full = xray_half_line(p, ray.y, ray.omega) + xray_half_line(p, ray.y, -ray.omega)
    assert full == pytest.approx(xray_full_line(p, ray), abs=1e-9)


def test_half_line_through_core_raises():
    p = PotentialExpansion((HomogeneousTerm(2.0, PROFILE),))
    with pytest.raises(ValueError):
        xray_half_line(p, np.array([-3.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))


@pytest.mark.parametrize(
    "omega,y",
    [([1.0, 0.0, 0.0], [0.0, 0.5, 0.0]), ([1.0, 1.0, 0.0], [0.0, 0.0, 2.0]), ([1.0, 0.0, 0.0], [1.0, 2.0, 0.0])],
)
def test_ray_validation(omega, y):
    with pytest.raises(ValueError):
        Ray(np.array(omega), np.array(y))


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(1.01, 6.0))
@settings(max_examples=30, deadline=None)
def test_ray_make_projects(w, b):
    w = np.array(w)
    if np.linalg.norm(w) < 1e-3:
        return
    e = np.cross(w, [0.3, 0.7, 0.1])
    if np.linalg.norm(e) < 1e-3:
        return
    ray = Ray.make(w, e / np.linalg.norm(e) * b + 4.0 * w)
    assert abs(ray.omega @ ray.y) < 1e-12 and ray.b == pytest.approx(b)


@pytest.mark.parametrize("rho", [2.0, 3.0])
def test_operator_rows_match_line_integrals(rho):
    rays = default_rays(6, 3, 2.0)
    M = assemble_xray_operator(rho, rays, 2)
    p = PotentialExpansion((HomogeneousTerm(rho, PROFILE),))
    lo = AngularProfile.harmonics(PROFILE.coeffs[:9])
    direct = [xray_full_line(PotentialExpansion((HomogeneousTerm(rho, lo),)), r) for r in rays]
    assert np.allclose(M.apply(lo.coeffs), direct, atol=1e-9)
    assert np.allclose(xray_rows(rho, np.array([r.y for r in rays]), np.array([r.omega for r in rays]), 2), M.matrix)
    assert p.rhos == [rho]


def test_default_operator_conditioning():
    M = assemble_xray_operator(2.0, default_rays(), 4)
    assert M.shape == (216, 25) and M.rank() == 25 and M.condition < 10


@pytest.mark.parametrize("suffix", ["npz", "csv"])
def test_operator_save_load(tmp_path, suffix):
    M = assemble_xray_operator(3.0, default_rays(4, 2), 1)
    path = tmp_path / f"m.{suffix}"
    M.save(path)
    back = XRayOperatorMatrix.load(path)
    assert np.allclose(back.matrix, M.matrix, rtol=1e-15) and back.header() == M.header()


def test_rays_csv_round_trip(tmp_path):
    rays = default_rays(5, 2)
    write_rays_csv(rays, tmp_path / "r.csv")
    back = read_rays_csv(tmp_path / "r.csv")
    assert all(np.allclose(a.omega, b.omega) and np.allclose(a.y, b.y) for a, b in zip(rays, back))
