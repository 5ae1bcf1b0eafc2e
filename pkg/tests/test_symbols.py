import numpy as np
import pytest
from scipy.integrate import quad

from semiscat.lattice import generate_lattice
from semiscat.potential import AngularProfile, HomogeneousTerm, PotentialExpansion
from semiscat.symbols import ZERO, Algebra, SymbolExpansion, cheb_line, evaluate_on_lines, lines_through, solve_transport
from semiscat.xray import Ray, xray_full_line

from .conftest import iso

ANISO = AngularProfile.harmonics([0.3, 0.4, 0.8, -0.5])
W = np.array([0.0, 0.0, 1.0])


def aniso(rho=2.0):
    return PotentialExpansion((HomogeneousTerm(rho, ANISO),))


def half_line(f, x, w, sign=1):
    """int_0^inf f(x + s w) ds (sign=+1) or int_-inf^0 (sign=-1)."""
    lo, hi = (0, np.inf) if sign > 0 else (-np.inf, 0)
    return quad(lambda s: f(x + s * w), lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def test_chebyshev_cumulative_integrates_polynomials():
    cl = cheb_line(24)
    v = cl.v
    f = 3 * v**2 - v + 0.5
    F = cl.Q @ f
    exact = (v**3 - v**2 / 2 + v / 2) - (-1 - 0.5 - 0.5)
    assert np.allclose(F, exact, atol=1e-13)


@pytest.mark.parametrize("sign,expected", [(1, 1j * np.pi / 4), (-1, -1j * np.pi / 4)])
def test_first_symbol_closed_form(sign, expected):
    p = iso((2.0, 1.0))
    lat = generate_lattice((2.0,), 2.0, 1.0)
    d1 = solve_transport(lat, 1, sign, p, 1.0)
    assert d1.evaluate(np.array([[1.0, 0.0, 0.0]]), np.zeros(3), W)[0] == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("sign", [1, -1])
def test_first_symbol_against_quadrature(lam, sign):
    p = aniso()
    lat = generate_lattice((2.0,), 2.0, 1.0)
    d1 = solve_transport(lat, 1, sign, p, lam)
    w = np.array([0.6, 0.0, 0.8])
    xs = np.array([[0.0, 1.3, 0.0], [-1.6, 0.0, 1.2], [0.8, -2.0, -0.6]])
    got = d1.evaluate(xs, np.zeros(3), w)
    V = lambda z: float(p.tail(z))
    ref = [sign * 1j / (2 * np.sqrt(lam)) * half_line(V, x, w, sign) for x in xs]
    assert np.allclose(got, ref, atol=1e-11)


def test_second_symbol_nested_quadrature():
    p = aniso()
    lat = generate_lattice((2.0,), 2.0, 2.0)
    exp = SymbolExpansion(p, lat, 1.0, 2)
    V = lambda z: float(p.tail(z))
    im_d1 = lambda z: 0.5 * half_line(V, z, W)  # d_1 is purely imaginary
    x = np.array([1.5, 0.4, -0.3])
    ref = 0.5j * 1j * half_line(lambda z: V(z) * im_d1(z), x, W)
    got = exp.d(2, 1).evaluate(x[None], np.zeros(3), W)[0]
    assert got == pytest.approx(ref, abs=1e-9)


def test_xi_coefficients_of_shifted_order():
    """The order nu_1 + 1 + delta picks up int grad d_1 along the line."""
    p = aniso()
    lat = generate_lattice((2.0,), 2.0, 4.0)
    exp = SymbolExpansion(p, lat, 1.0, 4)
    d4 = exp.d(4, 1)
    assert d4.xi_degree == 1
    x = np.array([0.2, 1.7, -0.5])
    for i in range(3):
        e = np.eye(3)[i]
        dV = lambda z: float(p.grad(z)[i])
        grad_d1 = lambda z: 0.5 * half_line(dV, z, W)  # imaginary part of (i/2) int dV
        ref = 1j * half_line(grad_d1, x, W)
        got = d4.evaluate(x[None], e, W)[0] - d4.evaluate(x[None], np.zeros(3), W)[0]
        assert got == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_transport_equation_holds(k, two_layer):
    lat = generate_lattice(two_layer.rhos, 2.0, 3.0)
    exp = SymbolExpansion(two_layer, lat, 1.0, 3)
    w = np.array([0.0, 0.6, 0.8])
    x = np.array([1.4, 0.3, -0.2])
    eps = 1e-5
    d = exp.d(k, 1)
    fd = (d.evaluate((x + eps * w)[None], np.zeros(3), w) - d.evaluate((x - eps * w)[None], np.zeros(3), w))[0] / (2 * eps)
    # source at nu_k: V_j for mu_j = nu_k plus V_j d_m for mu_j + nu_m = nu_k
    src = 0j
    for j, mu in enumerate(lat.mus):
        V = float(HomogeneousTerm(two_layer.rhos[j], two_layer.terms[j].angular)(x[None])[0])
        if mu == lat.nu(k):
            src += V
        for m in range(1, k):
            if mu + lat.nu(m) == lat.nu(k):
                src += V * exp.d(m, 1).evaluate(x[None], np.zeros(3), w)[0]
    assert fd == pytest.approx(src / 2j, abs=1e-7)


def test_solve_transport_validation(two_layer):
    lat = generate_lattice(two_layer.rhos, 2.0, 3.0)
    with pytest.raises(ValueError, match="must be solved"):
        solve_transport(lat, 2, 1, two_layer, 1.0)
    with pytest.raises(ValueError):
        solve_transport(lat, 1, 0, two_layer, 1.0)
    with pytest.raises(ValueError):
        solve_transport(lat, 9, 1, two_layer, 1.0)


def test_expansion_validation(two_layer):
    lat = generate_lattice((2.0, 4.0), 2.0, 5.0)
    with pytest.raises(ValueError, match="degrees"):
        SymbolExpansion(two_layer, lat, 1.0, 3)
    with pytest.raises(ValueError):
        SymbolExpansion(two_layer, generate_lattice((2.0, 3.0), 2.0, 3.0), 1.0, 7)


def test_operator_structure(two_layer):
    lat = generate_lattice(two_layer.rhos, 2.0, 7.0)
    exp = SymbolExpansion(two_layer, lat, 1.0, 7)
    A1, A3 = exp.operator(1), exp.operator(3)
    assert A1.is_multiplication and A1.lower_is_zero() and A1.leading_layer == 1
    assert A3.leading_layer == 2 and A3.lower_layers() == {1}
    assert not exp.operator(4).is_multiplication  # first derivative terms enter at nu_1 + 1 + delta
    assert exp.operator(2).leading_layer is None


def test_leading_operator_is_xray(two_layer):
    lat = generate_lattice(two_layer.rhos, 2.0, 1.0)
    exp = SymbolExpansion(two_layer, lat, 1.0, 1)
    A1 = exp.operator(1)
    ray = Ray(W, np.array([1.2, -0.9, 0.0]))
    x = ray.y + 0.7 * W
    y, t = lines_through(x[None], W)
    val = evaluate_on_lines(exp.algebra, [A1.terms[(0, 0, 0)]], y, W[None], t)[A1.terms[(0, 0, 0)]][0, 0]
    X = xray_full_line(two_layer.truncate(1), ray)
    assert val == pytest.approx(0.5j * X, abs=1e-12)


def test_algebra_hash_consing(two_layer):
    alg = Algebra(two_layer)
    a, b = alg.leaf(0), alg.leaf(1)
    assert alg.add(a, b) == alg.add(b, a)
    assert alg.mul(a, b) == alg.mul(b, a)
    assert alg.diff(alg.diff(a, 0), 1) == alg.diff(alg.diff(a, 1), 0)
    assert alg.mul(a, ZERO) == ZERO and alg.scale(0.0, a) == ZERO
    assert alg.conj(alg.scale(1j, a)) == alg.scale(-1j, a)
    assert alg.signs(alg.cum(1, a)) == frozenset({1})
