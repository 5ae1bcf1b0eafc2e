"""Real spherical harmonics, exact derivative algebra and sphere grids.

Functions of the form ``sum c * x**a0 * y**a1 * z**a2 * r**(-beta)`` are closed
under differentiation, which is all the potential and symbol code needs:
a homogeneous term ``r**-rho * Y_lm(x/r)`` is ``N_l S_lm(x) r**(-rho-l)`` with
``S_lm`` the regular solid harmonic polynomial.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb, factorial, pi, sqrt

import numpy as np


def lm_index(l: int, m: int) -> int:
    return l * l + l + m


def n_harmonics(L: int) -> int:
    return (L + 1) ** 2


def lm_pairs(L: int) -> list[tuple[int, int]]:
    return [(l, m) for l in range(L + 1) for m in range(-l, l + 1)]


# --- polynomial helpers: dict {(a0, a1, a2): coeff} ------------------------

def _padd(p, q, s=1.0):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0.0) + s * v
    return {k: v for k, v in out.items() if v != 0.0}


def _pscale(p, s):
    return {k: s * v for k, v in p.items()}


def _pmul_var(p, i):
    out = {}
    for k, v in p.items():
        kk = list(k)
        kk[i] += 1
        out[tuple(kk)] = out.get(tuple(kk), 0.0) + v
    return out


def _pmul_r2(p):
    out = {}
    for i in range(3):
        out = _padd(out, _pmul_var(_pmul_var(p, i), i))
    return out


@lru_cache(maxsize=None)
def _solid_harmonics(L: int) -> tuple:
    """Racah-normalised real regular solid harmonics S_lm up to degree L.

    Uses the standard upward recursion (Helgaker, Jorgensen & Olsen, 6.4.70).
    """
    S = {(0, 0): {(0, 0, 0): 1.0}}
    for l in range(L):
        f = sqrt((2.0 if l == 0 else 1.0) * (2 * l + 1) / (2 * l + 2))
        top = _pmul_var(S[(l, l)], 0)
        bot = _pmul_var(S[(l, l)], 1)
        if l > 0:
            top = _padd(top, _pmul_var(S[(l, -l)], 1), -1.0)
            bot = _padd(bot, _pmul_var(S[(l, -l)], 0), 1.0)
        S[(l + 1, l + 1)] = _pscale(top, f)
        S[(l + 1, -l - 1)] = _pscale(bot, f)
        for m in range(-l, l + 1):
            p = _pscale(_pmul_var(S[(l, m)], 2), 2 * l + 1)
            if abs(m) <= l - 1:
                p = _padd(p, _pmul_r2(S[(l - 1, m)]), -sqrt((l + m) * (l - m)))
            S[(l + 1, m)] = _pscale(p, 1.0 / sqrt((l + m + 1) * (l - m + 1)))
    return tuple(tuple(sorted(S[lm].items())) for lm in lm_pairs(L))


def solid_harmonic(l: int, m: int) -> dict:
    """Orthonormalised solid harmonic ``r**l * Y_lm(x/r)`` as a polynomial."""
    poly = dict(_solid_harmonics(l)[lm_index(l, m)])
    return _pscale(poly, sqrt((2 * l + 1) / (4 * pi)))


class PolyRadial:
    """Finite sum ``sum_k c_k x^a_k r^(-beta_k)`` on R^3 minus the origin."""

    __slots__ = ("terms", "_cache")

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0.0}
        self._cache = None

    @classmethod
    def from_poly(cls, poly: dict, beta: float) -> "PolyRadial":
        return cls({(a[0], a[1], a[2], float(beta)): c for a, c in poly.items()})

    def __add__(self, other: "PolyRadial") -> "PolyRadial":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return PolyRadial(out)

    def scale(self, s: float) -> "PolyRadial":
        return PolyRadial({k: s * v for k, v in self.terms.items()})

    def shift(self, dbeta: float) -> "PolyRadial":
        """Multiply by ``r**(-dbeta)``."""
        return PolyRadial({(*k[:3], k[3] + dbeta): v for k, v in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def diff(self, i: int) -> "PolyRadial":
        out: dict = {}
        for (a0, a1, a2, beta), c in self.terms.items():
            a = [a0, a1, a2]
            if a[i] > 0:
                b = list(a)
                b[i] -= 1
                key = (*b, beta)
                out[key] = out.get(key, 0.0) + c * a[i]
            if beta != 0.0:
                b = list(a)
                b[i] += 1
                key = (*b, beta + 2.0)
                out[key] = out.get(key, 0.0) - c * beta
        return PolyRadial(out)

    def diff_multi(self, alpha) -> "PolyRadial":
        p = self
        for i, n in enumerate(alpha):
            for _ in range(n):
                p = p.diff(i)
        return p

    def _compiled(self):
        c = getattr(self, "_cache", None)
        if c is None:
            keys = list(self.terms)
            A = np.array([k[:3] for k in keys], dtype=float).reshape(-1, 3)
            B = np.array([k[3] for k in keys], dtype=float)
            C = np.array([self.terms[k] for k in keys], dtype=float)
            c = (A, B, C)
            self._cache = c
        return c

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros(x.shape[:-1])
        A, B, C = self._compiled()
        logr = 0.5 * np.log(np.einsum("...i,...i->...", x, x))
        mono = np.prod(x[..., None, :] ** A, axis=-1)
        return np.einsum("...k,k->...", mono * np.exp(-np.multiply.outer(logr, B)), C)


def real_sph_harm(L: int, u) -> np.ndarray:
    """Orthonormal real harmonics at unit vectors ``u``; shape ``u.shape[:-1] + ((L+1)**2,)``."""
    u = np.asarray(u, dtype=float)
    cols = []
    for l, m in lm_pairs(L):
        cols.append(PolyRadial.from_poly(solid_harmonic(l, m), 0.0)(u))
    return np.stack(cols, axis=-1)


def sphere_grid(kind: str = "gauss", n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic sphere quadrature; weights sum to 4*pi.

    ``gauss``: n Gauss-Legendre nodes in cos(theta) times 2n uniform azimuths,
    exact for harmonics of degree <= 2n-1.  ``fibonacci``: n equal-weight points.
    """
    if kind == "gauss":
        ct, wt = np.polynomial.legendre.leggauss(n)
        phi = 2 * pi * np.arange(2 * n) / (2 * n)
        st = np.sqrt(1 - ct**2)
        pts = np.stack(
            [np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(ct, np.ones_like(phi))],
            axis=-1,
        ).reshape(-1, 3)
        w = np.outer(wt, np.full(2 * n, 2 * pi / (2 * n))).ravel()
        return pts, w
    if kind == "fibonacci":
        i = np.arange(n) + 0.5
        theta = np.arccos(1 - 2 * i / n)
        phi = pi * (1 + sqrt(5.0)) * i
        pts = np.stack([np.cos(phi) * np.sin(theta), np.sin(phi) * np.sin(theta), np.cos(theta)], -1)
        return pts, np.full(n, 4 * pi / n)
    raise ValueError(f"unknown sphere grid {kind!r}")


def multi_indices(order: int) -> list[tuple[int, int, int]]:
    return [(a, b, order - a - b) for a in range(order, -1, -1) for b in range(order - a, -1, -1)]


def multinomial(alpha) -> int:
    n = sum(alpha)
    out = factorial(n)
    for a in alpha:
        out //= factorial(a)
    return out


def binom_multi(alpha, kappa) -> int:
    out = 1
    for a, k in zip(alpha, kappa):
        out *= comb(a, k)
    return out
