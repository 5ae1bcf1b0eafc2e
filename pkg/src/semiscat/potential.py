"""Potentials that are exact finite sums of homogeneous terms outside a core.

Each term is ``|x|**(-rho) * g(x/|x|)`` with ``g`` a real function on the unit
sphere.  Inside ``core_radius`` the singular tail is replaced by a smooth
profile: the radius is smoothed to a constant and the angular part is blended
into its spherical mean, so isotropic terms stay radially monotone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import pi, sqrt
from pathlib import Path

import numpy as np

from .harmonics import PolyRadial, lm_pairs, n_harmonics, real_sph_harm, solid_harmonic
from .smooth import dstep, step

Y00 = 1.0 / (2.0 * sqrt(pi))


class ConfigError(ValueError):
    """Invalid configuration value; the message names the violated constraint."""


@dataclass(frozen=True)
class AngularProfile:
    """Smooth real function on the unit sphere.

    ``kind="isotropic"`` stores a single constant in ``coeffs``;
    ``kind="harmonics"`` stores orthonormal real spherical-harmonic
    coefficients ordered ``(l, m)`` with ``l = 0..L, m = -l..l``.
    """

    kind: str
    coeffs: tuple
    n: int = 3

    def __post_init__(self):
        if self.n != 3:
            raise ConfigError("only n = 3 is supported")
        if self.kind == "isotropic":
            if len(self.coeffs) != 1:
                raise ConfigError("isotropic profile takes exactly one coefficient")
        elif self.kind == "harmonics":
            L = int(round(sqrt(len(self.coeffs)))) - 1
            if n_harmonics(L) != len(self.coeffs) or L < 0:
                raise ConfigError("harmonic coefficient count must be (L+1)**2")
        else:
            raise ConfigError(f"unknown angular profile type {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def isotropic(cls, c: float) -> "AngularProfile":
        return cls("isotropic", (c,))

    @classmethod
    def harmonics(cls, coeffs) -> "AngularProfile":
        return cls("harmonics", tuple(coeffs))

    @classmethod
    def zero(cls) -> "AngularProfile":
        return cls("isotropic", (0.0,))

    @classmethod
    def from_nodal_values(cls, nodes, weights, values, L: int) -> "AngularProfile":
        """Project sampled values onto harmonics of degree <= L by quadrature."""
        Y = real_sph_harm(L, nodes)
        return cls.harmonics(Y.T @ (np.asarray(weights) * np.asarray(values)))

    @property
    def degree(self) -> int:
        if self.kind == "isotropic":
            return 0
        return int(round(sqrt(len(self.coeffs)))) - 1

    def harmonic_coeffs(self, L: int | None = None) -> np.ndarray:
        L = self.degree if L is None else L
        out = np.zeros(n_harmonics(L))
        if self.kind == "isotropic":
            out[0] = self.coeffs[0] / Y00
        else:
            c = np.asarray(self.coeffs)
            m = min(len(c), len(out))
            out[:m] = c[:m]
        return out

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    @property
    def mean(self) -> float:
        """Spherical mean of g."""
        if self.kind == "isotropic":
            return self.coeffs[0]
        return self.coeffs[0] * Y00

    def sup_bound(self) -> float:
        """Upper bound for max |g| on the sphere."""
        if self.kind == "isotropic":
            return abs(self.coeffs[0])
        return sum(abs(c) * sqrt((2 * l + 1) / (4 * pi)) for c, (l, _) in zip(self.coeffs, lm_pairs(self.degree)))

    def poly(self) -> PolyRadial:
        """g(x/|x|) as a degree-0 homogeneous PolyRadial."""
        if self.kind == "isotropic":
            return PolyRadial({(0, 0, 0, 0.0): self.coeffs[0]})
        out = PolyRadial()
        for c, (l, m) in zip(self.coeffs, lm_pairs(self.degree)):
            if c != 0.0:
                out = out + PolyRadial.from_poly(solid_harmonic(l, m), float(l)).scale(c)
        return out

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "isotropic":
            return np.full(u.shape[:-1], self.coeffs[0])
        return real_sph_harm(self.degree, u) @ np.asarray(self.coeffs)

    def to_dict(self) -> dict:
        return {"type": self.kind, "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "AngularProfile":
        return cls(d["type"], tuple(d["coeffs"]), int(d.get("n", 3)))


@dataclass(frozen=True)
class HomogeneousTerm:
    rho: float
    angular: AngularProfile

    def __post_init__(self):
        if not self.rho > 1:
            raise ConfigError(f"rho must exceed 1 (short-range), got {self.rho}")

    def tail_poly(self) -> PolyRadial:
        return self.angular.poly().shift(self.rho)

    def __call__(self, x) -> np.ndarray:
        return self.tail_poly()(x)


@dataclass(frozen=True)
class PotentialExpansion:
    terms: tuple = ()
    core_radius: float = 0.5
    _polys: tuple = field(default=(), init=False, repr=False, compare=False)
    _dpolys: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        rhos = [t.rho for t in terms]
        if any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise ConfigError("term degrees rho_j must be strictly increasing")
        if not self.core_radius > 0:
            raise ConfigError("core_radius must be positive")
        polys = tuple(t.angular.poly() for t in terms)
        object.__setattr__(self, "_polys", polys)
        object.__setattr__(self, "_dpolys", tuple(tuple(g.diff(i) for i in range(3)) for g in polys))

    @property
    def rhos(self) -> list[float]:
        return [t.rho for t in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def truncate(self, J: int) -> "PotentialExpansion":
        if not 1 <= J <= len(self.terms):
            raise ValueError(f"J must lie in [1, {len(self.terms)}], got {J}")
        return PotentialExpansion(self.terms[:J], self.core_radius)

    def tail(self, x) -> np.ndarray:
        """Sum of the homogeneous terms, no cutoff (singular at 0)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for t, g in zip(self.terms, self._polys):
            out = out + g.shift(t.rho)(x)
        return out

    def _radial(self, r):
        rc = self.core_radius
        s = (r - 0.5 * rc) / (0.5 * rc)
        k = step(s)
        dk = dstep(s) / (0.5 * rc)
        R = k * r + (1 - k) * 0.5 * rc
        dR = dk * (r - 0.5 * rc) + k
        return k, dk, R, dR

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        k, _, R, _ = self._radial(r)
        safe = np.where(r[..., None] > 0, x, 1.0)
        out = np.zeros(r.shape)
        for t, g in zip(self.terms, self._polys):
            ang = np.where(k > 0, g(safe), 0.0)
            out = out + R ** (-t.rho) * (k * ang + (1 - k) * t.angular.mean)
        return out

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        k, dk, R, dR = self._radial(r)
        live = k > 0
        safe = np.where(r[..., None] > 0, x, 1.0)
        xhat = safe / np.where(r > 0, r, 1.0)[..., None]
        out = np.zeros(x.shape)
        for t, g, dg in zip(self.terms, self._polys, self._dpolys):
            gm = t.angular.mean
            ang = np.where(live, g(safe), 0.0)
            gg = np.stack([np.where(live, d(safe), 0.0) for d in dg], -1)
            Rp = R ** (-t.rho)
            radial = -t.rho * R ** (-t.rho - 1) * dR * (k * ang + (1 - k) * gm) + Rp * (ang - gm) * dk
            out = out + radial[..., None] * xhat + (Rp * k)[..., None] * gg
        return out

    def grad_point(self, x) -> list:
        """Scalar fast path of :meth:`grad` for one point (used by the ODE right-hand side)."""
        x0, x1, x2 = float(x[0]), float(x[1]), float(x[2])
        r = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        rc = self.core_radius
        if r >= rc:
            k, dk, R, dR = 1.0, 0.0, r, 1.0
        else:
            k, dk, R, dR = (float(v) for v in self._radial(np.array(r)))
        if k == 0.0 or r == 0.0:
            return [0.0, 0.0, 0.0]
        xh = (x0 / r, x1 / r, x2 / r)
        out = [0.0, 0.0, 0.0]
        for t, terms in zip(self.terms, self._point_terms()):
            ang, gg = 0.0, [0.0, 0.0, 0.0]
            logr = math.log(r)
            for a0, a1, a2, beta, c in terms:
                base = c * math.exp(-beta * logr)
                mono = (x0**a0) * (x1**a1) * (x2**a2)
                ang += base * mono
                # d/dx_i of x^a r^-beta
                for i, (ai, xi) in enumerate(((a0, x0), (a1, x1), (a2, x2))):
                    d = -beta * mono * xi / (r * r)
                    if ai:
                        d += ai * (x0 ** (a0 - (i == 0))) * (x1 ** (a1 - (i == 1))) * (x2 ** (a2 - (i == 2)))
                    gg[i] += base * d
            gm = t.angular.mean
            Rp = R ** (-t.rho)
            radial = -t.rho * Rp / R * dR * (k * ang + (1 - k) * gm) + Rp * (ang - gm) * dk
            for i in range(3):
                out[i] += radial * xh[i] + Rp * k * gg[i]
        return out

    def _point_terms(self):
        cached = self.__dict__.get("_pt")
        if cached is None:
            cached = [[(*key, c) for key, c in g.terms.items()] for g in self._polys]
            object.__setattr__(self, "_pt", cached)
        return cached

    def decay_constant(self) -> float:
        """C with |V(x)| <= C |x|**(-rho_1) for |x| >= core_radius."""
        if not self.terms:
            return 0.0
        rho1 = self.terms[0].rho
        return sum(t.angular.sup_bound() * self.core_radius ** (rho1 - t.rho) for t in self.terms)

    def to_dict(self) -> dict:
        return {
            "core_radius": self.core_radius,
            "terms": [{"rho": t.rho, "angular": t.angular.to_dict()} for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialExpansion":
        terms = tuple(
            HomogeneousTerm(float(t["rho"]), AngularProfile.from_dict(t["angular"])) for t in d.get("terms", [])
        )
        return cls(terms, float(d.get("core_radius", 0.5)))

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def eval_potential(p: PotentialExpansion, x) -> np.ndarray:
    return p.eval(x)


def grad_potential(p: PotentialExpansion, x) -> np.ndarray:
    return p.grad(x)


def truncate(p: PotentialExpansion, J: int) -> PotentialExpansion:
    return p.truncate(J)


def load_potential(path) -> PotentialExpansion:
    """Read a potential from a JSON or TOML file (top level or under ``potential``)."""
    from .config import read_config

    data = read_config(Path(path))
    return PotentialExpansion.from_dict(data.get("potential", data))
