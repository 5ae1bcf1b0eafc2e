"""Exponent lattice nu_k = sum_j m_j mu_j + p (1 + delta), mu_j = delta (rho_j - 1) - 1."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .potential import ConfigError

TOL = 1e-9


def term_exponents(rhos, delta: float) -> list[float]:
    return [delta * (r - 1.0) - 1.0 for r in rhos]


def check_delta(rhos, delta: float) -> None:
    if not rhos:
        raise ConfigError("at least one degree rho_j is required")
    rho1 = rhos[0]
    if not rho1 > 1:
        raise ConfigError(f"rho_1 must exceed 1, got {rho1}")
    if not delta > 1.0 / (rho1 - 1.0):
        raise ConfigError(f"delta must exceed 1/(rho_1 - 1) = {1.0 / (rho1 - 1.0):g}, got delta = {delta:g}")


@dataclass(frozen=True)
class Provenance:
    m: tuple  # usage count of each term exponent mu_j
    p: int  # number of (1 + delta) shifts

    def value(self, mus, delta: float) -> float:
        return sum(mj * mu for mj, mu in zip(self.m, mus)) + self.p * (1.0 + delta)

    def to_dict(self) -> dict:
        return {"m": list(self.m), "p": self.p}

    def is_pure(self, j: int) -> bool:
        """True if this is the single-term exponent mu_j (0-based j)."""
        return self.p == 0 and self.m[j] == 1 and sum(self.m) == 1


@dataclass(frozen=True)
class LatticeEntry:
    nu: float
    provenances: tuple

    @property
    def provenance(self) -> Provenance:
        return self.provenances[0]


@dataclass
class ExponentLattice:
    rhos: tuple
    delta: float
    nu_max: float
    entries: list = field(default_factory=list)

    @property
    def mus(self) -> list[float]:
        return term_exponents(self.rhos, self.delta)

    @property
    def shift(self) -> float:
        return 1.0 + self.delta

    @property
    def nus(self) -> list[float]:
        return [e.nu for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def index_of(self, nu: float) -> int | None:
        """1-based index of exponent ``nu``, or None."""
        for k, e in enumerate(self.entries, 1):
            if abs(e.nu - nu) <= TOL:
                return k
        return None

    def nu(self, k: int) -> float:
        """nu_k for 1-based k; nu_0 = 0 stands for the identity part of the modifiers."""
        return 0.0 if k == 0 else self.entries[k - 1].nu

    def layer_index(self, j: int) -> int:
        """k_j: 1-based lattice index of mu_j for 1-based layer j."""
        mu = self.mus[j - 1]
        k = self.index_of(mu)
        if k is None:
            raise ValueError(f"layer {j} exponent {mu} exceeds nu_max = {self.nu_max}")
        return k

    def collisions(self, j: int) -> list[Provenance]:
        """Other provenances sharing the exponent of layer j."""
        e = self.entries[self.layer_index(j) - 1]
        return [pv for pv in e.provenances if not pv.is_pure(j - 1)]

    def pairs(self, k: int) -> list[tuple[int, int]]:
        """All (a, b), a, b >= 0, not both 0, with nu_a + nu_b = nu_k."""
        nu = self.nu(k)
        out = []
        for a in range(k + 1):
            for b in range(k + 1):
                if (a or b) and abs(self.nu(a) + self.nu(b) - nu) <= TOL:
                    out.append((a, b))
        return out

    def truncated(self, K: int) -> "ExponentLattice":
        return ExponentLattice(self.rhos, self.delta, self.entries[K - 1].nu, self.entries[:K])

    def default_order(self) -> int:
        """Number of entries <= nu_1 + 2 (1 + delta)."""
        cut = self.entries[0].nu + 2 * self.shift + TOL
        return sum(1 for e in self.entries if e.nu <= cut)

    def to_dict(self) -> dict:
        return {
            "rhos": list(self.rhos),
            "delta": self.delta,
            "nu_max": self.nu_max,
            "mu": self.mus,
            "entries": [
                {"k": k, "nu": e.nu, "provenance": [pv.to_dict() for pv in e.provenances]}
                for k, e in enumerate(self.entries, 1)
            ],
        }


def generate_lattice(rhos, delta: float, nu_max: float) -> ExponentLattice:
    rhos = tuple(float(r) for r in rhos)
    check_delta(rhos, delta)
    mus = term_exponents(rhos, delta)
    if nu_max < mus[0] - TOL:
        raise ValueError(f"nu_max = {nu_max} is below nu_1 = {mus[0]}")
    found: dict[float, list] = {}

    def rec(j, m, acc):
        if j == len(mus):
            if sum(m) == 0:
                return
            p = 0
            while acc + p * (1 + delta) <= nu_max + TOL:
                nu = acc + p * (1 + delta)
                key = next((v for v in found if abs(v - nu) <= TOL), nu)
                found.setdefault(key, []).append(Provenance(tuple(m), p))
                p += 1
            return
        c = 0
        while acc + c * mus[j] <= nu_max + TOL:
            rec(j + 1, m + [c], acc + c * mus[j])
            c += 1

    rec(0, [], 0.0)
    entries = []
    for nu in sorted(found):
        provs = sorted(found[nu], key=lambda pv: (pv.p, sum(pv.m), pv.m))
        entries.append(LatticeEntry(nu, tuple(provs)))
    return ExponentLattice(rhos, float(delta), float(nu_max), entries)


def brute_force_exponents(rhos, delta: float, nu_max: float, m_max: int = 12, p_max: int = 6) -> list[float]:
    """Independent enumeration over a fixed box of usage counts (test oracle)."""
    mus = term_exponents(rhos, delta)
    vals = set()
    for m in product(range(m_max + 1), repeat=len(mus)):
        if sum(m) == 0:
            continue
        for p in range(p_max + 1):
            nu = sum(a * b for a, b in zip(m, mus)) + p * (1 + delta)
            if nu <= nu_max + TOL:
                vals.add(round(nu, 9))
    return sorted(vals)
