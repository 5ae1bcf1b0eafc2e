"""From samples F(h) back to the homogeneous layers of the potential."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .config import ExperimentConfig
from .forward import ScatteringDataset, overlap, pairing_coefficients
from .harmonics import n_harmonics
from .lattice import ExponentLattice, generate_lattice
from .potential import AngularProfile, HomogeneousTerm, PotentialExpansion
from .symbols import SymbolExpansion
from .xray import Ray, assemble_xray_operator, xray_rows


# --- power fits ----------------------------------------------------------------


@dataclass
class CoefficientFit:
    nus: np.ndarray
    coeffs: np.ndarray  # complex, (K,)
    stderr: np.ndarray
    residual: float
    condition: float
    method: str

    @property
    def K(self) -> int:
        return len(self.coeffs)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "nu": self.nus.tolist(),
            "re": self.coeffs.real.tolist(),
            "im": self.coeffs.imag.tolist(),
            "stderr": self.stderr.tolist(),
            "residual": self.residual,
            "condition": self.condition,
        }


def _as_arrays(samples):
    if isinstance(samples, tuple) and len(samples) == 2:
        h, v = samples
    else:
        h = [s.h for s in samples]
        v = [s.value for s in samples]
    return np.asarray(h, dtype=float), np.asarray(v, dtype=complex)


def _scaled_lstsq(A, b, ridge: float = 0.0):
    """Least squares with unit-norm columns; returns (x, column scales, condition, singular values)."""
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    As = A / scale
    U, s, Vt = np.linalg.svd(As, full_matrices=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    filt = s / (s * s + ridge) if ridge > 0 else np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    x = Vt.T @ (filt[:, None] * (U.conj().T @ b.reshape(len(b), -1)))
    return x.reshape((A.shape[1],) + b.shape[1:]) / scale.reshape((-1,) + (1,) * (b.ndim - 1)), scale, cond, s, Vt


def fit_powers(samples, lattice: ExponentLattice, K: int, method: str = "joint", ridge: float = 0.0, max_condition: float = 1e14) -> CoefficientFit:
    """Fit F(h) = sum_{k <= K} c_k h**nu_k.

    ``joint``: least squares on the design [h**nu_k] (``ridge`` > 0 adds a
    Tikhonov term on the column-scaled problem).  ``peeling``: estimate c_1 from
    the smallest-h half, subtract, and repeat with the next exponent.
    """
    h, v = _as_arrays(samples)
    if K < 1 or K > len(lattice):
        raise ValueError(f"K must lie in [1, {len(lattice)}]")
    if len(h) < 2 * K:
        raise ValueError(f"insufficient samples: {len(h)} < 2K = {2 * K}")
    if len(np.unique(h)) != len(h):
        raise ValueError("h values must be distinct")
    nus = np.asarray(lattice.nus[:K])
    A = h[:, None] ** nus[None, :]
    if method in ("joint", "joint-ridge"):
        if method == "joint-ridge" and ridge <= 0:
            ridge = 1e-12
        c, scale, cond, s, Vt = _scaled_lstsq(A, v, ridge)
        if cond > max_condition and ridge == 0:
            raise ValueError(f"design matrix rank deficient (condition number {cond:.3g})")
        res = v - A @ c
        dof = max(len(h) - K, 1)
        sigma2 = float(np.sum(np.abs(res) ** 2)) / dof
        cov = (Vt.T / s**2) @ Vt
        stderr = np.sqrt(sigma2 * np.diag(cov)) / scale
        method = "joint-ridge" if ridge > 0 else "joint"
    elif method == "peeling":
        if np.log10(h.max() / h.min()) < 2 - 1e-9:
            raise ValueError("peeling needs h values spanning at least two decades")
        order = np.argsort(h)
        h, v, A = h[order], v[order], A[order]
        c = np.zeros(K, dtype=complex)
        stderr = np.zeros(K)
        cond = 1.0
        r = v.copy()
        for k in range(K):
            nb = max(2 * (K - k), len(h) // 2)
            hb, rb = h[:nb], r[:nb]
            B = hb[:, None] ** (nus[k:] - nus[k])[None, :]
            x, scale, ck, s, Vt = _scaled_lstsq(B, rb / hb ** nus[k])
            if ck > max_condition:
                raise ValueError(f"peeling block rank deficient (condition number {ck:.3g})")
            cond = max(cond, ck)
            c[k] = x[0]
            res = rb / hb ** nus[k] - B @ x
            dof = max(nb - (K - k), 1)
            cov = (Vt.T / s**2) @ Vt
            stderr[k] = sqrt(float(np.sum(np.abs(res) ** 2)) / dof * cov[0, 0]) / scale[0]
            r = r - c[k] * h ** nus[k]
        res = v - A @ c
    else:
        raise ValueError(f"unknown fit method {method!r}")
    return CoefficientFit(nus, np.asarray(c), np.asarray(stderr), float(np.linalg.norm(res)), float(cond), method)


# --- layer recovery -------------------------------------------------------------


def tikhonov(M: np.ndarray, b: np.ndarray, ridge: float | None = None, rel_ridge: float = 1e-8):
    """argmin |Mx - b|^2 + ridge |x|^2; default ridge = rel_ridge * sigma_max^2."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if ridge is None:
        ridge = rel_ridge * s[0] ** 2
    x = Vt.T @ (s / (s * s + ridge) * (U.T @ b))
    return x, float(ridge), s


def lcurve(M: np.ndarray, b: np.ndarray, ridges) -> list[dict]:
    """Residual and solution norms along a ridge scan."""
    out = []
    for r in ridges:
        x, _, _ = tikhonov(M, b, r)
        out.append({"ridge": float(r), "residual": float(np.linalg.norm(M @ x - b)), "norm": float(np.linalg.norm(x))})
    return out


@dataclass
class LayerDiagnostics:
    j: int
    k: int
    nu: float
    rank: int
    condition: float
    ridge: float
    residual: float
    correction: float  # max |B_j| subtracted
    collisions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "layer": self.j,
            "k": self.k,
            "nu": self.nu,
            "rank": self.rank,
            "condition": self.condition,
            "ridge": self.ridge,
            "residual": self.residual,
            "max_correction": self.correction,
            "collisions": [pv.to_dict() for pv in self.collisions],
        }


def _masked(recovered: PotentialExpansion, rhos, j: int) -> PotentialExpansion:
    """Layers < j from ``recovered``, zero profiles for the rest, all degrees kept."""
    terms = []
    for i, rho in enumerate(rhos):
        ang = recovered.terms[i].angular if i < j - 1 else AngularProfile.zero()
        terms.append(HomogeneousTerm(rho, ang))
    return PotentialExpansion(tuple(terms), recovered.core_radius)


def predicted_lower_order(j: int, recovered: PotentialExpansion, lattice: ExponentLattice, cfg: ExperimentConfig, pairs) -> np.ndarray:
    """B_j contribution to c_{k_j} from layers 1..j-1 of ``recovered``."""
    k = lattice.layer_index(j)
    p = _masked(recovered, lattice.rhos, j)
    if all(t.angular.is_zero() for t in p.terms):
        return np.zeros(len(pairs), dtype=complex)
    exp = SymbolExpansion(p, lattice, cfg.lam, K=k)
    return pairing_coefficients(exp, pairs, k, n_pair=cfg.quad.n_pair, n_cheb=cfg.quad.n_cheb, chunk=cfg.quad.line_chunk)[:, k - 1]


def recover_layer(
    j: int,
    fits: np.ndarray,
    recovered_so_far: PotentialExpansion,
    lattice: ExponentLattice,
    cfg: ExperimentConfig,
    pairs,
    L: int = 4,
    ridge: float | None = None,
    footprint: bool = False,
) -> tuple[AngularProfile, LayerDiagnostics]:
    """Angular profile of layer j from fitted coefficients ``fits`` (n_pairs, K).

    X-ray samples are (c_{k_j} - B_j) / ((i / 2 sqrt(lam)) int Phi Psi), read as
    point values at the receiver centre (``footprint=False``) or as the
    bump-weighted average over the receiver footprint (``footprint=True``).
    """
    fits = np.asarray(fits)
    k = lattice.layer_index(j)
    if fits.shape[1] < k:
        raise ValueError(f"fits stop at order {fits.shape[1]} but layer {j} needs k = {k}")
    if len(recovered_so_far.terms) < j - 1:
        raise ValueError(f"layers 1..{j - 1} must be recovered before layer {j}")
    B = predicted_lower_order(j, recovered_so_far, lattice, cfg, pairs)
    w = np.array([overlap(s, r, cfg.quad.n_pair) for s, r in pairs])
    samples = ((fits[:, k - 1] - B) / (1j / (2.0 * sqrt(cfg.lam)) * w)).real
    rho = lattice.rhos[j - 1]
    if footprint:
        M = footprint_operator(rho, pairs, L, cfg.quad.n_pair)
    else:
        rays = [Ray.make(r.omega, r.center) for _, r in pairs]
        M = assemble_xray_operator(rho, rays, L).matrix
    if len(samples) < n_harmonics(L):
        raise ValueError(f"under-determined: {len(samples)} rays for {n_harmonics(L)} coefficients")
    coef, lam_r, s = tikhonov(M, samples, ridge)
    rank = int(np.sum(s > 1e-10 * s[0]))
    if rank < n_harmonics(L):
        raise ValueError(f"under-determined: ray set has rank {rank} < {n_harmonics(L)} coefficients")
    diag = LayerDiagnostics(
        j, k, lattice.nu(k), rank, float(s[0] / s[-1]), lam_r, float(np.linalg.norm(M @ coef - samples)),
        float(np.max(np.abs(B))) if len(B) else 0.0, lattice.collisions(j),
    )
    return AngularProfile.harmonics(coef), diag


def footprint_operator(rho: float, pairs, L: int, n_pair: int = 16) -> np.ndarray:
    """Rows: X-ray of each harmonic averaged with weight Phi Psi over the pairing footprint."""
    from .forward import pairing_grid

    rows = []
    for s, r in pairs:
        g = pairing_grid(s, r, n_pair)
        pts = g.points
        wt = np.sum(g.w * s(pts) * r(pts), axis=1)
        keep = wt > 0
        M = xray_rows(rho, g.y[keep], np.broadcast_to(g.omega, g.y[keep].shape), L)
        rows.append(wt[keep] @ M / wt.sum())
    return np.array(rows)


# --- full reconstruction ------------------------------------------------------


def profile_error(recovered: AngularProfile, truth: AngularProfile) -> float:
    """Relative L2(sphere) error, exact through orthonormal harmonic coefficients."""
    L = max(recovered.degree, truth.degree)
    a, b = recovered.harmonic_coeffs(L), truth.harmonic_coeffs(L)
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


@dataclass
class ReconstructionResult:
    potential: PotentialExpansion
    fits: np.ndarray  # (n_pairs, K) fitted coefficients
    layers: list  # LayerDiagnostics
    errors: list | None = None  # relative L2(sphere) error per layer
    method: str = "joint"

    def to_dict(self) -> dict:
        d = {
            "potential": self.potential.to_dict(),
            "method": self.method,
            "layers": [l.to_dict() for l in self.layers],
        }
        if self.errors is not None:
            d["errors"] = self.errors
        return d


def lattice_for(rhos, delta: float, K: int) -> ExponentLattice:
    rhos = list(rhos)
    mu1 = delta * (rhos[0] - 1) - 1
    nu_max = mu1 + 2 * (1 + delta)
    lat = generate_lattice(rhos, delta, nu_max)
    while len(lat) < K:
        nu_max += 1 + delta
        lat = generate_lattice(rhos, delta, nu_max)
    return lat


def reconstruct(
    dataset: ScatteringDataset,
    cfg: ExperimentConfig | None = None,
    degrees=None,
    L: int = 4,
    method: str = "joint",
    ridge: float | None = None,
    ground_truth: PotentialExpansion | None = None,
    J: int | None = None,
    footprint: bool = False,
) -> ReconstructionResult:
    if not len(dataset):
        raise ValueError("empty dataset")
    cfg = cfg or dataset.config
    degrees = tuple(degrees or dataset.rhos)
    cfg.check_delta(degrees[0])
    K = dataset.K
    lattice = lattice_for(degrees, cfg.delta, K)
    J = len(degrees) if J is None else J
    fits = np.array([fit_powers((s.h, s.values), lattice, K, method).coeffs for s in dataset.series])
    pairs = [(s.source, s.receiver) for s in dataset.series]
    recovered = PotentialExpansion((), 0.5)
    layers = []
    for j in range(1, J + 1):
        prof, diag = recover_layer(j, fits, recovered, lattice, cfg, pairs, L, ridge, footprint)
        recovered = PotentialExpansion(recovered.terms + (HomogeneousTerm(degrees[j - 1], prof),), recovered.core_radius)
        layers.append(diag)
    errors = None
    if ground_truth is not None:
        errors = [profile_error(recovered.terms[i].angular, ground_truth.terms[i].angular) for i in range(J)]
    return ReconstructionResult(recovered, fits, layers, errors, method)


# --- decay diagnostic ----------------------------------------------------------


@dataclass
class DecayReport:
    nus: list
    slope: float | None  # None when the difference sits at the numerical floor
    slopes: list  # per series
    verdict: float
    passed: list  # per order: slope >= nu_m - threshold
    threshold: float = 0.05
    at_floor: bool = False

    def to_dict(self) -> dict:
        return {
            "nu": self.nus,
            "slope": self.slope,
            "series_slopes": self.slopes,
            "verdict": self.verdict,
            "passed": self.passed,
            "threshold": self.threshold,
            "at_floor": self.at_floor,
        }


def _series(x):
    if isinstance(x, ScatteringDataset):
        return [(s.receiver.id, s.source.id, s.h, s.values) for s in x.series]
    return [(i, i, np.asarray(h), np.asarray(v)) for i, (h, v) in enumerate(x)]


def schwartz_diagnostic(samples1, samples2, lattice: ExponentLattice, K: int, threshold: float = 0.05, floor: float = 1e-13) -> DecayReport:
    """Slope of log|F1 - F2| against log h on the small-h half of the grid."""
    s1, s2 = _series(samples1), _series(samples2)
    if len(s1) != len(s2) or not s1:
        raise ValueError("sample sets must have matching, non-empty indexing")
    nus = lattice.nus[:K]
    slopes, at_floor = [], True
    for (r1, q1, h1, v1), (r2, q2, h2, v2) in zip(s1, s2):
        if r1 != r2 or q1 != q2 or h1.shape != h2.shape or np.any(h1 != h2):
            raise ValueError("sample sets are indexed differently")
        order = np.argsort(h1)
        h, d = h1[order], np.abs(v1 - v2)[order]
        scale = max(np.max(np.abs(v1)), np.max(np.abs(v2)), 1e-300)
        half = slice(0, max(2, len(h) // 2))
        if np.all(d[half] <= floor * scale):
            slopes.append(None)
            continue
        at_floor = False
        dd = np.maximum(d[half], 1e-300)
        slopes.append(float(np.polyfit(np.log(h[half]), np.log(dd), 1)[0]))
    if at_floor:
        return DecayReport(nus, None, slopes, nus[-1], [True] * K, threshold, True)
    slope = min(s for s in slopes if s is not None)
    passed = [slope >= nu - threshold for nu in nus]
    ok = [nu for nu, p in zip(nus, passed) if p]
    return DecayReport(nus, slope, slopes, ok[-1] if ok else 0.0, passed, threshold, False)
