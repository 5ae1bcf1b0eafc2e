"""Test functions, the energy localisation check, and synthesis of F(h).

A test function at semiclassical parameter h is

    Phi_h(x) = exp(i sqrt(lam) x.w / h) * h**(3 delta / 2) * u(h**delta x),
    u = chi0(h**eps D) Phi,

kept as the envelope ``u`` on a reference grid plus the analytic carrier.
The physical frequency of the envelope mode ``eta`` is
``xi = sqrt(lam) w / h + h**delta eta``, which is all the localisation check needs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from math import sqrt
from pathlib import Path

import numpy as np
import sympy as sp

from .config import ExperimentConfig
from .lattice import ExponentLattice
from .potential import PotentialExpansion
from .smooth import chi0, plateau
from .symbols import SymbolExpansion, evaluate_on_lines
from .xray import Ray, orthonormal_frame

CACHE_ENV = "SEMISCAT_CACHE"


class NyquistError(ValueError):
    """Grid too coarse for the requested representation."""


# --- bumps -------------------------------------------------------------------


@lru_cache(maxsize=None)
def _bump_derivative(alpha: tuple):
    u = sp.symbols("u0 u1 u2")
    expr = sp.exp(-1 / (1 - u[0] ** 2 - u[1] ** 2 - u[2] ** 2))
    d = sp.diff(expr, *[s for s, n in zip(u, alpha) for _ in range(n)]) if sum(alpha) else expr
    return sp.lambdify(u, d, "numpy")


def bump(u, alpha=(0, 0, 0)) -> np.ndarray:
    """d^alpha of exp(-1 / (1 - |u|^2)) (zero for |u| >= 1)."""
    u = np.asarray(u, dtype=float)
    s = np.einsum("...i,...i->...", u, u)
    out = np.zeros(s.shape)
    inside = s < 1.0
    if np.any(inside):
        ui = u[inside]
        out[inside] = _bump_derivative(tuple(alpha))(ui[:, 0], ui[:, 1], ui[:, 2])
    return out


@dataclass(frozen=True)
class TestFunctionSpec:
    """Radial bump of radius ``radius`` centred at ``center``, used with direction ``omega``."""

    __test__ = False  # not a pytest class

    omega: tuple
    center: tuple
    radius: float = 0.5
    role: str = "receiver"
    id: str = ""

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        c = np.asarray(self.center, dtype=float)
        if w.shape != (3,) or c.shape != (3,):
            raise ValueError("omega and center must be 3-vectors")
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ValueError("omega must be a unit vector")
        if self.role not in ("source", "receiver"):
            raise ValueError("role must be 'source' or 'receiver'")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        yperp = c - (c @ w) * w
        if np.linalg.norm(yperp) < 1.0 + self.radius - 1e-12:
            raise ValueError("support leaves X_omega: need |y0| >= 1 + radius")
        object.__setattr__(self, "omega", tuple(map(float, w)))
        object.__setattr__(self, "center", tuple(map(float, c)))
        if not self.id:
            key = json.dumps([self.omega, self.center, self.radius]).encode()
            object.__setattr__(self, "id", hashlib.sha256(key).hexdigest()[:10])

    @classmethod
    def for_ray(cls, ray: Ray, radius: float = 0.5, role: str = "receiver") -> "TestFunctionSpec":
        return cls(tuple(ray.omega), tuple(ray.y), radius, role)

    def __call__(self, x, alpha=(0, 0, 0)) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (x - np.asarray(self.center)) / self.radius
        return bump(u, alpha) * self.radius ** (-sum(alpha))

    def to_dict(self) -> dict:
        return {"omega": list(self.omega), "center": list(self.center), "radius": self.radius, "role": self.role, "id": self.id}

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunctionSpec":
        return cls(tuple(d["omega"]), tuple(d["center"]), float(d.get("radius", 0.5)), d.get("role", "receiver"), d.get("id", ""))


# --- grid test functions -----------------------------------------------------


def energy_cutoff(cfg: ExperimentConfig, E) -> np.ndarray:
    """chi(E): 1 on [lam - w, lam + w], smooth shoulders of width w'."""
    E = np.asarray(E, dtype=float)
    if cfg.chi_halfwidth is None:
        return np.where(E > 0, 1.0, 0.0)
    w = cfg.chi_halfwidth
    return plateau(E, cfg.lam - w, cfg.lam + w, cfg.chi_shoulder)


@dataclass
class TestFunction:
    __test__ = False

    spec: TestFunctionSpec
    h: float
    lam: float
    delta: float
    epsilon: float
    axis: np.ndarray  # reference grid coordinates along each axis (offsets from the centre)
    envelope: np.ndarray  # u on the reference grid
    reference: np.ndarray = field(repr=False)  # Phi on the reference grid

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def carrier(self) -> np.ndarray:
        return sqrt(self.lam) * np.asarray(self.spec.omega) / self.h

    def frequencies(self) -> np.ndarray:
        """Reference frequencies eta along one axis (FFT order)."""
        return 2 * np.pi * np.fft.fftfreq(self.axis.size, self.spacing)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.envelope) ** 2) * self.spacing**3))

    def reference_norm(self) -> float:
        return float(np.sqrt(np.sum(self.reference**2) * self.spacing**3))

    def spectrum(self):
        """(xi, F[Phi_h](xi)) at the grid modes; xi has shape (N, N, N, 3)."""
        eta = self.frequencies()
        E = np.stack(np.meshgrid(eta, eta, eta, indexing="ij"), -1)
        x0 = np.asarray(self.spec.center) + self.axis[0]
        phase = np.exp(-1j * E @ x0)
        uhat = np.fft.fftn(self.envelope) * self.spacing**3 * phase
        xi = self.carrier + self.h**self.delta * E
        return xi, self.h ** (-1.5 * self.delta) * uhat

    def to_physical(self):
        """Samples on the physical grid x = X / h**delta; raises NyquistError if the carrier is unresolved."""
        hd = self.h**self.delta
        dphys = self.spacing / hd
        band = min(np.pi / self.spacing, 2.0 * self.h ** (-self.epsilon))
        need = np.max(np.abs(self.carrier)) + hd * band
        if need >= np.pi / dphys:
            raise NyquistError(
                f"physical grid spacing {dphys:.3g} cannot carry frequency {need:.3g} (h = {self.h:g}); "
                "use the envelope representation"
            )
        X = np.asarray(self.spec.center)[:, None] + self.axis[None, :]
        x = X / hd
        g = np.stack(np.meshgrid(*x, indexing="ij"), -1)
        vals = np.exp(1j * g @ self.carrier) * hd**1.5 * self.envelope
        return g, vals

    def direct_fourier(self, xi) -> np.ndarray:
        """F[Phi_h](xi) by direct summation over physical samples."""
        g, vals = self.to_physical()
        dx = (self.spacing / self.h**self.delta) ** 3
        xi = np.atleast_2d(xi)
        return np.array([np.sum(vals * np.exp(-1j * g @ q)) * dx for q in xi])


def build_test_function(spec: TestFunctionSpec, cfg: ExperimentConfig, h: float) -> TestFunction:
    if not 0 < h <= 1:
        raise ValueError("h must lie in (0, 1]")
    N, box = cfg.grid.npts, cfg.grid.box
    if box < 2 * spec.radius * 1.2:
        raise NyquistError("reference box too small for the bump support")
    axis = (np.arange(N) - N // 2) * (box / N)
    X = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1)
    phi = bump(X / spec.radius)
    eta = 2 * np.pi * np.fft.fftfreq(N, box / N)
    E2 = eta[:, None, None] ** 2 + eta[None, :, None] ** 2 + eta[None, None, :] ** 2
    mult = chi0(h**cfg.epsilon * np.sqrt(E2))
    u = np.fft.ifftn(mult * np.fft.fftn(phi))
    return TestFunction(spec, h, cfg.lam, cfg.delta, cfg.epsilon, axis, u, phi)


def factorized_spectrum(tf: TestFunction) -> np.ndarray:
    """h**(-3 delta/2) chi0(h**(eps-delta-1)|h xi - sqrt(lam) w|) F[Phi](h**(-delta-1)(h xi - sqrt(lam) w))."""
    xi, _ = tf.spectrum()
    h, d = tf.h, tf.delta
    s = h * xi - sqrt(tf.lam) * np.asarray(tf.spec.omega)
    x0 = np.asarray(tf.spec.center) + tf.axis[0]
    phi_hat = np.fft.fftn(tf.reference) * tf.spacing**3 * np.exp(-1j * (s * h ** (-d - 1)) @ x0)
    return h ** (-1.5 * d) * chi0(h ** (tf.epsilon - d - 1) * np.linalg.norm(s, axis=-1)) * phi_hat


@dataclass
class Lemma2Report:
    h: float
    holds: bool
    margin: float
    h0: float
    difference: float

    def to_dict(self) -> dict:
        return {"h": self.h, "holds": self.holds, "margin": self.margin, "h0": self.h0, "difference": self.difference}


def lemma2_margin(cfg: ExperimentConfig, h: float) -> float:
    """Energy distance from the support shell {|h xi - sqrt(lam) w| <= 2 h**(1+delta-eps)} to {chi != 1}."""
    if cfg.chi_halfwidth is None:
        return float("inf")
    s = 2.0 * h ** (1 + cfg.delta - cfg.epsilon)
    lam, w = cfg.lam, cfg.chi_halfwidth
    lo = max(sqrt(lam) - s, 0.0) ** 2
    return min((lam + w) - (sqrt(lam) + s) ** 2, lo - (lam - w))


def lemma2_threshold(cfg: ExperimentConfig) -> float:
    """Largest h with non-negative margin."""
    if cfg.chi_halfwidth is None:
        return 1.0
    lam, w = cfg.lam, cfg.chi_halfwidth
    s0 = min(sqrt(lam + w) - sqrt(lam), sqrt(lam) - sqrt(lam - w))
    return min(1.0, (s0 / 2.0) ** (1.0 / (1 + cfg.delta - cfg.epsilon)))


def verify_lemma2(spec: TestFunctionSpec, cfg: ExperimentConfig, h: float, tf: TestFunction | None = None) -> Lemma2Report:
    """Apply chi(|h xi|^2) to Phi_h and compare with Phi_h on the grid."""
    tf = tf or build_test_function(spec, cfg, h)
    eta = tf.frequencies()
    E = np.stack(np.meshgrid(eta, eta, eta, indexing="ij"), -1)
    xi = tf.carrier + h**cfg.delta * E
    mult = energy_cutoff(cfg, np.sum((h * xi) ** 2, axis=-1))
    filtered = np.fft.ifftn(mult * np.fft.fftn(tf.envelope))
    diff = float(np.sqrt(np.sum(np.abs(filtered - tf.envelope) ** 2) * tf.spacing**3))
    margin = lemma2_margin(cfg, h)
    return Lemma2Report(h, bool(diff <= 1e-12), margin, lemma2_threshold(cfg), diff)


# --- pairings ------------------------------------------------------------------


def default_h_grid(n: int = 24, lo: float = 1e-3, hi: float = 1e-1) -> np.ndarray:
    return np.geomspace(lo, hi, n)


@dataclass
class PairingGrid:
    """Gauss-Legendre box rule over the intersection of two bump supports, organised in lines along omega."""

    y: np.ndarray  # (L, 3) line offsets
    t: np.ndarray  # (L, m) positions along omega
    w: np.ndarray  # (L, m) weights
    omega: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.y[:, None, :] + self.t[..., None] * self.omega


def pairing_grid(source: TestFunctionSpec, receiver: TestFunctionSpec, n: int = 16) -> PairingGrid:
    w = np.asarray(receiver.omega)
    e1, e2 = orthonormal_frame(w)
    frame = np.stack([e1, e2, w])
    cs, cr = frame @ np.asarray(source.center), frame @ np.asarray(receiver.center)
    lo = np.maximum(cs - source.radius, cr - receiver.radius)
    hi = np.minimum(cs + source.radius, cr + receiver.radius)
    if np.any(hi <= lo):
        return PairingGrid(np.zeros((0, 3)), np.zeros((0, n)), np.zeros((0, n)), w)
    g, gw = np.polynomial.legendre.leggauss(n)
    ax = [0.5 * (hi[i] + lo[i]) + 0.5 * (hi[i] - lo[i]) * g for i in range(3)]
    aw = [0.5 * (hi[i] - lo[i]) * gw for i in range(3)]
    A, B = np.meshgrid(ax[0], ax[1], indexing="ij")
    WA = np.outer(aw[0], aw[1])
    # drop lines that miss either support
    keep = np.ones(A.shape, bool)
    for c, r in ((cs, source.radius), (cr, receiver.radius)):
        keep &= (A - c[0]) ** 2 + (B - c[1]) ** 2 < r * r
    y = A[keep][:, None] * e1 + B[keep][:, None] * e2
    t = np.broadcast_to(ax[2], (len(y), n)).copy()
    weights = WA[keep][:, None] * aw[2][None, :]
    return PairingGrid(y, t, weights, w)


def overlap(source: TestFunctionSpec, receiver: TestFunctionSpec, n: int = 16) -> float:
    """int Phi Psi dx with the pairing rule."""
    g = pairing_grid(source, receiver, n)
    if not len(g.y):
        return 0.0
    pts = g.points
    return float(np.sum(g.w * source(pts) * receiver(pts)))


def _cache_file(key: dict) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]
    return Path(root) / f"pairings-{digest}.npy"


def pairing_coefficients(
    expansion: SymbolExpansion,
    pairs,
    K: int | None = None,
    route: str = "direct",
    n_pair: int = 16,
    n_cheb: int = 48,
    chunk: int = 64,
) -> np.ndarray:
    """c_k = <Phi, A_k Psi> for every (source, receiver) pair; shape (len(pairs), K).

    ``route="direct"`` pairs op(d_a^-) Phi with op(d_b^+) Psi; ``route="operator"``
    applies the normal-form operators A_k to Psi.  The two agree to quadrature accuracy.
    """
    K = expansion.K if K is None else K
    if K > expansion.K:
        raise ValueError(f"order K = {K} exceeds solved symbols ({expansion.K})")
    if route not in ("direct", "operator"):
        raise ValueError("route must be 'direct' or 'operator'")
    for s, r in pairs:
        if s.omega != r.omega:
            raise ValueError("source and receiver must share omega")
    key = {
        "potential": expansion.p.digest(),
        "rhos": list(expansion.lattice.rhos),
        "delta": expansion.lattice.delta,
        "lam": expansion.lam,
        "K": K,
        "route": route,
        "quad": [n_pair, n_cheb],
        "pairs": [[s.to_dict(), r.to_dict()] for s, r in pairs],
    }
    path = _cache_file(key)
    if path is not None and path.exists():
        return np.load(path)

    grids = [pairing_grid(s, r, n_pair) for s, r in pairs]
    alg = expansion.algebra
    out = np.zeros((len(pairs), K), dtype=complex)
    if route == "direct":
        syms = {(a, s): expansion.d(a, s) for a in range(1, K + 1) for s in (1, -1)}
        nodes = [a for sym in syms.values() for a in sym.coeffs.values()]
        orders = {beta for sym in syms.values() for beta in sym.coeffs} | {(0, 0, 0)}
    else:
        ops = expansion.operators(K)
        nodes = [a for op in ops for a in op.terms.values()]
        orders = {al for op in ops for al in op.terms} | {(0, 0, 0)}

    sizes = [len(g.y) for g in grids]
    if sum(sizes):
        y = np.concatenate([g.y for g in grids])
        t = np.concatenate([g.t for g in grids])
        om = np.concatenate([np.broadcast_to(g.omega, g.y.shape) for g in grids])
        vals = evaluate_on_lines(alg, nodes, y, om, t, n_cheb, chunk)
    start = 0
    for i, ((src, rec), g) in enumerate(zip(pairs, grids)):
        n = sizes[i]
        if not n:
            continue
        sl = slice(start, start + n)
        start += n
        pts = g.points
        dphi = {b: src(pts, b) for b in orders}
        dpsi = {b: rec(pts, b) for b in orders}
        if route == "direct":
            G = {(0, -1): dphi[(0, 0, 0)].astype(complex), (0, 1): dpsi[(0, 0, 0)].astype(complex)}
            for (a, s), sym in syms.items():
                base = dpsi if s > 0 else dphi
                acc = np.zeros(pts.shape[:2], dtype=complex)
                for beta, node in sym.coeffs.items():
                    acc += vals[node][sl] * (-1j) ** sum(beta) * base[beta]
                G[(a, s)] = acc
            for k in range(1, K + 1):
                tot = 0j
                for a, b in expansion.lattice.pairs(k):
                    tot += np.sum(g.w * np.conj(G[(a, -1)]) * G[(b, 1)])
                out[i, k - 1] = tot
        else:
            for k, op in enumerate(ops, 1):
                acc = np.zeros(pts.shape[:2], dtype=complex)
                for alpha, node in op.terms.items():
                    acc += vals[node][sl] * dpsi[alpha]
                out[i, k - 1] = np.sum(g.w * dphi[(0, 0, 0)] * acc)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, out)
    return out


# --- samples and datasets ------------------------------------------------------


@dataclass
class ScatteringSample:
    h: float
    value: complex
    omega: tuple
    source_id: str
    receiver_id: str
    K: int

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise ValueError("h must lie in (0, 1]")


def evaluate_series(coeffs, nus, h_grid) -> np.ndarray:
    """sum_k h**nu_k c_k; ``coeffs`` (..., K)."""
    H = np.asarray(h_grid, dtype=float)[:, None] ** np.asarray(nus)[None, :]
    return np.asarray(coeffs) @ H.T


def synthesize_F(
    cfg: ExperimentConfig,
    source: TestFunctionSpec,
    receiver: TestFunctionSpec,
    p: PotentialExpansion,
    lattice: ExponentLattice,
    operators: SymbolExpansion | None,
    h_grid,
    K: int | None = None,
) -> list[ScatteringSample]:
    """Samples of sum_{k <= K} h**nu_k <Phi, A_k Psi>."""
    if source.omega != receiver.omega:
        raise ValueError("source and receiver must share omega")
    exp = operators or SymbolExpansion(p, lattice, cfg.lam, K)
    K = exp.K if K is None else K
    c = pairing_coefficients(exp, [(source, receiver)], K, n_pair=cfg.quad.n_pair, n_cheb=cfg.quad.n_cheb)[0]
    vals = evaluate_series(c, lattice.nus[:K], h_grid)
    return [ScatteringSample(float(h), complex(v), receiver.omega, source.id, receiver.id, K) for h, v in zip(h_grid, vals)]


@dataclass
class SampleSeries:
    source: TestFunctionSpec
    receiver: TestFunctionSpec
    h: np.ndarray
    values: np.ndarray  # complex

    def samples(self, K: int) -> list[ScatteringSample]:
        return [
            ScatteringSample(float(h), complex(v), self.receiver.omega, self.source.id, self.receiver.id, K)
            for h, v in zip(self.h, self.values)
        ]


@dataclass
class ScatteringDataset:
    config: ExperimentConfig
    rhos: tuple
    K: int
    series: list = field(default_factory=list)
    coefficients: np.ndarray | None = None  # synthesis coefficients c_k (ground truth, optional)
    potential: dict | None = None  # ground-truth potential, optional
    manifest: dict | None = None

    def __len__(self) -> int:
        return len(self.series)

    def to_dict(self) -> dict:
        d = {
            "schema": 1,
            "config": self.config.to_dict(),
            "rhos": list(self.rhos),
            "K": self.K,
            "series": [
                {
                    "source": s.source.to_dict(),
                    "receiver": s.receiver.to_dict(),
                    "h": s.h.tolist(),
                    "re": s.values.real.tolist(),
                    "im": s.values.imag.tolist(),
                }
                for s in self.series
            ],
        }
        if self.coefficients is not None:
            d["coefficients"] = {"re": self.coefficients.real.tolist(), "im": self.coefficients.imag.tolist()}
        if self.potential is not None:
            d["potential"] = self.potential
        if self.manifest is not None:
            d["manifest"] = self.manifest
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringDataset":
        series = [
            SampleSeries(
                TestFunctionSpec.from_dict(s["source"]),
                TestFunctionSpec.from_dict(s["receiver"]),
                np.asarray(s["h"], dtype=float),
                np.asarray(s["re"]) + 1j * np.asarray(s["im"]),
            )
            for s in d["series"]
        ]
        coeffs = d.get("coefficients")
        if coeffs is not None:
            coeffs = np.asarray(coeffs["re"]) + 1j * np.asarray(coeffs["im"])
        return cls(
            ExperimentConfig.from_dict(d["config"]), tuple(d["rhos"]), int(d["K"]), series, coeffs, d.get("potential"), d.get("manifest")
        )

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".csv":
            self.write_csv(path)
        else:
            path.write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "ScatteringDataset":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            if self.manifest is not None:
                fh.write(f"# manifest: {json.dumps(self.manifest, sort_keys=True)}\n")
            w = csv.writer(fh)
            w.writerow(["h", "re", "im", "omega0", "omega1", "omega2", "source_id", "receiver_id", "K"])
            for s in self.series:
                for h, v in zip(s.h, s.values):
                    w.writerow([repr(float(h)), repr(float(v.real)), repr(float(v.imag)), *s.receiver.omega, s.source.id, s.receiver.id, self.K])


def _pairing_job(args):
    p, lattice, cfg, K, pairs = args
    exp = SymbolExpansion(p, lattice, cfg.lam, K)
    return pairing_coefficients(exp, pairs, K, n_pair=cfg.quad.n_pair, n_cheb=cfg.quad.n_cheb, chunk=cfg.quad.line_chunk)


def ray_specs(rays, radius: float = 0.5) -> list[tuple[TestFunctionSpec, TestFunctionSpec]]:
    """Coincident source/receiver bumps centred on each ray offset."""
    return [(TestFunctionSpec.for_ray(r, radius, "source"), TestFunctionSpec.for_ray(r, radius, "receiver")) for r in rays]


def synthesize_dataset(
    cfg: ExperimentConfig,
    p: PotentialExpansion,
    lattice: ExponentLattice,
    pairs,
    h_grid=None,
    K: int | None = None,
    noise: float = 0.0,
    seed: int = 0,
    expansion: SymbolExpansion | None = None,
    workers: int = 1,
) -> ScatteringDataset:
    """Synthesize F(h) for many (source, receiver) pairs; optional additive complex Gaussian noise.

    With ``workers > 1`` the pairs are split into contiguous blocks evaluated in
    separate processes; each pair's coefficients do not depend on the split.
    """
    h_grid = default_h_grid() if h_grid is None else np.asarray(h_grid, dtype=float)
    exp = expansion or SymbolExpansion(p, lattice, cfg.lam, K)
    K = exp.K if K is None else K
    if workers > 1 and len(pairs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        blocks = [list(b) for b in np.array_split(np.arange(len(pairs)), workers) if len(b)]
        jobs = [(p, lattice, cfg, K, [pairs[i] for i in b]) for b in blocks]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            c = np.concatenate(list(ex.map(_pairing_job, jobs)))
    else:
        c = pairing_coefficients(exp, pairs, K, n_pair=cfg.quad.n_pair, n_cheb=cfg.quad.n_cheb, chunk=cfg.quad.line_chunk)
    vals = evaluate_series(c, lattice.nus[:K], h_grid)
    if noise > 0:
        rng = np.random.default_rng(seed)
        vals = vals + noise * (rng.standard_normal(vals.shape) + 1j * rng.standard_normal(vals.shape))
    series = [SampleSeries(s, r, h_grid.copy(), v) for (s, r), v in zip(pairs, vals)]
    return ScatteringDataset(cfg, tuple(lattice.rhos), K, series, c, p.to_dict())
