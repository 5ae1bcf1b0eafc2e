"""Line integrals of the potential and the discretised X-ray operator."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_jacobi

from .harmonics import lm_pairs, n_harmonics, real_sph_harm, sphere_grid
from .potential import PotentialExpansion


@dataclass(frozen=True)
class Ray:
    """Line ``{y + t*omega}`` with ``y`` orthogonal to ``omega`` and ``|y| >= 1``."""

    omega: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "y", y)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ValueError("ray direction must be a unit vector")
        if abs(y @ w) > 1e-12:
            raise ValueError("ray offset must be orthogonal to its direction")
        if np.linalg.norm(y) < 1.0:
            raise ValueError(f"ray offset |y| = {np.linalg.norm(y):.3g} < 1 leaves X_omega")

    @classmethod
    def make(cls, omega, y) -> "Ray":
        """Normalise ``omega`` and project ``y`` onto its orthogonal hyperplane."""
        w = np.asarray(omega, dtype=float)
        w = w / np.linalg.norm(w)
        y = np.asarray(y, dtype=float)
        return cls(w, y - (y @ w) * w)

    @property
    def b(self) -> float:
        return float(np.linalg.norm(self.y))


def orthonormal_frame(omega) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis (e1, e2) of the plane orthogonal to ``omega``."""
    w = np.asarray(omega, dtype=float)
    a = np.eye(3)[int(np.argmin(np.abs(w)))]
    e1 = a - (a @ w) * w
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(w, e1)


def hemisphere_directions(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - i / n
    phi = pi * (1 + np.sqrt(5.0)) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], -1)


def default_rays(n_omega: int = 36, n_offsets: int = 6, radius: float = 2.0) -> list[Ray]:
    """Directions on a Fibonacci hemisphere, offsets on a circle in each orthogonal plane."""
    rays = []
    for i, w in enumerate(hemisphere_directions(n_omega)):
        e1, e2 = orthonormal_frame(w)
        for k in range(n_offsets):
            a = 2 * pi * (k + 0.5 * (i % 2)) / n_offsets
            rays.append(Ray.make(w, radius * (np.cos(a) * e1 + np.sin(a) * e2)))
    return rays


def read_rays_csv(path) -> list[Ray]:
    rays = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            rays.append(Ray.make([float(row[f"omega{i}"]) for i in range(3)], [float(row[f"y{i}"]) for i in range(3)]))
    return rays


def write_rays_csv(rays, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"omega{i}" for i in range(3)] + [f"y{i}" for i in range(3)])
        for r in rays:
            w.writerow([*map(repr, r.omega.tolist()), *map(repr, r.y.tolist())])


def _line_integral(p: PotentialExpansion, x0, omega, t0: float, tol: float, A: float) -> float:
    """int_{t0}^inf V(x0 + t omega) dt with the prescribed truncation and analytic tail."""
    if not p.terms:
        return 0.0
    rho1 = p.terms[0].rho
    T = max(A, tol ** (-1.0 / (rho1 - 1.0)))
    f = lambda t: float(p.tail(x0 + t * omega))  # noqa: E731
    val = quad(f, t0, A, epsabs=tol / 4, epsrel=0.0, limit=200)[0]
    if T > A:
        g = lambda u: f(1.0 / u) / (u * u)  # noqa: E731
        val += quad(g, 1.0 / T, 1.0 / A, epsabs=tol / 4, epsrel=0.0, limit=200)[0]
    for term in p.terms:
        val += float(term.angular(omega)) * T ** (1.0 - term.rho) / (term.rho - 1.0)
    return val


def xray_full_line(p: PotentialExpansion, ray: Ray, tol: float = 1e-10) -> float:
    """int_{-inf}^{inf} V(y + t omega) dt."""
    A = 10.0 * ray.b
    return _line_integral(p, ray.y, ray.omega, 0.0, tol / 2, A) + _line_integral(p, ray.y, -ray.omega, 0.0, tol / 2, A)


def xray_half_line(p: PotentialExpansion, x, omega, tol: float = 1e-10) -> float:
    """int_0^inf V(x + t omega) dt for a half-line that stays outside the core."""
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    s = x @ omega
    dist = np.linalg.norm(x) if s >= 0 else np.linalg.norm(x - s * omega)
    if dist < p.core_radius:
        raise ValueError(f"half-line passes within {dist:.3g} < core_radius of the origin")
    A = 10.0 * max(np.linalg.norm(x), 1.0)
    return _line_integral(p, x, omega, 0.0, tol, A)


@dataclass
class XRayOperatorMatrix:
    rho: float
    rays: list
    L: int
    matrix: np.ndarray
    n_nodes: int
    sphere: tuple = ("gauss", 16)
    singular_values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.singular_values is None:
            self.singular_values = np.linalg.svd(self.matrix, compute_uv=False)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def condition(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    def rank(self, rtol: float = 1e-10) -> int:
        s = self.singular_values
        return int(np.sum(s > rtol * s[0])) if s.size else 0

    def apply(self, coeffs) -> np.ndarray:
        return self.matrix @ np.asarray(coeffs, dtype=float)

    def header(self) -> dict:
        return {
            "rows": int(self.matrix.shape[0]),
            "cols": int(self.matrix.shape[1]),
            "rho": self.rho,
            "L": self.L,
            "n": 3,
            "grid_id": f"gauss-jacobi-{self.n_nodes}/{self.sphere[0]}-{self.sphere[1]}",
            "condition": self.condition,
        }

    def save(self, path) -> None:
        path = str(path)
        rays = np.array([np.r_[r.omega, r.y] for r in self.rays])
        if path.endswith(".csv"):
            with open(path, "w", newline="") as fh:
                fh.write("# " + json.dumps(self.header()) + "\n")
                cols = ["omega0", "omega1", "omega2", "y0", "y1", "y2"] + [f"Y{l}_{m}" for l, m in lm_pairs(self.L)]
                fh.write(",".join(cols) + "\n")
                np.savetxt(fh, np.hstack([rays, self.matrix]), delimiter=",", fmt="%.17g")
        else:
            np.savez(path, matrix=self.matrix, rays=rays, header=json.dumps(self.header()))

    @classmethod
    def load(cls, path) -> "XRayOperatorMatrix":
        if str(path).endswith(".csv"):
            with open(path) as fh:
                head = json.loads(fh.readline()[1:])
                table = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
            ray_cols, matrix = table[:, :6], table[:, 6:]
        else:
            with np.load(path) as z:
                head = json.loads(str(z["header"]))
                ray_cols, matrix = z["rays"], z["matrix"]
        rays = [Ray.make(r[:3], r[3:]) for r in ray_cols]
        n_nodes = int(head["grid_id"].split("/")[0].rsplit("-", 1)[1])
        return cls(head["rho"], rays, head["L"], matrix, n_nodes)


def _reduced_nodes(rho: float, n_nodes: int):
    """Nodes/weights for int_{-pi/2}^{pi/2} cos(theta)**(rho-2) f(theta) dtheta."""
    v, w = roots_jacobi(n_nodes, rho - 2.0, rho - 2.0)
    theta = 0.5 * pi * v
    smooth = (np.cos(theta) / (1.0 - v * v)) ** (rho - 2.0)
    return theta, 0.5 * pi * w * smooth


def assemble_xray_operator(rho: float, rays, L: int, n: int = 3, n_nodes: int = 64) -> XRayOperatorMatrix:
    """Matrix of full-line X-rays of ``|x|**-rho * Y_lm(x/|x|)`` along ``rays``.

    Uses t = |y| tan(theta): value = |y|**(1-rho) * int cos**(rho-2) Y((y/|y|) cos + omega sin) dtheta.
    """
    if n != 3:
        raise ValueError("only n = 3 is supported")
    if L < 0:
        raise ValueError("L must be >= 0")
    rays = list(rays)
    y = np.array([r.y for r in rays]).reshape(-1, 3)
    w = np.array([r.omega for r in rays]).reshape(-1, 3)
    M = xray_rows(rho, y, w, L, n_nodes)
    return XRayOperatorMatrix(rho, rays, L, M, n_nodes)


def xray_rows(rho: float, y, omega, L: int, n_nodes: int = 64) -> np.ndarray:
    """Vectorised rows of the operator for offsets ``y`` (R, 3) and directions ``omega`` (R, 3)."""
    theta, w = _reduced_nodes(rho, n_nodes)
    y = np.asarray(y, dtype=float)
    b = np.linalg.norm(y, axis=-1)
    u = np.cos(theta)[None, :, None] * (y / b[:, None])[:, None, :] + np.sin(theta)[None, :, None] * np.asarray(omega)[:, None, :]
    return b[:, None] ** (1.0 - rho) * np.einsum("n,rnm->rm", w, real_sph_harm(L, u))


def profile_l2(profile, grid=("gauss", 16)) -> float:
    pts, w = sphere_grid(*grid)
    return float(np.sqrt(w @ profile(pts) ** 2))
