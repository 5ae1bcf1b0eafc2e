"""Classical Hamilton flow z' = 2 zeta, zeta' = -grad V(z), and an empirical
non-trapping certifier."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .potential import PotentialExpansion


@dataclass(frozen=True)
class PhasePoint:
    z: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        object.__setattr__(self, "zeta", np.asarray(self.zeta, dtype=float))
        if not (np.all(np.isfinite(self.z)) and np.all(np.isfinite(self.zeta))):
            raise ValueError("phase point must be finite")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    z: np.ndarray  # (T, n)
    zeta: np.ndarray  # (T, n)
    energy: np.ndarray
    energy_drift: float
    ok: bool = True
    message: str = ""

    def write_csv(self, path) -> None:
        n = self.z.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"z{i}" for i in range(n)] + [f"zeta{i}" for i in range(n)] + ["E"])
            for t, z, q, e in zip(self.times, self.z, self.zeta, self.energy):
                w.writerow([repr(float(t)), *map(repr, z.tolist()), *map(repr, q.tolist()), repr(float(e))])


def _rhs(p: PotentialExpansion):
    def f(t, y):
        n = y.size // 2
        g = p.grad_point(y[:n]) if n == 3 else p.grad(y[:n])
        return np.array([2.0 * y[3], 2.0 * y[4], 2.0 * y[5], -g[0], -g[1], -g[2]]) if n == 3 else np.concatenate(
            [2.0 * y[n:], -g]
        )

    return f


def hamiltonian(p: PotentialExpansion, z, zeta) -> np.ndarray:
    zeta = np.asarray(zeta)
    return np.einsum("...i,...i->...", zeta, zeta) + p.eval(z)


def integrate_flow(p: PotentialExpansion, start: PhasePoint, t_end: float, tol: float = 1e-10) -> TrajectoryRecord:
    """Integrate the Hamilton equations from ``start`` to ``t_end`` (may be negative).

    DOP853 runs with rtol = atol = tol / 10; every accepted step is recorded.
    A failed integration (step size underflow) returns the truncated trajectory
    with ``ok = False`` and the solver's diagnostic in ``message``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = start.z.size
    y0 = np.concatenate([start.z, start.zeta])
    if t_end == 0:
        times, ys = np.array([0.0]), y0[:, None]
        ok, msg = True, "empty interval"
    else:
        sol = solve_ivp(_rhs(p), (0.0, float(t_end)), y0, method="DOP853", rtol=tol / 10, atol=tol / 10)
        times, ys, ok, msg = sol.t, sol.y, sol.status == 0, sol.message
    z, zeta = ys[:n].T, ys[n:].T
    energy = hamiltonian(p, z, zeta)
    return TrajectoryRecord(times, z, zeta, energy, float(np.max(np.abs(energy - energy[0]))), ok, msg)


@dataclass
class EscapeSample:
    start: PhasePoint
    escaped: bool
    time: float  # escape time (max of both directions) or the censoring time
    escaped_forward: bool
    escaped_backward: bool
    max_radius: float

    def to_dict(self) -> dict:
        return {
            "x": self.start.z.tolist(),
            "xi": self.start.zeta.tolist(),
            "escaped": self.escaped,
            "time": self.time,
            "escaped_forward": self.escaped_forward,
            "escaped_backward": self.escaped_backward,
            "max_radius": self.max_radius,
        }


@dataclass
class NonTrappingReport:
    lam: float
    R: float
    T_max: float
    seed: int
    samples: list = field(default_factory=list)
    rejected: int = 0

    @property
    def certified(self) -> bool:
        return all(s.escaped for s in self.samples)

    @property
    def T_estimate(self) -> float:
        esc = [s.time for s in self.samples if s.escaped]
        return max(esc) if esc else float("nan")

    @property
    def censored(self) -> list:
        return [s for s in self.samples if not s.escaped]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "R": self.R,
            "T_max": self.T_max,
            "seed": self.seed,
            "certified": self.certified,
            "empirical": True,
            "T_estimate": None if np.isnan(self.T_estimate) else self.T_estimate,
            "n_censored": len(self.censored),
            "rejected": self.rejected,
            "samples": [s.to_dict() for s in self.samples],
        }


def _escape_time(p: PotentialExpansion, x, xi, R: float, T_max: float, tol: float):
    def leave(t, y):
        n = y.size // 2
        return y[:n] @ y[:n] - R * R

    leave.terminal = True
    leave.direction = 1.0  # crossing |z| = R outward, so z . zeta > 0 there
    sol = solve_ivp(
        _rhs(p), (0.0, T_max), np.concatenate([x, xi]), method="DOP853", rtol=tol, atol=tol, events=leave
    )
    rmax = float(np.max(np.linalg.norm(sol.y[: x.size], axis=0)))
    if sol.t_events[0].size:
        return True, float(sol.t_events[0][0]), rmax
    return False, T_max, rmax


def certify_nontrapping(
    p: PotentialExpansion,
    lam: float,
    R: float,
    T_max: float,
    N: int,
    seed: int = 0,
    tol: float = 1e-9,
    n: int = 3,
) -> NonTrappingReport:
    """Empirical check of the non-trapping property at energy ``lam``.

    Positions are uniform in the ball |x| < R; momenta have random direction and
    |xi|**2 = lam - V(x).  Positions with V(x) > lam are redrawn.  Backward
    escape is computed as forward escape from (x, -xi) by time reversibility,
    and is skipped for samples already censored forward.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not R >= 1:
        raise ValueError("R must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    report = NonTrappingReport(lam, R, T_max, seed)
    attempts = 0
    while len(report.samples) < N:
        attempts += 1
        if attempts > 100 * N and not report.samples:
            raise ValueError(f"no admissible sample: V(x) > lambda = {lam} throughout the sampled ball")
        d = rng.standard_normal(n)
        x = R * rng.random() ** (1.0 / n) * d / np.linalg.norm(d)
        kin = lam - float(p.eval(x))
        e = rng.standard_normal(n)
        if kin < 0:
            report.rejected += 1
            continue
        xi = np.sqrt(kin) * e / np.linalg.norm(e)
        f_ok, f_t, f_r = _escape_time(p, x, xi, R, T_max, tol)
        if f_ok:
            b_ok, b_t, b_r = _escape_time(p, x, -xi, R, T_max, tol)
        else:  # already censored; the backward run cannot change the verdict
            b_ok, b_t, b_r = False, T_max, f_r
        report.samples.append(
            EscapeSample(PhasePoint(x, xi), f_ok and b_ok, max(f_t, b_t), f_ok, b_ok, max(f_r, b_r))
        )
    return report
