"""Command-line entry point: ``semiscat <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, ExperimentConfig, read_config
from .potential import ConfigError, PotentialExpansion

PACKAGE_DATA = Path(__file__).parent / "data"


class RunManifest:
    """Provenance record attached to every output of a run."""

    def __init__(self, subcommand: str, config: dict, seed: int, workers: int, inputs):
        self.data = {
            "tool": "semiscat",
            "version": __version__,
            "schema": SCHEMA_VERSION,
            "subcommand": subcommand,
            "config_hash": hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16],
            "seed": seed,
            "workers": workers,
            "inputs": [str(p) for p in inputs if p],
            "outputs": [],
        }
        self._t0 = time.perf_counter()

    @property
    def run_id(self) -> str:
        return self.data["config_hash"] + f"-{self.data['subcommand']}-s{self.data['seed']}"

    def add_output(self, path) -> None:
        self.data["outputs"].append(str(path))

    def finish(self, out_dir: Path) -> dict:
        self.data["wall_time_s"] = round(time.perf_counter() - self._t0, 3)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "manifest.json").write_text(json.dumps(self.data, indent=1))
        return self.data


# --- config helpers --------------------------------------------------------------


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and (PACKAGE_DATA / f"{path}.json").exists():
        return PACKAGE_DATA / f"{path}.json"
    return p


def load_run_config(path: str | None, overrides) -> dict:
    cfg = read_config(_resolve(path)) if path else {}
    for item in overrides or []:
        key, _, raw = item.partition("=")
        if not key or not _:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return cfg


def experiment_from(cfg: dict) -> ExperimentConfig:
    return ExperimentConfig.from_dict(cfg.get("experiment", {}))


def potential_from(cfg: dict, path: str | None = None) -> PotentialExpansion:
    if path:
        data = read_config(_resolve(path))
        return PotentialExpansion.from_dict(data.get("potential", data))
    if "potential" not in cfg:
        raise ConfigError("no potential given (use --potential or a config with a 'potential' section)")
    return PotentialExpansion.from_dict(cfg["potential"])


def _rays_from(cfg: dict, path: str | None):
    from .xray import default_rays, read_rays_csv

    if path:
        return read_rays_csv(path)
    r = cfg.get("rays", {})
    return default_rays(int(r.get("n_omega", 36)), int(r.get("n_offsets", 6)), float(r.get("radius", 2.0)))


def _h_grid(cfg: dict):
    from .forward import default_h_grid

    g = cfg.get("h_grid", {})
    return default_h_grid(int(g.get("n", 24)), float(g.get("lo", 1e-3)), float(g.get("hi", 1e-1)))


def _write_json(path: Path, payload: dict, manifest: RunManifest) -> None:
    payload = dict(payload)
    payload["manifest"] = manifest.run_id
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1))
    manifest.add_output(path)


def _csv_writer(path: Path, manifest: RunManifest, header):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="")
    fh.write(f"# manifest: {manifest.run_id}\n")
    w = csv.writer(fh)
    w.writerow(header)
    manifest.add_output(path)
    return fh, w


def _vec(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


# --- subcommands ---------------------------------------------------------------------


def cmd_potential_eval(args, cfg, man, out):
    p = potential_from(cfg, args.potential)
    if args.points:
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2, comments="#")
    else:
        pts = np.atleast_2d(_vec(args.x))
    V, G = p.eval(pts), p.grad(pts)
    fh, w = _csv_writer(out / "potential.csv", man, ["x0", "x1", "x2", "V", "dV0", "dV1", "dV2"])
    with fh:
        for x, v, g in zip(pts, V, G):
            w.writerow([*map(repr, x.tolist()), repr(float(v)), *map(repr, g.tolist())])
    return {"points": len(pts)}


def cmd_flow(args, cfg, man, out):
    from .flow import PhasePoint, integrate_flow

    p = potential_from(cfg, args.potential)
    rec = integrate_flow(p, PhasePoint(_vec(args.x), _vec(args.xi)), args.t_end, args.tol)
    rec.write_csv(out / "trajectory.csv")
    man.add_output(out / "trajectory.csv")
    summary = {"ok": rec.ok, "message": rec.message, "steps": int(rec.times.size), "energy_drift": rec.energy_drift}
    _write_json(out / "flow.json", summary, man)
    return summary


def cmd_certify(args, cfg, man, out):
    from .flow import certify_nontrapping

    p = potential_from(cfg, args.potential)
    f = cfg.get("flow", {})
    lam = args.lam if args.lam is not None else float(f.get("lambda", 1.0))
    R = args.R if args.R is not None else float(f.get("R", 5.0))
    T = args.T_max if args.T_max is not None else float(f.get("T_max", 50.0))
    N = args.N if args.N is not None else int(f.get("N", 20))
    rep = certify_nontrapping(p, lam, R, T, N, seed=args.seed)
    d = rep.to_dict()
    _write_json(out / "certify.json", d, man)
    return {"certified": d["certified"], "T_estimate": d["T_estimate"], "n_censored": d["n_censored"]}


def cmd_xray(args, cfg, man, out):
    from .xray import assemble_xray_operator, xray_full_line

    p = potential_from(cfg, args.potential)
    rays = _rays_from(cfg, args.rays)
    fh, w = _csv_writer(out / "xray.csv", man, ["omega0", "omega1", "omega2", "y0", "y1", "y2", "value"])
    with fh:
        for r in rays:
            w.writerow([*map(repr, r.omega.tolist()), *map(repr, r.y.tolist()), repr(xray_full_line(p, r, args.tol))])
    res = {"rays": len(rays)}
    if args.matrix is not None:
        M = assemble_xray_operator(p.rhos[0] if args.rho is None else args.rho, rays, args.matrix)
        path = out / f"xray_operator.{args.matrix_format}"
        M.save(path)
        man.add_output(path)
        res["condition"] = M.condition
    return res


def cmd_lattice(args, cfg, man, out):
    from .lattice import generate_lattice

    if args.rhos:
        rhos = [float(v) for v in args.rhos.split(",")]
    else:
        rhos = potential_from(cfg, args.potential).rhos
    delta = args.delta if args.delta is not None else experiment_from(cfg).delta
    lat = generate_lattice(rhos, delta, args.nu_max)
    d = lat.to_dict()
    _write_json(out / "lattice.json", d, man)
    return {"nu": lat.nus}


def _forward(cfg: dict, args, man):
    from .forward import ray_specs, synthesize_dataset
    from .inversion import lattice_for
    from .symbols import SymbolExpansion

    ecfg = experiment_from(cfg)
    p = potential_from(cfg, getattr(args, "potential", None))
    ecfg.check_delta(p.rhos[0])
    lat = lattice_for(p.rhos, ecfg.delta, 1)
    K = cfg.get("K") or lat.default_order()
    lat = lattice_for(p.rhos, ecfg.delta, K)
    rays = _rays_from(cfg, getattr(args, "rays", None))
    radius = float(cfg.get("rays", {}).get("bump_radius", 0.5))
    exp = SymbolExpansion(p, lat, ecfg.lam, K)
    noise = float(cfg.get("noise", 0.0))
    return synthesize_dataset(ecfg, p, lat, ray_specs(rays, radius), _h_grid(cfg), K, noise, args.seed, exp, args.workers)


def cmd_forward(args, cfg, man, out):
    ds = _forward(cfg, args, man)
    ds.manifest = {"run": man.run_id}
    path = out / "dataset.json"
    ds.save(path)
    man.add_output(path)
    if args.csv:
        ds.write_csv(out / "samples.csv")
        man.add_output(out / "samples.csv")
    return {"series": len(ds), "K": ds.K}


def _dataset(path: str):
    from .forward import ScatteringDataset

    return ScatteringDataset.load(path)


def cmd_fit(args, cfg, man, out):
    from .inversion import fit_powers, lattice_for

    ds = _dataset(args.dataset)
    K = args.K or ds.K
    lat = lattice_for(ds.rhos, ds.config.delta, max(K, ds.K))
    fits = [dict(fit_powers((s.h, s.values), lat, K, args.method, args.ridge).to_dict(), receiver=s.receiver.id) for s in ds.series]
    _write_json(out / "fits.json", {"K": K, "fits": fits}, man)
    return {"series": len(fits), "method": args.method}


def _invert(ds, cfg: dict, args, ground_truth=None):
    from .inversion import reconstruct

    inv = cfg.get("inversion", {})
    ecfg = experiment_from(cfg) if "experiment" in cfg else ds.config
    degrees = tuple(float(v) for v in args.rhos.split(",")) if getattr(args, "rhos", None) else None
    return reconstruct(
        ds,
        ecfg,
        degrees,
        L=int(inv.get("L", 4)),
        method=inv.get("method", "joint"),
        ridge=inv.get("ridge"),
        ground_truth=ground_truth,
        footprint=bool(inv.get("footprint", False)),
    )


def cmd_invert(args, cfg, man, out):
    ds = _dataset(args.dataset)
    truth = PotentialExpansion.from_dict(ds.potential) if (args.truth and ds.potential) else None
    res = _invert(ds, cfg, args, truth)
    _write_json(out / "recovered_potential.json", {"potential": res.potential.to_dict()}, man)
    _write_json(out / "inversion.json", res.to_dict(), man)
    return {"errors": res.errors}


def cmd_diagnose(args, cfg, man, out):
    from .inversion import lattice_for, schwartz_diagnostic

    a, b = _dataset(args.dataset), _dataset(args.other)
    K = args.K or min(a.K, b.K)
    lat = lattice_for(a.rhos, a.config.delta, K)
    rep = schwartz_diagnostic(a, b, lat, K)
    _write_json(out / "decay.json", rep.to_dict(), man)
    return {"verdict": rep.verdict, "slope": rep.slope}


def cmd_roundtrip(args, cfg, man, out):
    ds = _forward(cfg, args, man)
    truth = potential_from(cfg, getattr(args, "potential", None))
    res = _invert(ds, cfg, args, truth)
    tol = float(cfg.get("inversion", {}).get("tolerance", 0.02))
    ds.manifest = {"run": man.run_id}
    ds.save(out / "dataset.json")
    man.add_output(out / "dataset.json")
    _write_json(out / "recovered_potential.json", {"potential": res.potential.to_dict()}, man)
    report = dict(res.to_dict(), tolerance=tol, passed=bool(max(res.errors) <= tol), K=ds.K, series=len(ds))
    _write_json(out / "report.json", report, man)
    return {"errors": res.errors, "passed": report["passed"]}


COMMANDS = {
    "potential-eval": cmd_potential_eval,
    "flow": cmd_flow,
    "certify": cmd_certify,
    "xray": cmd_xray,
    "lattice": cmd_lattice,
    "forward": cmd_forward,
    "fit": cmd_fit,
    "invert": cmd_invert,
    "diagnose": cmd_diagnose,
    "roundtrip": cmd_roundtrip,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or TOML run config (or a bundled example name)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)

    ap = argparse.ArgumentParser(prog="semiscat", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("potential-eval", parents=[common], help="evaluate V and grad V")
    s.add_argument("--potential")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", help="single point 'x0,x1,x2'")
    g.add_argument("--points", help="CSV of points")

    s = sub.add_parser("flow", parents=[common], help="integrate the Hamilton flow")
    s.add_argument("--potential")
    s.add_argument("--x", required=True)
    s.add_argument("--xi", required=True)
    s.add_argument("--t-end", type=float, default=10.0)
    s.add_argument("--tol", type=float, default=1e-10)

    s = sub.add_parser("certify", parents=[common], help="empirical non-trapping check")
    s.add_argument("--potential")
    s.add_argument("--lam", type=float)
    s.add_argument("--R", type=float)
    s.add_argument("--T-max", dest="T_max", type=float)
    s.add_argument("--N", type=int)

    s = sub.add_parser("xray", parents=[common], help="full-line X-rays along rays")
    s.add_argument("--potential")
    s.add_argument("--rays", help="CSV with omega0..2, y0..2")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--matrix", type=int, metavar="L", help="also save the operator matrix up to degree L")
    s.add_argument("--rho", type=float)
    s.add_argument("--matrix-format", choices=["npz", "csv"], default="npz")

    s = sub.add_parser("lattice", parents=[common], help="exponent lattice with provenance")
    s.add_argument("--potential")
    s.add_argument("--rhos", help="comma-separated degrees")
    s.add_argument("--delta", type=float)
    s.add_argument("--nu-max", type=float, default=8.0)

    s = sub.add_parser("forward", parents=[common], help="synthesize F(h) samples")
    s.add_argument("--potential")
    s.add_argument("--rays")
    s.add_argument("--csv", action="store_true", help="also write samples.csv")

    s = sub.add_parser("fit", parents=[common], help="fit the h-power expansion")
    s.add_argument("dataset")
    s.add_argument("--K", type=int)
    s.add_argument("--method", choices=["joint", "joint-ridge", "peeling"], default="joint")
    s.add_argument("--ridge", type=float, default=0.0)

    s = sub.add_parser("invert", parents=[common], help="recover the layers from a dataset")
    s.add_argument("dataset")
    s.add_argument("--rhos")
    s.add_argument("--truth", action="store_true", help="report errors against the dataset's ground truth")

    s = sub.add_parser("diagnose", parents=[common], help="decay of F1 - F2")
    s.add_argument("dataset")
    s.add_argument("other")
    s.add_argument("--K", type=int)

    s = sub.add_parser("roundtrip", parents=[common], help="forward + fit + invert + error report")
    s.add_argument("--potential")
    s.add_argument("--rays")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, args.set)
        if "experiment" in cfg:
            experiment_from(cfg)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        inputs = [args.config] + [getattr(args, k, None) for k in ("potential", "rays", "dataset", "other", "points")]
        man = RunManifest(args.command, cfg, args.seed, args.workers, inputs)
        summary = COMMANDS[args.command](args, cfg, man, out)
        man.finish(out)
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"semiscat {args.command}: error: {msg}", file=sys.stderr)
        return 2
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
