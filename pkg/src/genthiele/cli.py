"""Command-line front end.

    genthiele validate CONFIG
    genthiele reserve CONFIG --out DIR
    genthiele simulate CONFIG --paths N --seed S --out DIR
    genthiele compare CONFIG --paths N --seed S

Exit codes: 0 success, 1 ODE and Monte Carlo disagree (compare), 2 invalid
config, 3 numeric failure.  Machine-readable JSON summaries go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .backend import kernels
from .config import ConfigError, ModelConfig, build, load_config, parse_states, validate_model
from .duration import emit_figures
from .model import DomainError, ModelError, NumericError
from .simulator import DEFAULT_HAZARD_STEP, estimate_from_pvs, simulate_paths, simulate_pv, write_paths_csv

EXIT_OK, EXIT_DISAGREE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
Z_LIMIT = 4.0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _load(path: str) -> ModelConfig:
    cfg = load_config(path)
    diags = validate_model(cfg)
    for d in diags:
        print(str(d), file=sys.stderr)
    errors = [d for d in diags if d.level == "error"]
    if errors:
        raise ConfigError("invalid config", errors)
    return cfg


def _write_curve(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _manifest(out: Path, cfg: ModelConfig, command: str, started: str, files: list[str]) -> None:
    missing = [f for f in files if not (out / f).exists()]
    if missing:
        raise RuntimeError(f"outputs missing: {missing}")
    doc = {
        "schema": 1,
        "command": command,
        "config_sha256": cfg.sha256(),
        "started": started,
        "finished": _now(),
        "version": __version__,
        "backend": kernels.BACKEND,
        "outputs": files,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    diags = validate_model(cfg)
    _emit({"command": "validate", "valid": not diags,
           "diagnostics": [{"level": d.level, "message": d.message} for d in diags]})
    for d in diags:
        print(str(d), file=sys.stderr)
    return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK


def cmd_reserve(args) -> int:
    started = _now()
    cfg = _load(args.config)
    setup = build(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = setup.solve()
    files = []
    if cfg.model_kind == "disability_rehab":
        curves = emit_figures(sol, setup.slice_onsets)
        _write_curve(out / "active_reserve.csv", ["time", "value"], curves.active)
        _write_curve(out / "disabled_onset_reserve.csv", ["onset", "value"], curves.onset)
        files += ["active_reserve.csv", "disabled_onset_reserve.csv"]
        if curves.slices:
            rows = [(s, t, v) for s, arr in curves.slices.items() for t, v in arr]
            _write_curve(out / "disabled_slices.csv", ["onset", "time", "value"], rows)
            files.append("disabled_slices.csv")
    else:
        with (out / "reserves.csv").open("w", newline="") as fh:
            sol.to_csv(fh)
        files.append("reserves.csv")
    _manifest(out, cfg, "reserve", started, files)
    summary = {_name(setup, s): setup.reserve(sol, s) for s in setup.default_states()}
    _emit({"command": "reserve", "t_start": cfg.t_start, "reserves": summary,
           "outputs": files + ["manifest.json"]})
    return EXIT_OK


def _name(setup, state) -> str:
    return setup.state_name(state) if hasattr(setup, "state_name") else str(state)


def _sim_settings(cfg: ModelConfig, args):
    sim = cfg.simulation
    n = args.paths if args.paths is not None else int(sim.get("n_paths", 100_000))
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    step = float(sim.get("hazard_step", DEFAULT_HAZARD_STEP))
    return n, seed, step


def cmd_simulate(args) -> int:
    started = _now()
    cfg = _load(args.config)
    setup = build(cfg)
    n, seed, step = _sim_settings(cfg, args)
    states = parse_states(setup, [args.state]) if args.state else setup.default_states()[:1]
    x0 = states[0]
    model = setup.insurance_model()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = ["mc_estimate.json"]
    if args.dump_paths:
        paths = simulate_paths(model, x0, cfg.t_start, n, seed, step)
        with (out / "paths.csv").open("w", newline="") as fh:
            write_paths_csv(paths, fh)
        files.append("paths.csv")
        est = estimate_from_pvs(np.array([p.pv for p in paths]), seed, "generic", False).to_dict()
    else:
        est = simulate_pv(model, x0, cfg.t_start, n, seed, step).to_dict()
    est.update(state=_name(setup, x0), t=cfg.t_start)
    (out / "mc_estimate.json").write_text(json.dumps(est, indent=2, sort_keys=True) + "\n")
    _manifest(out, cfg, "simulate", started, files)
    _emit({"command": "simulate", **est, "outputs": files + ["manifest.json"]})
    return EXIT_OK


def compare(cfg: ModelConfig, n_paths: int, seed: int, states=None, mc_rate_scale: float = 1.0,
            hazard_step: Optional[float] = None) -> dict:
    """ODE reserve against the Monte Carlo estimate for each requested start state at ``t_start``."""
    setup = build(cfg)
    mc_setup = build(cfg, rate_scale=mc_rate_scale)
    names = states or cfg.simulation.get("compare_states")
    chosen = parse_states(setup, names) if names else setup.default_states()
    extra = [s.coord for s in chosen if s.coord is not None and cfg.model_kind == "disability_rehab"]
    sol = setup.solve(extra_onsets=extra)
    model = mc_setup.insurance_model()
    step = hazard_step or float(cfg.simulation.get("hazard_step", DEFAULT_HAZARD_STEP))
    rows = []
    for x0 in chosen:
        ode = setup.reserve(sol, x0)
        est = simulate_pv(model, x0, cfg.t_start, n_paths, seed, step)
        diff = ode - est.mean
        z = diff / est.std_error if est.std_error > 0 else (0.0 if abs(diff) < 1e-12 else math.inf)
        rows.append({"state": _name(setup, x0), "ode": ode, "mc_mean": est.mean, "std_error": est.std_error,
                     "z": z, "pass": abs(z) < Z_LIMIT, "engine": est.engine})
    return {"command": "compare", "t": cfg.t_start, "n_paths": n_paths, "seed": seed,
            "z_limit": Z_LIMIT, "states": rows, "pass": all(r["pass"] for r in rows)}


def cmd_compare(args) -> int:
    cfg = _load(args.config)
    n, seed, step = _sim_settings(cfg, args)
    report = compare(cfg, n, seed, args.state or None, args.mc_rate_scale, step)
    for row in report["states"]:
        if not math.isfinite(row["z"]):
            row["z"] = str(row["z"])
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _emit(report)
    return EXIT_OK if report["pass"] else EXIT_DISAGREE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genthiele", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a config and print diagnostics")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("reserve", help="solve the reserve equation and write CSVs")
    r.add_argument("config")
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_reserve)

    for name, func, helptext in (("simulate", cmd_simulate, "Monte Carlo present value"),
                                 ("compare", cmd_compare, "ODE reserve vs Monte Carlo z-scores")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config")
        s.add_argument("--paths", type=int)
        s.add_argument("--seed", type=int)
        s.set_defaults(func=func)
        if name == "simulate":
            s.add_argument("--out", default="out")
            s.add_argument("--state", help="start state, e.g. active or disabled@30 (default: first)")
            s.add_argument("--dump-paths", action="store_true", help="also write paths.csv (generic engine)")
        else:
            s.add_argument("--state", action="append", help="state to compare (repeatable)")
            s.add_argument("--report", help="also write the report JSON here")
            s.add_argument("--mc-rate-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DomainError, ModelError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
