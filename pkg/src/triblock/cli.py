"""Command-line interface: ``triblock <subcommand> ...``.

Subcommands
-----------
simulate   run a preset or config file and write artifacts (exit 0 iff all checks pass)
analyze    measure a saved ``.tdf`` snapshot
sharp      optimal splitting energy of the droplet problem
coreshell  optimal core offset of a single two-species droplet
lattice    optimise droplet positions on the torus
calibrate  fit a triple well to target surface tensions and report its geodesic tensions
preset     print a preset as JSON
sweep      run a preset once per parameter value and write an aggregated CSV

``TD_THREADS`` caps the number of worker processes used by ``sweep``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as tio
from .energy import InteractionMatrix, SurfaceTensions, calibrate_sigma, fit_well, symmetric_well
from .experiments import (
    PRESETS,
    UnknownPresetError,
    preset,
    run_experiment,
    spec_from_config,
    spec_to_dict,
    sweep,
)

__all__ = ["main", "build_parser"]

log = logging.getLogger("triblock")


def _load_toml(path: str) -> dict:
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - depends on the interpreter
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _spec_from_args(args):
    if args.config:
        base = preset(args.preset) if args.preset else None
        spec = spec_from_config(_load_toml(args.config), base)
    elif args.preset:
        spec = preset(args.preset)
    else:
        raise SystemExit("simulate needs a preset name or --config")
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.grid is not None:
        over["n"] = args.grid
    if args.steps is not None:
        over["steps"] = args.steps
    if args.strict:
        over["strict"] = True
    return replace(spec, **over)


def _sigma(vals) -> SurfaceTensions:
    return SurfaceTensions(*map(float, vals))


def _gamma(vals) -> InteractionMatrix:
    return InteractionMatrix(*map(float, vals))


def _print_json(doc) -> None:
    json.dump(doc, sys.stdout, indent=2, default=tio._json_default)
    sys.stdout.write("\n")


def _print_rows(rows: list[dict]) -> None:
    import csv

    if not rows:
        return
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out) if args.out else Path("runs") / spec.name

    def progress(state):
        if state.steps % 1000 == 0:
            log.info("step %d  E = %.10g", state.steps, state.energy)

    res = run_experiment(spec, out, progress=progress)
    doc = tio.read_json(out / "report.json")
    _print_json({k: doc[k] for k in ("name", "ok", "failed", "stop_reason", "steps", "wall_time")}
                | {"tags": res.tags, "out": str(out)})
    return 0 if res.ok else 1


def cmd_analyze(args) -> int:
    from .morphology import analyze

    u = tio.read_snapshot(args.snapshot)
    m = analyze(u, epsilon=args.epsilon)
    doc = m.to_dict()
    if args.out:
        tio.write_json(args.out, doc)
    _print_json(doc)
    return 0


def cmd_sharp(args) -> int:
    from .sharp import ebar0, ebar0_csv_row, youngs_angles

    sigma, G = _sigma(args.sigma), _gamma(args.Gamma)
    rows = []
    for M1, M2 in zip(args.M1, args.M2):
        res = ebar0(M1, M2, sigma, G, max_components=args.max_components, seed=args.seed or 0)
        rows.append(ebar0_csv_row(M1, M2, sigma, G, res))
    if args.youngs:
        a = youngs_angles(sigma)
        for r in rows:
            r.update(theta0=a.theta0, theta1=a.theta1, theta2=a.theta2)
    if args.out:
        tio.write_rows_csv(args.out, rows)
    _print_rows(rows)
    return 0


def cmd_coreshell(args) -> int:
    from .coreshell_opt import f0, f0_csv_row
    from .sharp import MassPair

    sigma, G = _sigma(args.sigma), _gamma(args.Gamma)
    rows = [f0_csv_row(MassPair(m1, m2), G, f0(MassPair(m1, m2), sigma, G)) for m1, m2 in zip(args.m1, args.m2)]
    if args.out:
        tio.write_rows_csv(args.out, rows)
    _print_rows(rows)
    return 0


def cmd_lattice(args) -> int:
    from .lattice import DropletConfig, config_to_json, hexagonality, optimize_positions
    from .sharp import MassPair

    sigma, G = _sigma(args.sigma), _gamma(args.Gamma)
    rng = np.random.default_rng(args.seed or 0)
    c = DropletConfig.from_split([MassPair(*args.mass)] * args.K, rng.random((args.K, 2)), sigma, G)
    rep = optimize_positions(c, sigma, G, steps=args.steps or 5000, report=True)
    mean, cv = hexagonality(rep.config) if args.K >= 2 else (float("nan"), float("nan"))
    doc = {
        "K": args.K, "F0": rep.energies[-1], "steps": rep.steps, "converged": rep.converged,
        "gradient_norm": rep.gradient_norm, "nn_mean": mean, "nn_cv": cv,
        "config": json.loads(config_to_json(rep.config, sigma, G)),
    }
    if args.out:
        tio.write_json(args.out, doc)
    _print_json(doc)
    return 0


def cmd_calibrate(args) -> int:
    target = _sigma(args.sigma)
    w = symmetric_well(target.s01) if target.s01 == target.s02 == target.s12 else fit_well(target)
    got = calibrate_sigma(w)
    doc = {
        "target": target.as_tuple(),
        "well": {"c01": w.c01, "c02": w.c02, "c12": w.c12, "theta": w.theta, "kappa": w.kappa},
        "calibrated": got.as_tuple(),
        "triangle_ok": got.triangle_ok(rtol=1e-12),
    }
    _print_json(doc)
    return 0


def cmd_preset(args) -> int:
    if args.name is None:
        for name in sorted(PRESETS):
            print(f"{name:10s} {PRESETS[name].description}")
        return 0
    _print_json(spec_to_dict(preset(args.name)))
    return 0


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    values = [_parse_value(v) for v in args.values]
    out = Path(args.out) if args.out else Path("runs") / f"sweep-{spec.name}"
    rows = sweep(spec, args.param, values, out)
    if not rows:
        out.mkdir(parents=True, exist_ok=True)
        tio.write_rows_csv(out / "sweep.csv", [], fieldnames=["parameter", "value", "ok", "classification"])
    _print_rows(rows)
    return 0 if all(r["ok"] for r in rows) else 1


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("preset", nargs="?", help="preset name (see `triblock preset`)")
    p.add_argument("--config", help="TOML config; overrides the preset")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--strict", action="store_true", help="fail on any energy increase")
    p.add_argument("--grid", type=int, help="grid resolution n")
    p.add_argument("--steps", type=int, help="step budget")


def _model_flags(p: argparse.ArgumentParser, gamma_default=(0.0, 0.0, 0.0)) -> None:
    p.add_argument("--sigma", nargs=3, type=float, default=(1.0, 2.0, 1.0), metavar=("S01", "S02", "S12"))
    p.add_argument("--Gamma", nargs=3, type=float, default=gamma_default, metavar=("G11", "G12", "G22"))
    p.add_argument("--out", help="write the result to this file")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="triblock", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a preset or config")
    _run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="measure a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sharp", help="optimal splitting energy")
    p.add_argument("--M1", type=float, nargs="+", required=True)
    p.add_argument("--M2", type=float, nargs="+", required=True)
    p.add_argument("--max-components", type=int, default=40)
    p.add_argument("--youngs", action="store_true", help="append Young's angles")
    _model_flags(p)
    p.set_defaults(func=cmd_sharp)

    p = sub.add_parser("coreshell", help="optimal core offset")
    p.add_argument("--m1", type=float, nargs="+", required=True)
    p.add_argument("--m2", type=float, nargs="+", required=True)
    _model_flags(p)
    p.set_defaults(func=cmd_coreshell)

    p = sub.add_parser("lattice", help="optimise droplet positions")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--mass", type=float, nargs=2, default=(0.1, 0.05), metavar=("M1", "M2"))
    p.add_argument("--steps", type=int)
    _model_flags(p, gamma_default=(40.0, 0.0, 80.0))
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("calibrate", help="fit and calibrate a triple well")
    p.add_argument("--sigma", nargs=3, type=float, default=(1.0, 1.0, 1.0), metavar=("S01", "S02", "S12"))
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("preset", help="show presets")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("sweep", help="parameter sweep")
    _run_flags(p)
    p.add_argument("--param", required=True, help="e.g. sigma.s02, gamma.g11, masses.M1, seed")
    p.add_argument("--values", nargs="*", default=[])
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UnknownPresetError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
