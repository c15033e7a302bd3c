"""Command-line interface.

    rgdlab run    --config cfg.json --out DIR [--seed N] [--runs N] [--workers N] [--dump-trajectories]
    rgdlab scan   --config cfg.json --out DIR
    rgdlab traj   --config cfg.json --out DIR
    rgdlab bounds --regime stiefel --p 1 --L 1 [--json] [--out DIR]

Exit codes: 0 success, 2 configuration error (nothing is written),
3 an experiment finished but at least one run raised an error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .analysis import singular_alpha_scan, step_size_bound
from .errors import ConfigurationError, RGDLabError
from .experiments import (
    ExperimentPlan,
    classify_limit,
    monte_carlo_avoidance,
    step_stabilization_audit,
    write_trajectory_csv,
)
from .optimizers import run_batch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN_ERROR = 3

_REGIMES = {
    "hadamard": "Hadamard",
    "positive-curvature": "PositiveCurvature",
    "pinched": "Pinched",
    "stiefel": "Stiefel",
    "product-spheres": "ProductSpheres",
}


class _ConfigFailure(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgdlab", description="Riemannian gradient descent saddle-avoidance lab")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config=True):
        sp.add_argument("--config", required=need_config, help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory")

    run = sub.add_parser("run", help="Monte Carlo avoidance experiment")
    common(run)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--runs", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--dump-trajectories", action="store_true")

    scan = sub.add_parser("scan", help="singular step sizes of the iteration map at a point")
    common(scan)

    traj = sub.add_parser("traj", help="record a single trajectory as CSV")
    common(traj)

    b = sub.add_parser("bounds", help="step-size bound for a curvature regime")
    b.add_argument("--regime", required=True, choices=sorted(_REGIMES))
    for flag in ("--L", "--G", "--J", "--K-min", "--K-max", "--p"):
        b.add_argument(flag, type=float, default=None)
    b.add_argument("--json", action="store_true", help="print the JSON record instead of a table")
    b.add_argument("--out", default=None)
    return p


def _out_dir(path, default):
    out = Path(path if path is not None else default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _ConfigFailure(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise _ConfigFailure(f"output directory {out} is not writable")
    return out


def _write(path: Path, text: str):
    path.write_text(text)


def _section(doc, name):
    if name not in doc:
        raise _ConfigFailure(f"config has no {name!r} section")
    return doc[name]


def _cmd_run(args, doc):
    section = dict(_section(doc, "experiment"))
    if args.seed is not None:
        section["seed"] = args.seed
    if args.runs is not None:
        section["num_runs"] = args.runs
    plan = ExperimentPlan.from_dict(section)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigurationError("--workers must be >= 1")
    out = _out_dir(args.out, "out")
    if args.dump_trajectories:
        report, trajs = monte_carlo_avoidance(plan, workers=workers, keep_trajectories=True)
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        width = max(5, len(str(plan.num_runs - 1)))
        for i, tr in enumerate(trajs):
            if not isinstance(tr, Exception):
                write_trajectory_csv(tr, tdir / f"run_{i:0{width}d}.csv")
    else:
        report = monte_carlo_avoidance(plan, workers=workers)
    _write(out / "report.json", report.to_json())
    c = report.counts
    print(
        f"runs={report.num_runs} strict_saddle={c['ConvergedToStrictSaddle']} other={c['ConvergedToOther']} "
        f"escaped={c['Escaped']} undecided={c['Undecided']} "
        f"fraction_to_strict_saddle={report.fraction_to_strict_saddle:.6g} "
        f"wilson95=[{report.wilson_95[0]:.4g}, {report.wilson_95[1]:.4g}]"
    )
    print(f"wrote {out / 'report.json'}")
    if report.errored:
        print(f"{report.errored} run(s) raised errors", file=sys.stderr)
        return EXIT_RUN_ERROR
    return EXIT_OK


def _cmd_scan(args, doc):
    spec = cfgmod.parse_scan(_section(doc, "scan"))
    out = _out_dir(args.out, "out")
    res = singular_alpha_scan(spec.cost, None, spec.map_kind, spec.point, spec.alpha_max, spec.grid_size)
    rec = res.to_record()
    rec["schema"] = cfgmod.SCHEMA_VERSION
    _write(out / "singular_set.json", cfgmod.dumps(rec))
    print(f"alphas={[float(a) for a in res.alphas]} method={res.method}")
    print(f"wrote {out / 'singular_set.json'}")
    return EXIT_OK


def _cmd_traj(args, doc):
    spec = cfgmod.parse_traj(_section(doc, "traj"))
    out = _out_dir(args.out, "out")
    (tr,) = run_batch(spec.cost, spec.x0[None], spec.algorithm, spec.stop)
    if isinstance(tr, Exception):
        print(f"run failed: {type(tr).__name__}: {tr}", file=sys.stderr)
        return EXIT_RUN_ERROR
    write_trajectory_csv(tr, out / "trajectory.csv")
    outcome = classify_limit(tr, spec.cost)
    stabilized, k, final_alpha = step_stabilization_audit(tr)
    summary = {
        "schema": cfgmod.SCHEMA_VERSION,
        "outcome": outcome.to_dict(),
        "stabilization": {"stabilized": stabilized, "index": k, "final_alpha": final_alpha},
        "final_point": tr.final_point.tolist(),
    }
    _write(out / "trajectory.json", cfgmod.dumps(summary))
    print(f"{outcome.classification.value} after {tr.iterations} iterations ({tr.termination.value})")
    print(f"wrote {out / 'trajectory.csv'}")
    return EXIT_OK


def _cmd_bounds(args):
    params = {
        k: v
        for k, v in {
            "L": args.L,
            "G": args.G,
            "J": args.J,
            "K_min": args.K_min,
            "K_max": args.K_max,
            "p": args.p,
        }.items()
        if v is not None
    }
    bound = step_size_bound(_REGIMES[args.regime], params)
    rec = bound.to_record()
    rec["schema"] = cfgmod.SCHEMA_VERSION
    if args.out is not None:
        _write(_out_dir(args.out, "out") / "bounds.json", cfgmod.dumps(rec))
    if args.json:
        sys.stdout.write(cfgmod.dumps(rec))
    else:
        inputs = "  ".join(f"{k}={v:g}" for k, v in bound.inputs.items())
        print(f"{'regime':<18}{'alpha_max':<22}inputs")
        print(f"{bound.regime.value:<18}{bound.alpha_max:<22.15g}{inputs}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "bounds":
            return _cmd_bounds(args)
        doc = cfgmod.load_config(args.config)
        handler = {"run": _cmd_run, "scan": _cmd_scan, "traj": _cmd_traj}[args.command]
        return handler(args, doc)
    except (ConfigurationError, _ConfigFailure) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RGDLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_ERROR
    except (ValueError, TypeError) as exc:
        # malformed values that slipped past schema checks (e.g. a string
        # where a number was expected)
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
