"""Command line entry point: ``procrustean simulate|estimate|experiment|report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..criteria import CriterionContext
from ..errors import ConfigError, EmptyResult, EvenK, InvalidCutoff, NoConvergence, SingularAlignment
from ..estimator import smoothed_procrustes_mean
from ..model import load_dataset, load_observations, save_dataset
from ..spectral import cutoff, table_cutoff
from .config import ExperimentSpec
from .report import report
from .runner import cell_dataset, experiment_tasks, read_csv, run_experiment, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _cmd_simulate(args) -> int:
    spec = ExperimentSpec.from_json(args.config)
    out = Path(args.out)
    for noise, k, J, rep in experiment_tasks(spec):
        ds = cell_dataset(spec, noise, k, J, rep)
        save_dataset(ds, out / ds.dataset_id)
    (out / "k_mapping.json").write_text(json.dumps({str(k): v for k, v in spec.k_mapping.items()}, indent=2) + "\n")
    print(f"wrote {len(experiment_tasks(spec))} datasets to {out}")
    return EXIT_OK


def _resolve_lambda(value: str, k: int, s: float) -> int:
    if value == "auto":
        return cutoff(k, s)
    if value == "table":
        return table_cutoff(k)
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"--lambda must be an integer, 'auto' or 'table', got {value!r}") from None


def _cmd_estimate(args) -> int:
    data = Path(args.data)
    dataset_id, obs = load_observations(data)
    k = obs.shape[1]
    if k % 2 == 0:
        raise EvenK(f"dataset has even k={k}; smoothing needs odd k")
    lam = _resolve_lambda(args.lam, k, args.smoothness)
    res = smoothed_procrustes_mean(CriterionContext.from_observations(obs, lam))
    d = res.diagnostics
    out = {
        "dataset_id": dataset_id,
        "J": int(obs.shape[0]),
        "k": int(k),
        "lambda": int(lam),
        "a": res.params.a.tolist(),
        "alpha": res.params.alpha.tolist(),
        "b": res.params.b.tolist(),
        "mean": res.mean.tolist(),
        "diagnostics": {
            "criterion": d.criterion,
            "iterations": d.iterations,
            "grad_norm": d.grad_norm,
            "converged": d.converged,
            "active_bounds": d.active_bounds,
        },
    }
    if (data / "meta.json").exists() and (data / "truth.csv").exists():
        from ..estimator import mean_at_section

        ds = load_dataset(data)
        out["error_section"] = float(np.sum((res.mean - mean_at_section(ds.pattern, ds.truth)) ** 2) / k)
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if d.converged else EXIT_PARTIAL


def _cmd_experiment(args) -> int:
    spec = ExperimentSpec.from_json(args.config)
    result = run_experiment(spec, parallelism=args.parallelism)
    write_csv(result, args.out)
    print(f"{len(result)} rows, {result.failures} failed, written to {args.out}")
    return EXIT_PARTIAL if result.failures else EXIT_OK


def _cmd_report(args) -> int:
    result = read_csv(args.inp)
    for path in report(result, args.format, args.out):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="procrustean", description="Smoothed Procrustes means of planar landmark data.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate datasets for every cell of a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("estimate", help="estimate the smoothed mean of one dataset directory")
    e.add_argument("--data", required=True)
    e.add_argument("--lambda", dest="lam", default="auto", help="cutoff: integer, 'auto' (k^(1/(2s+1))) or 'table'")
    e.add_argument("--smoothness", type=float, default=1.5)
    e.add_argument("--out")
    e.set_defaults(func=_cmd_estimate)

    x = sub.add_parser("experiment", help="run a Monte-Carlo grid and write results CSV")
    x.add_argument("--config", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--parallelism", type=int)
    x.set_defaults(func=_cmd_experiment)

    r = sub.add_parser("report", help="summaries and figures from a results CSV")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--format", choices=("csv", "svg"), default="svg")
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EvenK, InvalidCutoff) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, SingularAlignment) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (EmptyResult, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
