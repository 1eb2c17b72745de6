"""Monte-Carlo cells: simulate, estimate with and without smoothing, score."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..criteria import CriterionContext
from ..errors import DimensionMismatch, EmptyResult, ProcrusteanError
from ..estimator import Constraints, OptimizerOptions, mean_at_section, smoothed_procrustes_mean
from ..model import NOISE_KINDS, MeanPattern, NoiseModel, derive_seed, generate_dataset
from ..spectral import full_band
from .config import ExperimentSpec

CSV_HEADER = ("noise", "k", "J", "rep", "smoothed", "error", "error_metric", "runtime_ms", "converged")


class ResultRow(NamedTuple):
    noise: str
    k: int
    J: int
    rep: int
    smoothed: bool
    error: float
    error_metric: str
    runtime_ms: float | None
    converged: bool

    def sort_key(self):
        return (self.noise, self.k, self.J, self.rep, self.smoothed)


@dataclass
class ExperimentResult:
    rows: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def failures(self) -> int:
        return sum(not r.converged for r in self.rows)


def _kind_index(noise: str) -> int:
    return NOISE_KINDS.index(noise)


def dataset_seed(spec: ExperimentSpec, noise: str, k: int, J: int, rep: int) -> int:
    return derive_seed(spec.seed, 1, _kind_index(noise), k, J, rep)


def noise_model(spec: ExperimentSpec, noise: str, k: int) -> NoiseModel:
    # the correlated rotation is drawn once per (experiment, k)
    return NoiseModel(noise, k, rotation_seed=derive_seed(spec.seed, 0, k), scale=spec.noise_scale)


def cell_dataset(spec: ExperimentSpec, noise: str, k: int, J: int, rep: int):
    pattern = MeanPattern.from_curve(k, spec.curve_variant)
    return generate_dataset(
        pattern,
        J,
        spec.truth_bounds,
        noise_model(spec, noise, k),
        dataset_seed(spec, noise, k, J, rep),
        dataset_id=f"{noise}_k{k}_J{J}_rep{rep}",
    )


def run_cell(spec: ExperimentSpec, noise: str, k: int, J: int, rep: int) -> list[ResultRow]:
    """Two rows for one dataset: unsmoothed (full band) then smoothed."""
    if k % 2 == 0:
        raise DimensionMismatch(f"cells need odd k, got {k}")
    constraints = Constraints(A=spec.estimator_box[0], Abar=spec.estimator_box[1])
    options = OptimizerOptions(tol=spec.tol, max_iter=spec.max_iter)
    rows = []
    try:
        ds = cell_dataset(spec, noise, k, J, rep)
        target = mean_at_section(ds.pattern, ds.truth) if spec.score_against == "section" else ds.pattern.config
    except (ProcrusteanError, ArithmeticError, ValueError, np.linalg.LinAlgError):
        ds = None
    for smoothed, lam in ((False, full_band(k)), (True, spec.cell_lambda(k))):
        error, converged, runtime = math.nan, False, None
        if ds is not None:
            start = time.perf_counter()
            try:
                res = smoothed_procrustes_mean(CriterionContext.from_observations(ds.observations, lam), constraints, options)
                error = float(np.sum((res.mean - target) ** 2) / k)
                converged = res.diagnostics.converged
            except (ProcrusteanError, ArithmeticError, ValueError, np.linalg.LinAlgError):
                pass
            if spec.record_runtime:
                runtime = 1000.0 * (time.perf_counter() - start)
        rows.append(ResultRow(noise, k, J, rep, smoothed, error, spec.error_metric, runtime, converged))
    return rows


def _run_task(args):
    spec_dict, noise, k, J, rep = args
    return run_cell(ExperimentSpec.from_dict(spec_dict), noise, k, J, rep)


def experiment_tasks(spec: ExperimentSpec) -> list[tuple]:
    return [
        (noise, k, J, rep)
        for noise in spec.noise_kinds
        for k in spec.odd_k_grid
        for J in spec.J_grid
        for rep in range(spec.repetitions)
    ]


def experiment_meta(spec: ExperimentSpec) -> dict:
    return {
        "spec": spec.to_dict(),
        "k_mapping": {str(k): v for k, v in spec.k_mapping.items()},
        "lambda": {str(k): spec.cell_lambda(k) for k in spec.odd_k_grid},
        "unsmoothed_lambda": {str(k): full_band(k) for k in spec.odd_k_grid},
        "gamma_max": {
            noise: {str(k): noise_model(spec, noise, k).gamma_max() for k in spec.odd_k_grid} for noise in spec.noise_kinds
        },
    }


def run_experiment(spec: ExperimentSpec, parallelism: int | None = None, tasks=None) -> ExperimentResult:
    """Run every cell and return rows in canonical order.

    ``tasks`` may override the execution order (it never affects the output).
    """
    workers = spec.parallelism if parallelism is None else parallelism
    tasks = experiment_tasks(spec) if tasks is None else list(tasks)
    rows = []
    if workers <= 1:
        for t in tasks:
            rows.extend(run_cell(spec, *t))
    else:
        spec_dict = spec.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell_rows in pool.map(_run_task, [(spec_dict, *t) for t in tasks], chunksize=max(1, len(tasks) // (8 * workers))):
                rows.extend(cell_rows)
    rows.sort(key=ResultRow.sort_key)
    return ExperimentResult(rows, experiment_meta(spec))


# ---------------------------------------------------------------------------
# CSV


def _fmt_float(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_csv(result: ExperimentResult, path, meta: bool = True) -> Path:
    """Write rows with the fixed header; ``<stem>.meta.json`` goes alongside."""
    if not result.rows:
        raise EmptyResult("nothing to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in result.rows:
            w.writerow([
                r.noise, r.k, r.J, r.rep, str(r.smoothed).lower(), _fmt_float(r.error),
                r.error_metric, _fmt_float(r.runtime_ms), str(r.converged).lower(),
            ])
    if meta and result.meta:
        path.with_suffix(".meta.json").write_text(json.dumps(result.meta, indent=2, sort_keys=True) + "\n")
    return path


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1"):
        return True
    if s.lower() in ("false", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def read_csv(path) -> ExperimentResult:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path} does not have the results header")
        rows = [
            ResultRow(
                n, int(k), int(J), int(rep), _parse_bool(sm), float(err), metric,
                float(rt) if rt else None, _parse_bool(conv),
            )
            for n, k, J, rep, sm, err, metric, rt, conv in reader
        ]
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ExperimentResult(rows, meta)
