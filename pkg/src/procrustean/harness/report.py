"""Summaries and figures for experiment results."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..errors import EmptyResult
from .runner import ExperimentResult, write_csv

SUMMARY_HEADER = ("noise", "smoothed", "k", "J", "n", "median", "q1", "q3")


def summarize(result: ExperimentResult) -> list[tuple]:
    """Median and quartiles of the finite errors per (noise, smoothed, k, J)."""
    if not result.rows:
        raise EmptyResult("no rows to summarize")
    groups = defaultdict(list)
    for r in result.rows:
        if np.isfinite(r.error):
            groups[(r.noise, r.smoothed, r.k, r.J)].append(r.error)
    out = []
    for key in sorted(groups):
        q1, med, q3 = np.percentile(groups[key], [25, 50, 75])
        out.append((*key, len(groups[key]), float(med), float(q1), float(q3)))
    return out


def write_summary(result: ExperimentResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for noise, sm, k, J, n, med, q1, q3 in summarize(result):
            w.writerow([noise, str(sm).lower(), k, J, n, repr(med), repr(q1), repr(q3)])
    return path


def median_table(result: ExperimentResult) -> dict:
    """``{(noise, smoothed, J): (ks, medians)}`` with ks ascending."""
    table = defaultdict(lambda: ([], []))
    for noise, sm, k, J, _, med, _, _ in summarize(result):
        ks, meds = table[(noise, sm, J)]
        ks.append(k)
        meds.append(med)
    return dict(table)


def plot_medians(result: ExperimentResult, path) -> Path:
    """One panel per (noise, smoothed): median error vs k per J, log-log,
    with interquartile whiskers.

    Panels carry the SVG id ``panel-<noise>-<smoothed|raw>`` and each
    polyline ``series-<noise>-<smoothed|raw>-J<J>``.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summary = summarize(result)
    if not summary:
        raise EmptyResult("no finite errors to plot")
    panels = sorted({(s[0], s[1]) for s in summary}, key=lambda p: (p[0], p[1]))
    Js = sorted({s[3] for s in summary})
    colors = {J: plt.cm.viridis(i / max(1, len(Js) - 1) * 0.85) for i, J in enumerate(Js)}

    ncols = 2 if len(panels) > 1 else 1
    nrows = int(np.ceil(len(panels) / ncols))
    with plt.rc_context({"svg.hashsalt": "procrustean", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(nrows, ncols, figsize=(5.0 * ncols, 3.6 * nrows), squeeze=False)
        for ax in axes.flat[len(panels):]:
            ax.remove()
        for ax, (noise, sm) in zip(axes.flat, panels):
            tag = f"{noise}-{'smoothed' if sm else 'raw'}"
            ax.set_gid(f"panel-{tag}")
            for J in Js:
                rows = [s for s in summary if s[0] == noise and s[1] == sm and s[3] == J]
                if not rows:
                    continue
                k = np.array([s[2] for s in rows], dtype=float)
                med = np.array([s[5] for s in rows])
                lo = med - np.array([s[6] for s in rows])
                hi = np.array([s[7] for s in rows]) - med
                (line,) = ax.plot(k, med, marker="o", color=colors[J], label=f"J={J}")
                line.set_gid(f"series-{tag}-J{J}")
                bars = ax.errorbar(k, med, yerr=np.vstack([lo, hi]), fmt="none", ecolor=colors[J], capsize=3)
                for art in bars.lines[2]:
                    art.set_gid(f"whisker-{tag}-J{J}")
            ax.set_xscale("log")
            ax.set_yscale("log", nonpositive="mask")
            ax.set_xlabel("k")
            ax.set_ylabel("median error")
            ax.set_title(f"{noise}, {'smoothed' if sm else 'unsmoothed'}")
            ax.legend(fontsize="small")
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format=path.suffix.lstrip(".") or "svg", metadata={"Date": None} if path.suffix == ".svg" else None)
        plt.close(fig)
    return path


def report(result: ExperimentResult, fmt: str, out_dir) -> list[Path]:
    """Write ``results.csv`` (csv) or ``errors.svg`` (svg), plus ``summary.csv``."""
    if not result.rows:
        raise EmptyResult("cannot report an empty result")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        written = [write_csv(result, out_dir / "results.csv")]
    elif fmt == "svg":
        written = [plot_medians(result, out_dir / "errors.svg")]
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    written.append(write_summary(result, out_dir / "summary.csv"))
    return written
