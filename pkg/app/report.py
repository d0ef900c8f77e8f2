# app/report.py
"""
Plain-text experiment reports. Output depends only on the inputs (no
timestamps, fixed float formatting) so two runs with the same flags and
seed produce byte-identical files.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from potlab import __version__

from .evaluation import ExperimentReport, ReseedSummary, SweepRow


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6f}"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _section(name: str, lines: Sequence[str]) -> list[str]:
    return [f"[{name}]", *lines, ""]


def render_report(
    report: ExperimentReport,
    params: Mapping[str, object],
    input_digest: str | None = None,
    reseeds: ReseedSummary | None = None,
    sweep: Sequence[SweepRow] | None = None,
) -> str:
    """
    Sections [params], [per-trial], [aggregate], [confusion] and
    [per-class-f1], plus [sweep] when an operator sweep is given.
    """
    head = [f"version = {__version__}"]
    head += [f"{key} = {_fmt(value)}" for key, value in sorted(params.items())]
    if input_digest:
        head.append(f"input_digest = {input_digest}")
    for channel, gamma in report.mean_gammas.items():
        head.append(f"gamma.{channel} = {gamma:.6g}")

    per_trial = [f"{t.trial} {t.accuracy:.6f}" for t in report.trials]

    low, high = report.interval
    aggregate = [
        f"trials = {len(report.trials)}",
        f"mean_accuracy = {report.mean_accuracy:.6f}",
        f"std_accuracy = {report.std_accuracy:.6f}",
        f"ci95 = {low:.6f} {high:.6f}",
        f"mean_f1 = {float(np.mean(report.mean_f1)):.6f}",
    ]
    if reseeds is not None and len(reseeds.means) > 1:
        r_low, r_high = reseeds.interval
        aggregate += [
            f"reseeds = {len(reseeds.means)}",
            f"reseed_mean_accuracy = {reseeds.mean:.6f}",
            f"reseed_median_accuracy = {reseeds.median_accuracy:.6f}",
            f"reseed_ci95 = {r_low:.6f} {r_high:.6f}",
        ]

    labels = [str(label) for label in report.labels]
    width = max(len(label) for label in labels)
    confusion = report.confusion
    matrix = [" ".join(["true\\pred".ljust(width), *labels])]
    for label, row in zip(labels, confusion):
        matrix.append(" ".join([label.ljust(width), *(str(int(v)) for v in row)]))

    precision = np.mean([t.precision for t in report.trials], axis=0)
    recall = np.mean([t.recall for t in report.trials], axis=0)
    f1 = [
        f"{label} precision={p:.6f} recall={r:.6f} f1={f:.6f}"
        for label, p, r, f in zip(labels, precision, recall, report.mean_f1)
    ]

    lines = []
    lines += _section("params", head)
    lines += _section("per-trial", per_trial)
    lines += _section("aggregate", aggregate)
    lines += _section("confusion", matrix)
    lines += _section("per-class-f1", f1)
    if sweep:
        lines += _section("sweep", render_sweep(sweep))
    return "\n".join(lines)


def render_sweep(rows: Sequence[SweepRow]) -> list[str]:
    out = []
    for row in rows:
        low, high = row.report.interval
        out.append(
            f"ops={row.ops.label} levels={row.levels} "
            f"mean_accuracy={row.report.mean_accuracy:.6f} ci95={low:.6f} {high:.6f}"
        )
    return out
