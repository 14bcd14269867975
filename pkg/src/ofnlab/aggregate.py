"""Cross-seed, cross-task aggregation of final evaluation returns.

Scores are pooled over (seed x task) per configuration cell and summarized
by mean, interquartile mean, and median with 95% percentile-bootstrap
confidence intervals. The bootstrap resample count and seed are recorded in
the report so the whole computation is a pure function of its inputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .harness import load_run

REPORT_VERSION = 1
DEFAULT_BOOTSTRAP = 2000


def iqm(values) -> float:
    """Interquartile mean: drop the lowest and highest quarter, average the rest."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    n = values.size
    if n == 0:
        raise ContractViolation("iqm of empty sequence")
    k = n // 4
    return float(values[k:n - k].mean())


def median(values) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


def bootstrap_ci(values, statistic, n_resamples: int,
                 rng: np.random.Generator) -> tuple[float, float]:
    """95% percentile bootstrap interval for a statistic of the pooled scores."""
    values = np.asarray(values, dtype=np.float64)
    stats = np.empty(n_resamples)
    n = values.size
    for i in range(n_resamples):
        stats[i] = statistic(values[rng.integers(0, n, size=n)])
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return float(lo), float(hi)


def final_return(records) -> float | None:
    """Last recorded evaluation return of a run, None if it never evaluated."""
    for record in reversed(records):
        if record.eval_return is not None:
            return float(record.eval_return)
    return None


def aggregate(run_dirs, n_resamples: int = DEFAULT_BOOTSTRAP,
              bootstrap_seed: int = 0) -> dict:
    """Build the aggregate report over completed run directories.

    Unreadable or evaluation-free runs are listed under "excluded" and left
    out of the statistics; they are never imputed.
    """
    cells: dict[str, dict] = {}
    excluded = []
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        try:
            cfg, records = load_run(run_dir)
        except Exception as err:  # noqa: BLE001 - report and move on
            excluded.append({"dir": str(run_dir), "reason": str(err)})
            continue
        score = final_return(records)
        if score is None:
            excluded.append({"dir": str(run_dir),
                             "reason": "no evaluation records"})
            continue
        cell = cells.setdefault(cfg.config_id(), {
            "scores": [], "tasks": set(), "curves": {}, "n_runs": 0})
        cell["scores"].append(score)
        cell["n_runs"] += 1
        task = cfg.experiment.env_name
        cell["tasks"].add(task)
        curve = cell["curves"].setdefault(task, {})
        for record in records:
            if record.eval_return is not None:
                curve.setdefault(record.env_step, []).append(record.eval_return)

    rng = np.random.default_rng(bootstrap_seed)
    configs = {}
    for config_id in sorted(cells):
        cell = cells[config_id]
        scores = np.asarray(cell["scores"], dtype=np.float64)
        stats = {"mean": float(scores.mean()), "iqm": iqm(scores),
                 "median": median(scores)}
        ci95 = {name: list(bootstrap_ci(scores, fn, n_resamples, rng))
                for name, fn in (("mean", np.mean), ("iqm", iqm),
                                 ("median", median))}
        curves = {}
        for task, by_step in sorted(cell["curves"].items()):
            points = []
            for step in sorted(by_step):
                vals = np.asarray(by_step[step], dtype=np.float64)
                stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) \
                    if vals.size > 1 else 0.0
                points.append({"env_step": int(step), "mean": float(vals.mean()),
                               "stderr": stderr})
            curves[task] = points
        configs[config_id] = {
            "n_runs": cell["n_runs"],
            "tasks": sorted(cell["tasks"]),
            "final_returns": [float(s) for s in cell["scores"]],
            **stats,
            "ci95": ci95,
            "curves": curves,
        }

    return {
        "format_version": REPORT_VERSION,
        "bootstrap": {"n_resamples": n_resamples, "seed": bootstrap_seed},
        "configs": configs,
        "excluded": excluded,
    }


def save_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# tidy CSV export for the plotting frontend

_SCALAR_METRICS = ("eval_return", "mean_q_in_dist", "critic_loss", "actor_loss",
                   "alpha", "adam_m_norm", "adam_v_norm", "srank")


def export_plot_data(run_dirs, out_path) -> int:
    """Write long-format rows (config_id, task, seed, env_step, metric, value).

    Layer norms expand to layer{i}_norm / head_norm metrics; grad_step and
    diverged are included as metric rows so priming curves can be plotted
    against gradient steps. Returns the number of data rows written.
    """
    rows = 0
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_id", "task", "seed", "env_step", "metric", "value"])
        for run_dir in run_dirs:
            cfg, records = load_run(run_dir)
            base = [cfg.config_id(), cfg.experiment.env_name, cfg.experiment.seed]
            for record in records:
                values = [("grad_step", record.grad_step),
                          ("diverged", int(record.diverged))]
                for name in _SCALAR_METRICS:
                    values.append((name, getattr(record, name)))
                norms = record.layer_norms
                for i, norm in enumerate(norms[:-1]):
                    values.append((f"layer{i + 1}_norm", norm))
                if norms:
                    values.append(("head_norm", norms[-1]))
                for metric, value in values:
                    if value is None:
                        continue
                    writer.writerow(base + [record.env_step, metric, repr(value)
                                            if isinstance(value, float) else value])
                    rows += 1
    return rows
