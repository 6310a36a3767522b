"""Diagnostic tables, hyperparameter sweeps and the estimator ablation grid.

Every table is a list of flat dicts; ``write_csv`` and ``write_jsonl`` turn
them into files. Grid cells are independent training runs and may be spread
over worker processes; results are always returned in grid order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .core_types import Estimator
from .episode_credit import zscore_closed_form
from .step_credit import SIZE_BINS
from .trainer import TrainConfig, train

ASYMMETRY_COLUMNS = ("p", "z_succ", "z_fail", "product_identity")
SINGLETON_COLUMNS = ("iteration", *SIZE_BINS)
CELL_COLUMNS = ("axis", "value", "estimator", "seed", "initial_success", "final_success", "error")
ABLATION_SUMMARY_COLUMNS = ("estimator", "mean_final_success", "std_final_success", "n_ok", "n_failed")
SWEEP_AXES = ("alpha", "beta", "tau")


def parse_grid(text: str) -> list[float]:
    """``"start:stop:step"`` (inclusive) or a comma list."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def zscore_asymmetry_table(p_grid: Iterable[float]) -> list[dict[str, float]]:
    rows = []
    for p in p_grid:
        z_succ, z_fail = zscore_closed_form(p)
        mirror, _ = zscore_closed_form(1.0 - p)
        rows.append({"p": p, "z_succ": z_succ, "z_fail": z_fail, "product_identity": z_succ * mirror})
    return rows


def singleton_tracking(
    config: TrainConfig,
    checkpoints: Sequence[int] | None = None,
    first_step_only: bool = False,
) -> list[dict[str, float]]:
    """Exact-match group-size fractions per training iteration.

    With ``first_step_only`` only the shared initial observation of each
    group is binned, which isolates lexical noise from trajectory divergence.
    """
    report = train(replace(config, eval_episodes=0))
    prefix = "first_step_" if first_step_only else ""
    wanted = set(checkpoints) if checkpoints else None
    rows = []
    for rec in report.iterations:
        if wanted is None or rec["iteration"] in wanted:
            rows.append({"iteration": rec["iteration"], **{b: rec[prefix + b] for b in SIZE_BINS}})
    return rows


def noise_singleton_grid(
    base: TrainConfig, noise_levels: Sequence[float], iterations: int = 1, first_step_only: bool = False
) -> list[dict[str, float]]:
    """Mean singleton fraction over ``iterations`` at each observation-noise level."""
    rows = []
    for q in noise_levels:
        cfg = replace(base, iterations=iterations, env=replace(base.env, synonym_noise=q))
        table = singleton_tracking(cfg, first_step_only=first_step_only)
        row = {"synonym_noise": q}
        for b in SIZE_BINS:
            row[b] = float(np.mean([r[b] for r in table]))
        rows.append(row)
    return rows


def _run_cell(args: tuple[str, float, TrainConfig]) -> dict[str, Any]:
    axis, value, cfg = args
    cell: dict[str, Any] = {
        "axis": axis, "value": value, "estimator": cfg.estimator.value, "seed": cfg.seed,
        "initial_success": None, "final_success": None, "error": "",
    }
    try:
        report = train(cfg)
    except Exception as exc:  # one failed cell must not sink the grid
        cell["error"] = f"{type(exc).__name__}: {exc}"
        return cell
    cell["initial_success"] = report.initial_eval.success_rate
    cell["final_success"] = report.final_success
    return cell


def run_grid(jobs: list[tuple[str, float, TrainConfig]], workers: int = 1) -> list[dict[str, Any]]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_cell(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, jobs))


def with_axis(base: TrainConfig, axis: str, value: float) -> TrainConfig:
    if axis == "alpha":
        return replace(base, psc=replace(base.psc, alpha=value))
    if axis == "beta":
        return replace(base, psc=replace(base.psc, beta=value))
    if axis == "tau":
        return replace(base, psa=replace(base.psa, temperature=value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def sweep(
    axis: str,
    values: Sequence[float],
    base: TrainConfig,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> list[dict[str, Any]]:
    """One training run per (value, seed); rows ordered value-major."""
    if not values:
        raise ValueError("sweep needs at least one value")
    seeds = list(seeds if seeds is not None else base.seeds)
    jobs = [(axis, v, replace(with_axis(base, axis, v), seed=s)) for v in values for s in seeds]
    return run_grid(jobs, workers)


def ablation_grid(
    base: TrainConfig,
    seeds: Sequence[int] | None = None,
    estimators: Sequence[Estimator] = tuple(Estimator),
    workers: int = 1,
) -> list[dict[str, Any]]:
    """Every estimator under identical seeds and configs; rows ordered estimator-major."""
    seeds = list(seeds if seeds is not None else base.seeds)
    jobs = [("estimator", float("nan"), replace(base, estimator=e, seed=s)) for e in estimators for s in seeds]
    rows = run_grid(jobs, workers)
    for row in rows:
        row["value"] = ""
    return rows


def summarize_cells(cells: Sequence[dict[str, Any]], key: str = "estimator") -> list[dict[str, Any]]:
    """Mean and population std of final success per ``key`` value, in first-seen order."""
    groups: dict[Any, list[dict[str, Any]]] = {}
    for c in cells:
        groups.setdefault(c[key], []).append(c)
    out = []
    for k, rows in groups.items():
        ok = [r["final_success"] for r in rows if not r["error"]]
        out.append({
            key: k,
            "mean_final_success": float(np.mean(ok)) if ok else float("nan"),
            "std_final_success": float(np.std(ok)) if ok else float("nan"),
            "n_ok": len(ok),
            "n_failed": len(rows) - len(ok),
        })
    return out


def write_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_jsonl(rows: Iterable[dict[str, Any]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")
