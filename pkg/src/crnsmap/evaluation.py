"""Scoring and aggregation of repeated seeded missions."""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .exploration import MissionConfig, run_mission
from .metrics import mse

__all__ = ["mse", "AggregateCurve", "aggregate_runs", "Cell", "compare_conditions"]

TIME = "time"
DISTANCE = "distance"
DEFAULT_STEP = {TIME: 60.0, DISTANCE: 10.0}


@dataclass(frozen=True)
class AggregateCurve:
    abscissa_kind: str
    abscissa: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_runs: int
    support: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([self.abscissa_kind, "mean_mse", "std_mse", "n_runs"])
        for a, m, s, c in zip(self.abscissa, self.mean, self.std, self.support):
            writer.writerow([repr(float(a)), repr(float(m)), repr(float(s)), int(c)])
        return buf.getvalue()


def _step_curve(log, kind):
    pts = log.curve()
    x = np.array([p.elapsed if kind == TIME else p.distance for p in pts], dtype=float)
    y = np.array([p.mse for p in pts], dtype=float)
    return x, y


def _locf(x, y, grid):
    """Last observation carried forward; NaN before the first observation."""
    idx = np.searchsorted(x, grid, side="right") - 1
    out = np.full(len(grid), np.nan)
    ok = idx >= 0
    out[ok] = y[idx[ok]]
    return out


def aggregate_runs(logs, abscissa=TIME, grid_step=None, end=None):
    """Pointwise mean and population std of MSE across runs.

    Each run's MSE is a step curve over elapsed time (or travelled distance)
    sampled on ``0, step, 2*step, ...`` by carrying the last value forward. A
    grid point before a run's first model update has no value for that run;
    points with no value in any run are dropped. ``end`` beyond every run's
    last update is truncated to that support with a warning.
    """
    if not logs:
        raise ValueError("aggregate_runs needs at least one log")
    if abscissa not in (TIME, DISTANCE):
        raise ValueError(f"abscissa must be {TIME!r} or {DISTANCE!r}")
    step = DEFAULT_STEP[abscissa] if grid_step is None else float(grid_step)
    if not step > 0:
        raise ValueError("grid_step must be > 0")
    curves = [_step_curve(log, abscissa) for log in logs]
    if any(len(x) == 0 for x, _ in curves):
        raise ValueError("every run needs at least one model update")
    last = max(float(x[-1]) for x, _ in curves)
    if end is None:
        end = last
    elif end > last:
        warnings.warn(f"abscissa end {end} beyond run support {last}; truncating", stacklevel=2)
        end = last
    grid = step * np.arange(int(np.floor(end / step + 1e-9)) + 1)
    samples = np.vstack([_locf(x, y, grid) for x, y in curves])
    support = np.sum(~np.isnan(samples), axis=0)
    keep = support > 0
    samples = samples[:, keep]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(samples, axis=0)
        std = np.nanstd(samples, axis=0)
    return AggregateCurve(abscissa, grid[keep], mean, std, len(logs), support[keep])


@dataclass(frozen=True)
class Cell:
    """One experiment condition: a named truth field with a mission config."""

    name: str
    field_name: str
    config: MissionConfig


def _run_one(args):
    config, truth = args
    try:
        return run_mission(config, truth), None
    except Exception as exc:  # recorded per cell, the matrix keeps going
        return None, f"{type(exc).__name__}: {exc}"


def run_cell(cell, fields, seeds, horizon=None, jobs=1):
    base = cell.config if horizon is None else replace(cell.config, horizon=float(horizon))
    tasks = [(replace(base, seed=int(s)), fields[cell.field_name]) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    logs = [r for r, _ in results if r is not None]
    errors = [{"seed": int(s), "error": e} for s, (_, e) in zip(seeds, results) if e is not None]
    return logs, errors


def _cell_summary(logs):
    final = np.array([log.footer["final_mse"] for log in logs if log.footer["final_mse"] is not None])
    dist = np.array([log.footer["distance"] for log in logs], dtype=float)
    n = np.array([log.footer["n_measurements"] for log in logs], dtype=float)
    meas_t = np.array([log.footer["measurement_time"] for log in logs], dtype=float)

    def stat(a):
        if a.size == 0:
            return {"mean": None, "std": None}
        return {"mean": float(a.mean()), "std": float(a.std())}

    return {
        "n_runs": len(logs),
        "final_mse": stat(final),
        "distance": stat(dist),
        "n_measurements": stat(n),
        "mean_measurement_duration": stat(meas_t / np.maximum(n, 1)),
    }


def compare_conditions(cells, fields, seeds, horizon=None, jobs=1, time_step=None, distance_step=None):
    """Run every cell for every seed and summarise.

    Returns ``(report, curves, logs)`` where ``report`` is a JSON-ready dict,
    ``curves[name]`` maps ``"time"``/``"distance"`` to :class:`AggregateCurve`
    and ``logs[name]`` holds the raw :class:`RunLog` list.
    """
    seeds = [int(s) for s in seeds]
    report = {
        "seeds": seeds,
        "horizon": None if horizon is None else float(horizon),
        "std_kind": "population",
        "cells": {},
        "pairwise": [],
        "failed": False,
    }
    curves, all_logs = {}, {}
    for cell in cells:
        if cell.name in report["cells"]:
            raise ValueError(f"duplicate cell name {cell.name!r}")
        try:
            logs, errors = run_cell(cell, fields, seeds, horizon, jobs)
        except Exception as exc:
            logs, errors = [], [{"seed": None, "error": f"{type(exc).__name__}: {exc}"}]
        entry = {
            "field": cell.field_name,
            "strategy": cell.config.strategy,
            "regime": cell.config.regime.to_dict(),
            "errors": errors,
        }
        if errors:
            report["failed"] = True
        if logs and all(log.records for log in logs):
            entry.update(_cell_summary(logs))
            curves[cell.name] = {
                "time": aggregate_runs(logs, TIME, time_step),
                "distance": aggregate_runs(logs, DISTANCE, distance_step),
            }
        elif logs:
            entry.update(_cell_summary(logs))
        report["cells"][cell.name] = entry
        all_logs[cell.name] = logs

    names = [c.name for c in cells]
    for a, b in combinations(names, 2):
        ca, cb = report["cells"][a], report["cells"][b]
        if "final_mse" not in ca or "final_mse" not in cb:
            continue
        fa, fb = ca["final_mse"]["mean"], cb["final_mse"]["mean"]
        report["pairwise"].append(
            {
                "a": a,
                "b": b,
                "final_mse_diff": None if fa is None or fb is None else fa - fb,
                "distance_diff": ca["distance"]["mean"] - cb["distance"]["mean"],
            }
        )
    return report, curves, all_logs


def report_json(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
