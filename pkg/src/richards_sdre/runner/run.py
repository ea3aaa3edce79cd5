"""Execute an experiment configuration and persist its artifacts.

Each run directory holds one CSV time series per simulated mode, a JSON
summary and a plain-text log with the per-step Riccati diagnostics.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .. import __version__
from ..cost import total_cost
from ..errors import RichardsSDREError
from ..integrate import SimulationRecord, simulate
from .config import ExperimentConfig

__all__ = ["RunSummary", "run_experiment", "csv_header", "write_csv", "read_csv"]

log = logging.getLogger("richards_sdre")

SUMMARY_FILE = "summary.json"
LOG_FILE = "run.log"


@dataclass
class RunSummary:
    """Headline numbers of a (paired) run.

    ``cost_ratio`` is uncontrolled over controlled total cost and is only
    set when both runs completed.
    """

    total_cost_controlled: Optional[float] = None
    total_cost_uncontrolled: Optional[float] = None
    cost_ratio: Optional[float] = None
    final_mean_uptake: Dict[str, float] = field(default_factory=dict)
    wall_time: Dict[str, float] = field(default_factory=dict)
    step_counts: Dict[str, dict] = field(default_factory=dict)
    status: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    records: Dict[str, SimulationRecord] = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return all(s == "ok" for s in self.status.values())

    def to_dict(self, cfg: ExperimentConfig) -> dict:
        return {
            "name": cfg.name,
            "version": __version__,
            "seed": self.seed,
            "status": self.status,
            "total_cost_uncontrolled": self.total_cost_uncontrolled,
            "total_cost_controlled": self.total_cost_controlled,
            "cost_ratio": self.cost_ratio,
            "final_mean_uptake": self.final_mean_uptake,
            "step_counts": self.step_counts,
            "wall_time": self.wall_time,
            "config": cfg.to_dict(),
        }


def csv_header(d: int):
    return ["t"] + [f"y{i}" for i in range(d)] + ["u", "running_cost", "mean_uptake"]


def write_csv(path, rec: SimulationRecord, d: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(d))
        for t, y, u, c, s in zip(rec.times, rec.states, rec.controls,
                                 rec.running_costs, rec.mean_uptake):
            w.writerow([repr(float(v)) for v in (t, *y, u, c, s)])


def read_csv(path):
    """Return ``(header, data)`` with ``data`` a float array (one row per step)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))


def _attach_log(out: Path):
    handler = logging.FileHandler(out / LOG_FILE, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler.setLevel(logging.DEBUG)
    log.addHandler(handler)
    prev = log.level
    log.setLevel(logging.DEBUG)
    return handler, prev


def run_experiment(cfg: ExperimentConfig, out_dir=None, figures: Optional[bool] = None,
                   write: bool = True) -> RunSummary:
    """Simulate every mode requested by ``cfg``; failures are recorded, not raised.

    Parameters
    ----------
    cfg : ExperimentConfig
    out_dir : path-like, optional
        Overrides ``cfg.output.dir``.
    figures : bool, optional
        Overrides ``cfg.output.figures``.
    write : bool
        Persist CSV, summary, log (and figures). ``False`` keeps everything
        in memory, which the test-suite uses.
    """
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    figures = cfg.output.figures if figures is None else figures
    summary = RunSummary(seed=cfg.seed)
    handler = None
    if write:
        out.mkdir(parents=True, exist_ok=True)
        handler, prev_level = _attach_log(out)
    try:
        sys = cfg.build_system()
        cm = cfg.build_cost(sys)
        noise = cfg.build_noise()
        for mode in cfg.modes():
            rec = SimulationRecord()
            t0 = time.perf_counter()
            log.info("%s: starting %s run (seed %d)", cfg.name, mode, cfg.seed)
            try:
                simulate(sys, cm, cfg.build_integrator(mode), noise, record=rec)
                summary.status[mode] = "ok"
            except (RichardsSDREError, ArithmeticError, np.linalg.LinAlgError) as exc:
                summary.status[mode] = f"failed: {type(exc).__name__}: {exc}"
                log.error("%s: %s run failed: %s: %s", cfg.name, mode, type(exc).__name__, exc)
            summary.wall_time[mode] = time.perf_counter() - t0
            summary.records[mode] = rec
            _collect(summary, mode, rec)
            if write:
                write_csv(out / f"{mode}.csv", rec, sys.d)
        u, c = summary.total_cost_uncontrolled, summary.total_cost_controlled
        if summary.ok and u is not None and c is not None and c > 0:
            summary.cost_ratio = u / c
        if write:
            text = json.dumps(summary.to_dict(cfg), indent=2, sort_keys=False)
            (out / SUMMARY_FILE).write_text(text + "\n", encoding="utf-8")
            if figures:
                from .plotting import render_run
                render_run(summary.records, sys, out, title=cfg.name)
    finally:
        if handler is not None:
            log.removeHandler(handler)
            log.setLevel(prev_level)
            handler.close()
    return summary


def _collect(summary: RunSummary, mode: str, rec: SimulationRecord) -> None:
    if rec.totals:
        total = rec.totals["total_cost"]
        counts = {k: v for k, v in rec.totals.items() if k not in ("total_cost", "wall_time")}
    else:
        # aborted: integrate what was recorded
        total = total_cost(rec.running_costs, rec.times) if rec.times else None
        counts = {"accepted_steps": max(len(rec.times) - 1, 0)}
    counts["t_final"] = rec.times[-1] if rec.times else None
    summary.step_counts[mode] = counts
    if rec.mean_uptake:
        summary.final_mean_uptake[mode] = rec.mean_uptake[-1]
    if mode == "controlled":
        summary.total_cost_controlled = total
    else:
        summary.total_cost_uncontrolled = total
