"""Parameter sweeps over lambda, epsilon, n_nodes and seed.

A grid spec is a ``;``-separated list of ``key=values`` items, where values
are comma-separated numbers or an inclusive integer range ``a..b``::

    seed=1..10;epsilon=0,1e-6
"""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Sequence

from ..errors import ConfigError
from .config import ExperimentConfig, NoiseSection, GridSection
from .run import run_experiment

__all__ = ["parse_grid", "apply_cell", "run_sweep", "AGGREGATE_FILE"]

SWEEP_KEYS = ("lambda", "epsilon", "n_nodes", "seed")
AGGREGATE_FILE = "aggregate.csv"


def _parse_values(key: str, text: str) -> List:
    text = text.strip()
    if ".." in text and "," not in text:
        lo, hi = text.split("..", 1)
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise ConfigError(f"grid: {key}: range bounds must be integers") from None
        if hi < lo:
            raise ConfigError(f"grid: {key}: empty range {text}")
        return list(range(lo, hi + 1))
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            out.append(int(tok) if key in ("n_nodes", "seed") else float(tok))
        except ValueError:
            raise ConfigError(f"grid: {key}: cannot parse {tok!r}") from None
    return out


def parse_grid(spec: str) -> Dict[str, List]:
    grid: Dict[str, List] = {}
    for item in filter(None, (s.strip() for s in spec.split(";"))):
        if "=" not in item:
            raise ConfigError(f"grid: expected key=values, got {item!r}")
        key, values = (s.strip() for s in item.split("=", 1))
        if key not in SWEEP_KEYS:
            raise ConfigError(f"grid: unknown key {key!r}; allowed {SWEEP_KEYS}")
        if key in grid:
            raise ConfigError(f"grid: duplicate key {key!r}")
        grid[key] = _parse_values(key, values)
    if not grid:
        raise ConfigError("grid: empty sweep")
    return grid


def apply_cell(base: ExperimentConfig, cell: Dict) -> ExperimentConfig:
    cfg = replace(base)
    if "lambda" in cell:
        cfg.lam = float(cell["lambda"])
    if "epsilon" in cell:
        eps = float(cell["epsilon"])
        cfg.noise = NoiseSection(eps > 0, eps, base.noise.controller_sees_noise)
    if "n_nodes" in cell:
        cfg.grid = GridSection(base.grid.Z, int(cell["n_nodes"]))
    if "seed" in cell:
        cfg.seed = int(cell["seed"])
    return cfg.validate()


def _cells(grid: Dict[str, Sequence]) -> List[Dict]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _run_cell(args):
    cfg, out = args
    try:
        s = run_experiment(cfg, out_dir=out)
    except Exception as exc:  # isolate the pool from any cell crash
        return {"status": f"failed: {type(exc).__name__}: {exc}"}
    return {
        "status": "ok" if s.ok else "; ".join(f"{m} {v}" for m, v in s.status.items() if v != "ok"),
        "total_cost_uncontrolled": s.total_cost_uncontrolled,
        "total_cost_controlled": s.total_cost_controlled,
        "cost_ratio": s.cost_ratio,
        "final_mean_uptake_uncontrolled": s.final_mean_uptake.get("uncontrolled"),
        "final_mean_uptake_controlled": s.final_mean_uptake.get("controlled"),
    }


RESULT_COLUMNS = ["status", "total_cost_uncontrolled", "total_cost_controlled", "cost_ratio",
                  "final_mean_uptake_uncontrolled", "final_mean_uptake_controlled"]


def run_sweep(base: ExperimentConfig, grid: Dict[str, Sequence], out_dir,
              max_workers=None) -> List[Dict]:
    """Run every grid cell in a process pool and write ``aggregate.csv``.

    Returns one row per cell (cell parameters plus result columns).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = _cells(grid)
    jobs = [(apply_cell(base, c), out / f"cell_{i:03d}") for i, c in enumerate(cells)]
    workers = max_workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        results = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    rows = []
    for i, (cell, res) in enumerate(zip(cells, results)):
        rows.append({"cell": f"cell_{i:03d}", **cell, **{k: res.get(k) for k in RESULT_COLUMNS}})
    with open(out / AGGREGATE_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["cell", *grid.keys(), *RESULT_COLUMNS])
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})
    return rows
