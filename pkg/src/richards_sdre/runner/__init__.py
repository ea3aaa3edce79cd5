"""Experiment configuration, execution, sweeps and the command line."""

from .config import PRESETS, ExperimentConfig, dump_config, load_config, loads_config, preset
from .run import RunSummary, run_experiment

__all__ = [
    "PRESETS",
    "ExperimentConfig",
    "dump_config",
    "load_config",
    "loads_config",
    "preset",
    "RunSummary",
    "run_experiment",
]
