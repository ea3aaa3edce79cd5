"""SDRE boundary feedback for the 1-D Richards equation with root water uptake."""

import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

from .cost import CostModel  # noqa: E402
from .discretize import BoundaryData, Grid, SemidiscreteSystem  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .hydraulics import FeddesParams, GardnerParams, HaverkampParams  # noqa: E402
from .integrate import IntegratorConfig, NoiseConfig, SimulationRecord, simulate  # noqa: E402
from .riccati import AreProblem, solve_are, solve_sdre_step  # noqa: E402

__all__ = [
    "CostModel",
    "BoundaryData",
    "Grid",
    "SemidiscreteSystem",
    "FeddesParams",
    "GardnerParams",
    "HaverkampParams",
    "IntegratorConfig",
    "NoiseConfig",
    "SimulationRecord",
    "simulate",
    "AreProblem",
    "solve_are",
    "solve_sdre_step",
]
