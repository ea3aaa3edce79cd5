"""Quadratic-in-form running cost for the uptake tracking problem.

The tracking integrand ``|S(h) - S_max|^2`` is rewritten node by node as
``q(y_i) y_i^2`` with a state-dependent weight ``q``, giving the diagonal
matrix ``Q(y) = S_max^2 dz (Q1 + Q2 + Q3)`` used by the Riccati synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InvalidInputError, UndefinedWeightError
from .hydraulics import FeddesParams

__all__ = [
    "CostModel",
    "CostAccumulator",
    "node_weights",
    "assemble_Q",
    "state_cost",
    "running_cost",
    "total_cost",
]


@dataclass(frozen=True)
class CostModel:
    feddes: FeddesParams
    dz: float
    lam: float = 1e-5
    include_fixed_bottom_node: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError("lambda must be > 0")
        if not (np.isfinite(self.dz) and self.dz > 0):
            raise InvalidInputError("dz must be > 0")

    @property
    def prefactor(self) -> float:
        return self.feddes.S_max**2 * self.dz


def node_weights(feddes: FeddesParams, y) -> np.ndarray:
    """Diagonal of ``Q1 + Q2 + Q3`` (without the ``S_max^2 dz`` prefactor)."""
    y = np.asarray(y, dtype=float)
    if np.any(y == 0.0):
        raise UndefinedWeightError("cost weight is undefined at a zero state component")
    h1, h2, h3, h4 = feddes.h1, feddes.h2, feddes.h3, feddes.h4
    inv, inv2 = 1.0 / y, 1.0 / y**2
    w = np.zeros_like(y)
    wet = (y > h2) & (y < h1)
    dry = (y > h4) & (y < h3)
    off = (y <= h4) | (y >= h1)
    w = np.where(wet, (1.0 + h2**2 * inv2 - 2.0 * h2 * inv) / (h2 - h1) ** 2, w)
    w = np.where(dry, (1.0 + h3**2 * inv2 - 2.0 * h3 * inv) / (h3 - h4) ** 2, w)
    w = np.where(off, inv2, w)
    return w


def assemble_Q(cm: CostModel, y) -> np.ndarray:
    """State-dependent diagonal weight matrix ``Q(y)``."""
    return np.diag(cm.prefactor * node_weights(cm.feddes, y))


def state_cost(cm: CostModel, y, h_bottom: Optional[float] = None) -> float:
    """``y^T Q(y) y``, plus the fixed bottom node when requested and given."""
    y = np.asarray(y, dtype=float)
    if cm.include_fixed_bottom_node and h_bottom is not None:
        y = np.append(y, h_bottom)
    return float(cm.prefactor * np.sum(node_weights(cm.feddes, y) * y * y))


def running_cost(cm: CostModel, y, u: float, h_bottom: Optional[float] = None) -> float:
    """``y^T Q(y) y + lambda u^2``."""
    return state_cost(cm, y, h_bottom) + cm.lam * float(u) ** 2


def total_cost(series, timestamps) -> float:
    """Trapezoidal integral of a running-cost series."""
    series = np.asarray(series, dtype=float)
    timestamps = np.asarray(timestamps, dtype=float)
    if series.shape != timestamps.shape or series.ndim != 1:
        raise InvalidInputError("series and timestamps must be 1-D with equal length")
    if len(series) == 0:
        raise InvalidInputError("empty series")
    if np.any(np.diff(timestamps) <= 0):
        raise InvalidInputError("timestamps must be strictly increasing")
    if len(series) == 1:
        return 0.0
    return float(np.sum(0.5 * (series[1:] + series[:-1]) * np.diff(timestamps)))


@dataclass
class CostAccumulator:
    """Running-cost samples and their trapezoidal total, updated incrementally."""

    times: List[float] = field(default_factory=list)
    running: List[float] = field(default_factory=list)
    total: float = 0.0

    def append(self, t: float, value: float) -> None:
        if value < 0 or not np.isfinite(value):
            raise InvalidInputError("running cost must be finite and nonnegative")
        if self.times:
            if t <= self.times[-1]:
                raise InvalidInputError("times must be strictly increasing")
            self.total += 0.5 * (value + self.running[-1]) * (t - self.times[-1])
        self.times.append(float(t))
        self.running.append(float(value))
