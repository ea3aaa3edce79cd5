"""Constitutive relations for unsaturated flow.

Two retention/conductivity closures are provided (Haverkamp and Gardner)
together with the piecewise-linear Feddes root water uptake sink. Every
function accepts a scalar or an array of pressure heads in cm and returns
a value of the same shape.

For h > 0 both closures are evaluated at h = 0 (saturation), so that
``theta_r <= theta <= theta_S`` and ``0 < K <= K_S`` always hold; the
capacity is zero there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "HaverkampParams",
    "GardnerParams",
    "FeddesParams",
    "HydraulicModel",
    "theta",
    "conductivity",
    "capacity",
    "uptake",
]


def _as_head(h):
    arr = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("pressure head must be finite")
    return arr


def _ret(arr):
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class HaverkampParams:
    """Haverkamp retention and conductivity parameters.

    Defaults are the sand parameters used for the Haverkamp experiments.
    """

    K_S: float = 34.0
    A_const: float = 1.175e6
    alpha: float = 1.611e6
    theta_S: float = 0.287
    theta_r: float = 0.075
    beta1: float = 4.74
    beta2: float = 3.96

    kind = "haverkamp"

    def __post_init__(self):
        vals = [self.K_S, self.A_const, self.alpha, self.theta_S, self.theta_r,
                self.beta1, self.beta2]
        if not all(np.isfinite(vals)):
            raise InvalidInputError("Haverkamp parameters must be finite")
        if not self.theta_r < self.theta_S:
            raise InvalidInputError("theta_r must be < theta_S")
        for name in ("K_S", "A_const", "alpha", "beta1", "beta2"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be > 0")

    def theta(self, h):
        s = np.abs(np.minimum(_as_head(h), 0.0))
        out = self.alpha * (self.theta_S - self.theta_r) / (self.alpha + s**self.beta2)
        return _ret(out + self.theta_r)

    def conductivity(self, h):
        s = np.abs(np.minimum(_as_head(h), 0.0))
        return _ret(self.K_S * self.A_const / (self.A_const + s**self.beta1))

    def capacity(self, h):
        h = _as_head(h)
        s = np.abs(np.minimum(h, 0.0))
        b = self.beta2
        # d/dh of theta for h < 0 (d|h|/dh = -1)
        num = self.alpha * (self.theta_S - self.theta_r) * b * s ** (b - 1.0)
        out = num / (self.alpha + s**b) ** 2
        return _ret(np.where(h > 0, 0.0, out))


@dataclass(frozen=True)
class GardnerParams:
    """Gardner exponential retention and conductivity parameters."""

    rho: float = 0.1
    K_S: float = 1.0
    theta_S: float = 0.48
    theta_r: float = 0.0

    kind = "gardner"

    def __post_init__(self):
        if not all(np.isfinite([self.rho, self.K_S, self.theta_S, self.theta_r])):
            raise InvalidInputError("Gardner parameters must be finite")
        if self.rho <= 0:
            raise InvalidInputError("rho must be > 0")
        if self.K_S <= 0:
            raise InvalidInputError("K_S must be > 0")
        if not self.theta_r < self.theta_S:
            raise InvalidInputError("theta_r must be < theta_S")

    def theta(self, h):
        e = np.exp(self.rho * np.minimum(_as_head(h), 0.0))
        return _ret(self.theta_r + (self.theta_S - self.theta_r) * e)

    def conductivity(self, h):
        return _ret(self.K_S * np.exp(self.rho * np.minimum(_as_head(h), 0.0)))

    def capacity(self, h):
        h = _as_head(h)
        out = self.rho * (self.theta_S - self.theta_r) * np.exp(self.rho * np.minimum(h, 0.0))
        return _ret(np.where(h > 0, 0.0, out))


HydraulicModel = Union[HaverkampParams, GardnerParams]


@dataclass(frozen=True)
class FeddesParams:
    """Feddes uptake thresholds (cm) and maximal uptake rate.

    The sink is ``S_max`` on the plateau ``[h3, h2]``, ramps linearly to
    zero at ``h1`` (too wet) and ``h4`` (too dry), and vanishes outside
    ``(h4, h1)``.
    """

    h1: float = 0.0
    h2: float = -30.0
    h3: float = -50.0
    h4: float = -80.0
    S_max: float = 0.01 / 80.0

    def __post_init__(self):
        if not all(np.isfinite([self.h1, self.h2, self.h3, self.h4, self.S_max])):
            raise InvalidInputError("Feddes parameters must be finite")
        if not self.h4 < self.h3 < self.h2 < self.h1:
            raise InvalidInputError("Feddes thresholds must satisfy h4 < h3 < h2 < h1")
        if self.S_max <= 0:
            raise InvalidInputError("S_max must be > 0")

    def stress(self, h):
        """Dimensionless stress factor R(h) in [0, 1]."""
        h = _as_head(h)
        r = np.zeros_like(h)
        wet = (h > self.h2) & (h < self.h1)
        dry = (h > self.h4) & (h < self.h3)
        r = np.where(wet, (h - self.h1) / (self.h2 - self.h1), r)
        r = np.where(dry, (h - self.h4) / (self.h3 - self.h4), r)
        r = np.where((h >= self.h3) & (h <= self.h2), 1.0, r)
        return _ret(r)

    def uptake(self, h):
        return _ret(self.S_max * np.asarray(self.stress(h)))


def theta(model: HydraulicModel, h):
    """Volumetric water content at pressure head ``h``."""
    return model.theta(h)


def conductivity(model: HydraulicModel, h):
    """Unsaturated hydraulic conductivity at pressure head ``h``."""
    return model.conductivity(h)


def capacity(model: HydraulicModel, h):
    """Soil water capacity, the analytic derivative of :func:`theta`."""
    return model.capacity(h)


def uptake(params: FeddesParams, h):
    """Feddes root water uptake rate at pressure head ``h``."""
    return params.uptake(h)
