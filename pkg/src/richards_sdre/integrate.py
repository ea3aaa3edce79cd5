"""Adaptive TR-BDF2 time stepping of the open- or closed-loop system.

The control is a sample-and-hold signal: it is recomputed from the current
state at the start of each accepted step and held fixed across the step
(and across any rejected trials of that step). Conductivity noise
``K (1 + eps * eta)`` draws one ``eta ~ U[0, 1]`` per accepted step from a
generator keyed on ``(seed, step index)``, so a trajectory is a pure
function of its configuration.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg as sla

from .cost import CostModel, running_cost, total_cost
from .discretize import SemidiscreteSystem, rhs
from .errors import (
    AdmissibilityError,
    ConvergenceError,
    IntegrationError,
    InvalidInputError,
    StabilizabilityError,
)
from .riccati import solve_sdre_step

__all__ = [
    "IntegratorConfig",
    "NoiseConfig",
    "SimulationRecord",
    "StepResult",
    "step",
    "simulate",
    "mean_uptake",
    "noise_multiplier",
]

log = logging.getLogger(__name__)

GAMMA = 2.0 - math.sqrt(2.0)
DIAG = GAMMA / 2.0  # shared implicit coefficient of both stages
W = math.sqrt(2.0) / 4.0
# embedded error estimate weights on (f_n, f_gamma, f_{n+1})
ERR_W = ((1.0 - 4.0 * W) / 3.0, 1.0 / 3.0, -2.0 * DIAG / 3.0)

ADMISSIBLE_MAX = -1e-6
MAX_GAIN_REUSE = 10


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 1000.0
    dt_init: float = 1e-4
    dt_min: float = 1e-10
    dt_max: float = 2.0
    newton_tol: float = 1e-3
    newton_max_iter: int = 8
    step_rtol: float = 1e-5
    step_atol: float = 1e-6
    control_mode: str = "sdre"
    control_update: str = "per-accepted-step"
    controller_sees_noise: bool = True

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max <= self.t_end:
            raise InvalidInputError("need 0 < dt_min <= dt_init <= dt_max <= t_end")
        for name in ("newton_tol", "step_rtol", "step_atol"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be > 0")
        if self.newton_max_iter < 1:
            raise InvalidInputError("newton_max_iter must be >= 1")
        if self.control_mode not in ("uncontrolled", "sdre"):
            raise InvalidInputError(f"unknown control_mode {self.control_mode!r}")
        if self.control_update != "per-accepted-step":
            raise InvalidInputError(f"unknown control_update {self.control_update!r}")


@dataclass(frozen=True)
class NoiseConfig:
    enabled: bool = False
    epsilon: float = 0.0
    seed: int = 0
    resample: str = "per-accepted-step"

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise InvalidInputError("epsilon must be >= 0")
        if self.resample != "per-accepted-step":
            raise InvalidInputError(f"unknown resample policy {self.resample!r}")


def noise_multiplier(noise: Optional[NoiseConfig], step_index: int) -> float:
    """Conductivity multiplier ``1 + eps * eta_k`` for accepted step ``k``."""
    if noise is None or not noise.enabled or noise.epsilon == 0.0:
        return 1.0
    eta = np.random.default_rng([int(noise.seed), int(step_index)]).random()
    return 1.0 + noise.epsilon * eta


@dataclass
class SimulationRecord:
    times: List[float] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    controls: List[float] = field(default_factory=list)
    running_costs: List[float] = field(default_factory=list)
    mean_uptake: List[float] = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def as_arrays(self):
        return (np.asarray(self.times), np.asarray(self.states),
                np.asarray(self.controls), np.asarray(self.running_costs),
                np.asarray(self.mean_uptake))


@dataclass
class StepResult:
    y_next: np.ndarray
    error_estimate: np.ndarray
    newton_iters: int


def _fd_jacobian(fun: Callable, y: np.ndarray, f0: np.ndarray) -> np.ndarray:
    n = len(y)
    J = np.empty((n, n))
    delta = np.sqrt(np.finfo(float).eps) * np.maximum(np.abs(y), 1.0)
    for j in range(n):
        yp = y.copy()
        yp[j] += delta[j]
        J[:, j] = (fun(yp) - f0) / (yp[j] - y[j])
    return J


def _wnorm(v, scale):
    return float(np.sqrt(np.mean((v / scale) ** 2)))


def _newton(fun, lu, base, z0, hd, scale, tol, max_iter):
    """Solve ``z - hd * fun(z) = base`` by modified Newton with a fixed LU."""
    z = z0.copy()
    fz = fun(z)
    for it in range(1, max_iter + 1):
        dz = sla.lu_solve(lu, -(z - hd * fz - base))
        z = z + dz
        if not np.all(np.isfinite(z)):
            break
        fz = fun(z)
        if _wnorm(dz, scale) <= tol:
            return z, fz, it
        # a residual at roundoff level means the update solved the system
        # outright (linear problems)
        if _wnorm(z - hd * fz - base, scale) <= tol * 1e-3:
            return z, fz, it
    raise ConvergenceError("Newton iteration did not converge")


def step(sys: SemidiscreteSystem, cfg: IntegratorConfig, noise: Optional[NoiseConfig],
         t: float, y, u_held: float, dt: float, k_modifier: Optional[float] = None,
         source: Optional[Callable] = None, jac: Optional[np.ndarray] = None) -> StepResult:
    """One TR-BDF2 step of size ``dt`` with frozen control and noise.

    Raises
    ------
    ConvergenceError
        Newton failed; the caller should shrink ``dt``.
    """
    y = np.asarray(y, dtype=float)
    km = 1.0 if k_modifier is None else k_modifier

    def fun_at(tt):
        return lambda v: rhs(sys, tt, v, u_held, km, source)

    f_n = fun_at(t)(y)
    J = _fd_jacobian(fun_at(t), y, f_n) if jac is None else jac
    hd = DIAG * dt
    lu = sla.lu_factor(np.eye(len(y)) - hd * J)
    scale = cfg.step_atol + cfg.step_rtol * np.abs(y)

    t_g = t + GAMMA * dt
    base_g = y + hd * f_n
    y_g, f_g, it1 = _newton(fun_at(t_g), lu, base_g, y + GAMMA * dt * f_n, hd,
                            scale, cfg.newton_tol, cfg.newton_max_iter)
    # BDF2 stage: y1 - hd f(y1) = [y_g - (1-g)^2 y] / (g (2-g))
    base_1 = (y_g - (1.0 - GAMMA) ** 2 * y) / (GAMMA * (2.0 - GAMMA))
    pred = y + dt * (W * f_n + W * f_g + DIAG * f_g)
    y1, f_1, it2 = _newton(fun_at(t + dt), lu, base_1, pred, hd,
                           scale, cfg.newton_tol, cfg.newton_max_iter)
    raw = dt * (ERR_W[0] * f_n + ERR_W[1] * f_g + ERR_W[2] * f_1)
    err = sla.lu_solve(lu, raw)
    return StepResult(y1, err, it1 + it2)


def mean_uptake(sys: SemidiscreteSystem, y, t: float) -> float:
    """Mean uptake over all grid nodes, the fixed bottom node included."""
    full = np.append(np.asarray(y, dtype=float), sys.boundary.bottom(t))
    return float(np.mean(sys.feddes.uptake(full)))


class _Controller:
    """Per-step SDRE synthesis with gain reuse on stabilizability failures."""

    def __init__(self, sys, cm):
        self.sys, self.cm = sys, cm
        self.gain = None
        self.failures = 0
        self.solves = 0
        self.reused = 0

    def __call__(self, t, y, km):
        try:
            u, sol = solve_sdre_step(self.sys, self.cm, t, y, km)
        except (StabilizabilityError, ConvergenceError) as exc:
            self.failures += 1
            self.reused += 1
            if self.gain is None or self.failures > MAX_GAIN_REUSE:
                raise
            log.warning("t=%.6g SDRE failed (%s); reusing previous gain", t, exc)
            return float(-self.gain @ y)
        self.failures = 0
        self.solves += 1
        c = self.sys.B  # mass entry 0 is 1
        self.gain = (c @ sol.Pi) / self.cm.lam
        log.debug("t=%.6g u=%.6g are_residual=%.3e abscissa=%.3e method=%s solve_s=%.2e",
                  t, u, sol.residual_norm, sol.closed_loop_spectral_abscissa,
                  sol.method, sol.solve_time)
        return u


def _check_admissible(t, y):
    if np.max(y) >= ADMISSIBLE_MAX:
        i = int(np.argmax(y))
        raise AdmissibilityError(
            f"t={t:.6g}: node {i} reached h={y[i]:.6g} >= {ADMISSIBLE_MAX} (saturation)")


def simulate(sys: SemidiscreteSystem, cm: CostModel, cfg: IntegratorConfig,
             noise: Optional[NoiseConfig] = None, y0=None,
             record: Optional[SimulationRecord] = None) -> SimulationRecord:
    """Integrate over ``[0, cfg.t_end]`` and record every accepted step.

    ``record`` may be passed in to retain the partial trajectory if the run
    aborts with an exception.
    """
    wall0 = time.perf_counter()
    rec = SimulationRecord() if record is None else record
    report_cm = CostModel(cm.feddes, cm.dz, cm.lam, include_fixed_bottom_node=True)
    controller = _Controller(sys, cm) if cfg.control_mode == "sdre" else None

    t = 0.0
    y = sys.boundary.initial_state(sys.grid) if y0 is None else np.array(y0, dtype=float)
    _check_admissible(t, y)
    dt = cfg.dt_init
    k = 0
    rejects = newton_fails = 0

    def control(t, y, km):
        if controller is None:
            return 0.0
        return controller(t, y, km if cfg.controller_sees_noise else 1.0)

    def push(t, y, u):
        rec.times.append(float(t))
        rec.states.append(y.copy())
        rec.controls.append(float(u))
        rec.running_costs.append(running_cost(report_cm, y, u, sys.boundary.bottom(t)))
        rec.mean_uptake.append(mean_uptake(sys, y, t))

    km = noise_multiplier(noise, k)
    u = control(t, y, km)
    push(t, y, u)
    while t < cfg.t_end:
        h = min(dt, cfg.t_end - t)
        last = h == cfg.t_end - t
        try:
            res = step(sys, cfg, noise, t, y, u, h, k_modifier=km)
        except (ConvergenceError, FloatingPointError, ZeroDivisionError):
            newton_fails += 1
            dt = h / 2.0
            if dt < cfg.dt_min:
                raise IntegrationError(f"step size underflow at t={t:.6g}")
            continue
        scale = cfg.step_atol + cfg.step_rtol * np.maximum(np.abs(y), np.abs(res.y_next))
        err = _wnorm(res.error_estimate, scale)
        if err > 1.0:
            rejects += 1
            dt = max(h * max(0.2, 0.9 * err ** (-1.0 / 3.0)), 0.0)
            if dt < cfg.dt_min:
                raise IntegrationError(f"step size underflow at t={t:.6g}")
            continue
        t = cfg.t_end if last else t + h
        y = res.y_next
        k += 1
        _check_admissible(t, y)
        km = noise_multiplier(noise, k)
        u = control(t, y, km)
        push(t, y, u)
        factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** (-1.0 / 3.0))
        dt = min(cfg.dt_max, max(cfg.dt_min, h * max(0.2, factor)))

    rec.totals = {
        "total_cost": total_cost(rec.running_costs, rec.times),
        "accepted_steps": k,
        "rejected_steps": rejects,
        "newton_failures": newton_fails,
        "sdre_solves": controller.solves if controller else 0,
        "gain_reuses": controller.reused if controller else 0,
        "wall_time": time.perf_counter() - wall0,
    }
    return rec
