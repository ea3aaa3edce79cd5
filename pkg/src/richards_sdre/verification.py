"""Oracle-backed property checks and manufactured-solution helpers.

Every check returns a :class:`Check` with the measured value and the
tolerance it is judged against; :func:`run_checks` drives them for the
``verify`` command.
"""

from __future__ import annotations

import filecmp
import json
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .cost import CostModel, state_cost
from .discretize import (
    BoundaryData,
    Grid,
    SemidiscreteSystem,
    assemble_factorization,
    flux_rhs,
    null_row,
    rhs,
)
from .hydraulics import FeddesParams, GardnerParams, HaverkampParams
from .integrate import IntegratorConfig, _fd_jacobian, step
from .riccati import AreProblem, _abscissa, newton_kleinman, solve_are

__all__ = [
    "Check",
    "ConstantModel",
    "manufactured_source",
    "mms_error",
    "CHECKS",
    "run_checks",
]


@dataclass
class Check:
    name: str
    tolerance: float
    measured: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return {"property": self.name, "tolerance": self.tolerance,
                "measured": self.measured,
                "verdict": "pass" if self.passed else "fail", "detail": self.detail}


@dataclass(frozen=True)
class ConstantModel:
    """Constant conductivity and capacity (the linear-conductivity regime)."""

    K_S: float = 1.0
    C: float = 1.0

    kind = "constant"

    def theta(self, h):
        return self.C * np.asarray(h, dtype=float)

    def conductivity(self, h):
        return np.full(np.shape(h), self.K_S)

    def capacity(self, h):
        return np.full(np.shape(h), self.C)


# Thresholds that keep every head in the manufactured range out of the sink.
NO_SINK = FeddesParams(h1=-100.0, h2=-110.0, h3=-120.0, h4=-130.0, S_max=1e-4)


def _dK(model, h):
    step_ = 1e-5 * np.maximum(1.0, np.abs(h))
    return (np.asarray(model.conductivity(h + step_))
            - np.asarray(model.conductivity(h - step_))) / (2 * step_)


def manufactured_source(model, feddes, Z, base=-50.0, amp=10.0, sigma=-1.0):
    """Exact solution ``h = base + amp sin(pi z / Z) exp(-t)`` and its source.

    The source ``g`` makes ``h`` solve ``C h_t = (K h_z)_z - sigma K_z - S + g``.

    Returns
    -------
    exact : callable ``(t, z) -> h``
    source : callable ``(t, z) -> g``
    """
    k = math.pi / Z

    def exact(t, z):
        return base + amp * np.sin(k * z) * np.exp(-t)

    def source(t, z):
        e = np.exp(-t)
        h = exact(t, z)
        h_t = -amp * np.sin(k * z) * e
        h_z = amp * k * np.cos(k * z) * e
        h_zz = -amp * k * k * np.sin(k * z) * e
        K = np.asarray(model.conductivity(h))
        dK = _dK(model, h)
        op = K * h_zz + dK * h_z**2 - sigma * dK * h_z - np.asarray(feddes.uptake(h))
        return np.asarray(model.capacity(h)) * h_t - op

    return exact, source


def mms_error(model, n_nodes, Z=1.0, t_end=1.0, dt=1e-3, base=-50.0, amp=10.0):
    """Max nodal error at ``t_end`` of the manufactured problem on ``n_nodes``."""
    exact, source = manufactured_source(model, NO_SINK, Z, base, amp)
    grid = Grid(Z, n_nodes)
    sys = SemidiscreteSystem(grid, model, NO_SINK, BoundaryData(h_T=base, h_B=base, h_0=base))
    cfg = IntegratorConfig(t_end=t_end, dt_init=dt, dt_max=dt, newton_tol=1e-10,
                           newton_max_iter=20)
    z = grid.z[: grid.d]
    y = exact(0.0, z)
    y[0] = base
    jac = _fd_jacobian(lambda v: rhs(sys, 0.0, v, 0.0, 1.0, source), y,
                       rhs(sys, 0.0, y, 0.0, 1.0, source))
    n_steps = int(round(t_end / dt))
    t = 0.0
    for _ in range(n_steps):
        y = step(sys, cfg, None, t, y, 0.0, dt, source=source, jac=jac).y_next
        t += dt
    return float(np.max(np.abs(y - exact(t_end, z))))


# -- individual checks -------------------------------------------------------

def _random_states(rng, n, d, lo=-150.0, hi=-0.5):
    return rng.uniform(lo, hi, size=(n, d))


def _systems(n_nodes=31):
    for model in (HaverkampParams(), GardnerParams()):
        yield SemidiscreteSystem(Grid(80.0, n_nodes), model, FeddesParams(), BoundaryData())


def check_factorization(n=1000, seed=0):
    """``A(y) y == f(y)`` relative to the scale of the products ``|A||y|``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    per = n // 2
    for sys in _systems():
        for y in _random_states(rng, per, sys.d):
            km = 1.0 + 1e-5 * rng.random()
            A, _ = assemble_factorization(sys, 0.0, y, km)
            f = flux_rhs(sys, 0.0, y, km)
            scale = np.max(np.abs(A) @ np.abs(y))
            worst = max(worst, np.max(np.abs(A @ y - f)) / scale)
    return Check("factorization_identity", 1e-12, worst, worst <= 1e-12,
                 f"{2 * per} random admissible states, both closures")


def check_null_row(n=1000, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for y in _random_states(rng, n, 30):
        worst = max(worst, abs(null_row(y) @ y) / (abs(y[0] * y[1])))
    return Check("null_row", 1e-13, worst, worst <= 1e-13, f"{n} random states")


def _direct_tracking(feddes, dz, y):
    # piecewise-linear uptake written out independently of hydraulics.py
    s = np.zeros_like(y)
    for i, h in enumerate(y):
        if feddes.h2 <= h < feddes.h1:
            s[i] = (feddes.h1 - h) / (feddes.h1 - feddes.h2)
        elif feddes.h3 <= h < feddes.h2:
            s[i] = 1.0
        elif feddes.h4 < h < feddes.h3:
            s[i] = (h - feddes.h4) / (feddes.h3 - feddes.h4)
    return dz * np.sum((feddes.S_max * s - feddes.S_max) ** 2)


def check_q_equivalence(n=1000, seed=2):
    rng = np.random.default_rng(seed)
    feddes = FeddesParams()
    cm = CostModel(feddes, 80.0 / 30)
    worst = 0.0
    for y in _random_states(rng, n, 30, lo=-120.0, hi=-0.5):
        direct = _direct_tracking(feddes, cm.dz, y)
        worst = max(worst, abs(state_cost(cm, y) - direct) / abs(direct))
    return Check("q_form_equivalence", 1e-12, worst, worst <= 1e-12, f"{n} random states")


def random_are_instance(rng, d, shift=1.0):
    """A random stabilizable instance with ``Q`` positive definite.

    ``A`` is a scaled Gaussian matrix (spectrum roughly in the unit disk)
    shifted by ``-shift I``, so a fraction of instances keeps unstable
    modes while ``||Pi||`` stays moderate.
    """
    A = rng.standard_normal((d, d)) / math.sqrt(d) - shift * np.eye(d)
    B = rng.standard_normal(d)
    M = rng.standard_normal((d, d))
    Q = M @ M.T / d + 1e-2 * np.eye(d)
    return AreProblem(A, B, Q, float(10 ** rng.uniform(-1, 1)))


def check_are(n=100, seed=3):
    rng = np.random.default_rng(seed)
    worst_res = worst_nk = 0.0
    n_unstable = 0
    dims = (2, 5, 10, 30)
    for i in range(n):
        prob = random_are_instance(rng, dims[i % len(dims)])
        sol = solve_are(prob)
        worst_res = max(worst_res, sol.residual_norm / (1 + np.linalg.norm(prob.Q, "fro")))
        P_nk = newton_kleinman(prob, sol.Pi)
        n_unstable += _abscissa(prob.A) > 0
        worst_nk = max(worst_nk, np.linalg.norm(P_nk - sol.Pi, "fro")
                       / np.linalg.norm(sol.Pi, "fro"))
    return [
        Check("are_residual", 1e-9, worst_res, worst_res <= 1e-9,
              f"{n} random instances ({n_unstable} with unstable A), d in {dims}, "
              "relative to 1+||Q||_F"),
        Check("are_schur_vs_newton_kleinman", 1e-8, worst_nk, worst_nk <= 1e-8,
              f"{n} random instances"),
    ]


def check_scalar_riccati():
    out = []
    for a, expected, name in ((0.0, 1.0, "scalar_riccati_a0"),
                              (1.0, 1.0 + math.sqrt(2.0), "scalar_riccati_a1")):
        sol = solve_are(AreProblem([[a]], [1.0], [[1.0]], 1.0))
        err = abs(sol.Pi[0, 0] - expected)
        out.append(Check(name, 1e-12, err, err <= 1e-12, f"expected {expected!r}"))
    return out


def check_mms(nodes=(31, 61, 121)):
    errs = [mms_error(ConstantModel(), n) for n in nodes]
    orders = [math.log(errs[i] / errs[i + 1]) / math.log((nodes[i + 1] - 1) / (nodes[i] - 1))
              for i in range(len(nodes) - 1)]
    worst = min(orders)
    return Check("mms_spatial_order", 1.9, worst, worst >= 1.9,
                 f"errors {[float(f'{e:.4g}') for e in errs]} on {list(nodes)} nodes")


def check_steady_state(n_steps=1000, head=-90.0):
    """Uniform head below the wilting point, no gravity gradient, no sink, u = 0."""
    sys = SemidiscreteSystem(Grid(), HaverkampParams(), FeddesParams(),
                             BoundaryData(h_T=head, h_B=head, h_0=head))
    cfg = IntegratorConfig()
    y0 = sys.boundary.initial_state(sys.grid)
    y, t = y0.copy(), 0.0
    for _ in range(n_steps):
        y = step(sys, cfg, None, t, y, 0.0, 1.0).y_next
        t += 1.0
    dev = float(np.max(np.abs(y - y0)) / abs(head))
    tol = 4 * np.finfo(float).eps
    return Check("steady_state_invariance", tol, dev, dev <= tol, f"{n_steps} steps of size 1")


def check_reproducibility(preset_name="test4", seed=7):
    from .runner.config import preset
    from .runner.run import SUMMARY_FILE, run_experiment

    cfg = preset(preset_name)
    cfg.seed = seed
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        for d in dirs:
            run_experiment(cfg, out_dir=d)
        mismatched = []
        for name in sorted(p.name for p in dirs[0].iterdir()):
            if name == SUMMARY_FILE:
                a, b = (json.loads((d / name).read_text()) for d in dirs)
                a.pop("wall_time"), b.pop("wall_time")
                same = a == b
            elif name.endswith(".csv"):
                same = filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False)
            else:
                continue
            if not same:
                mismatched.append(name)
    return Check("reproducibility", 0.0, float(len(mismatched)), not mismatched,
                 f"{preset_name} seed {seed}; differing files: {mismatched or 'none'}")


CHECKS: Dict[str, Callable] = {
    "factorization_identity": check_factorization,
    "null_row": check_null_row,
    "q_form_equivalence": check_q_equivalence,
    "are": check_are,
    "scalar_riccati": check_scalar_riccati,
    "mms_spatial_order": check_mms,
    "steady_state_invariance": check_steady_state,
    "reproducibility": check_reproducibility,
}


def run_checks(filter_: Optional[str] = None) -> List[Check]:
    results: List[Check] = []
    for name, fn in CHECKS.items():
        if filter_ and filter_ not in name:
            continue
        t0 = time.perf_counter()
        out = fn()
        for c in out if isinstance(out, list) else [out]:
            c.detail = f"{c.detail} ({time.perf_counter() - t0:.1f} s)".strip()
            results.append(c)
    return results
