"""Finite-difference semidiscretization with a dynamic top boundary.

Node ``i`` sits at depth ``z_i = i * dz`` for ``i = 0..d``. Nodes ``0..d-1``
form the state vector ``y``; node ``d`` carries the prescribed bottom head
``h_B(t)``. The top node obeys ``dy_0/dt = u`` and every interior node the
three-point conservative stencil

    C_i y_i' = [(K_{i-1}+K_i)(y_{i-1}-y_i) + (K_i+K_{i+1})(y_{i+1}-y_i)] / (2 dz^2)
               - sigma (K_{i+1}-K_{i-1}) / (2 dz) - S_i

with ``sigma = -1`` by default (gravity term enters as ``+(K_{i+1}-K_{i-1})/(2 dz)``).

The mass-free right-hand side ``f(y)`` admits the exact semilinear form
``f(y) = A(y) y`` built by :func:`assemble_factorization`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    FactorizationError,
    InvalidInputError,
    NumericalBlowupError,
    SingularCapacityError,
)
from .hydraulics import FeddesParams, HydraulicModel

__all__ = [
    "Grid",
    "BoundaryData",
    "SemidiscreteSystem",
    "flux_rhs",
    "rhs",
    "mass_matrix",
    "assemble_factorization",
    "null_row",
]

Schedule = Union[float, Sequence[Sequence[float]], Callable[[float], float]]


def _schedule_fn(spec: Schedule, name: str) -> Callable[[float], float]:
    """Turn a constant, a list of (x, value) knots or a callable into a callable."""
    if callable(spec):
        return spec
    if np.isscalar(spec):
        value = float(spec)
        if not np.isfinite(value):
            raise InvalidInputError(f"{name} must be finite")
        return lambda x: value
    knots = np.asarray(spec, dtype=float)
    if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) == 0:
        raise InvalidInputError(f"{name} must be a number or a list of (x, value) pairs")
    if not np.all(np.isfinite(knots)):
        raise InvalidInputError(f"{name} knots must be finite")
    if np.any(np.diff(knots[:, 0]) <= 0):
        raise InvalidInputError(f"{name} knot abscissae must be strictly increasing")
    xs, vs = knots[:, 0].copy(), knots[:, 1].copy()
    return lambda x: np.interp(x, xs, vs)


@dataclass(frozen=True)
class Grid:
    """Uniform vertical grid on ``[0, Z]`` with ``n_nodes`` nodes."""

    Z: float = 80.0
    n_nodes: int = 31

    def __post_init__(self):
        if not (np.isfinite(self.Z) and self.Z > 0):
            raise InvalidInputError("Z must be positive")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise InvalidInputError("n_nodes must be an integer >= 3")

    @property
    def dz(self) -> float:
        return self.Z / (self.n_nodes - 1)

    @property
    def d(self) -> int:
        return self.n_nodes - 1

    @property
    def z(self) -> np.ndarray:
        """Depths of all nodes, bottom node included."""
        return np.arange(self.n_nodes) * self.dz


@dataclass
class BoundaryData:
    """Top initial head, bottom head schedule and initial profile.

    ``h_B`` is a function of time and ``h_0`` a function of depth; both may
    be given as a constant or as piecewise-linear ``(x, value)`` knots.
    The initial state takes ``h_T`` at the top node and ``h_0(z_i)`` below.
    """

    h_T: float = -20.73
    h_B: Schedule = -61.5
    h_0: Schedule = -61.5
    _hb: Callable = field(init=False, repr=False)
    _h0: Callable = field(init=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.h_T):
            raise InvalidInputError("h_T must be finite")
        self._hb = _schedule_fn(self.h_B, "h_B")
        self._h0 = _schedule_fn(self.h_0, "h_0")

    def bottom(self, t: float) -> float:
        value = float(self._hb(t))
        if not np.isfinite(value):
            raise InvalidInputError(f"h_B({t}) is not finite")
        return value

    def initial_state(self, grid: Grid) -> np.ndarray:
        z = grid.z[: grid.d]
        y = np.array([float(self._h0(zi)) for zi in z])
        y[0] = self.h_T
        return y


@dataclass
class SemidiscreteSystem:
    grid: Grid
    model: HydraulicModel
    feddes: FeddesParams
    boundary: BoundaryData
    use_null_augmentation: bool = True
    gravity_sign: float = -1.0

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def B(self) -> np.ndarray:
        b = np.zeros(self.grid.d)
        b[0] = 1.0
        return b


def _check_state(sys: SemidiscreteSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (sys.d,):
        raise InvalidInputError(f"state must have shape ({sys.d},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("state must be finite")
    return y


def _conductivities(sys, t, y, k_modifier):
    full = np.append(y, sys.boundary.bottom(t))
    return full, np.asarray(sys.model.conductivity(full)) * k_modifier


def _parts(sys, t, y, k_modifier):
    """Interior stencil pieces: diffusion coefficients and constant terms."""
    full, K = _conductivities(sys, t, y, k_modifier)
    dz = sys.grid.dz
    lower = (K[:-2] + K[1:-1]) / (2.0 * dz * dz)  # couples i to i-1
    upper = (K[1:-1] + K[2:]) / (2.0 * dz * dz)  # couples i to i+1
    gravity = -sys.gravity_sign * (K[2:] - K[:-2]) / (2.0 * dz)
    sink = np.asarray(sys.feddes.uptake(full[1:-1]))
    return full, lower, upper, gravity - sink


def flux_rhs(sys: SemidiscreteSystem, t: float, y, k_modifier: float = 1.0,
             source: Optional[Callable] = None) -> np.ndarray:
    """Mass-free, control-free right-hand side ``f(y)``; entry 0 is zero.

    ``source(t, z)`` (optional) is added to every interior row; it is used
    by manufactured-solution tests.
    """
    y = _check_state(sys, y)
    full, lower, upper, const = _parts(sys, t, y, k_modifier)
    f = np.zeros(sys.d)
    f[1:] = (lower * (full[:-2] - full[1:-1]) + upper * (full[2:] - full[1:-1]) + const)
    if source is not None:
        f[1:] += source(t, sys.grid.z[1:sys.d])
    return f


def mass_matrix(sys: SemidiscreteSystem, y) -> np.ndarray:
    """Diagonal of the capacity matrix; the top entry is 1 so that y_0' = u."""
    y = _check_state(sys, y)
    c = np.ones(sys.d)
    c[1:] = sys.model.capacity(y[1:])
    return c


def rhs(sys: SemidiscreteSystem, t: float, y, u: float, k_modifier: float = 1.0,
        source: Optional[Callable] = None) -> np.ndarray:
    """State derivative ``C(y)^{-1} (f(y) + B u)``."""
    f = flux_rhs(sys, t, y, k_modifier, source)
    c = mass_matrix(sys, y)
    if np.any(c[1:] <= 0.0):
        bad = int(np.argmin(c[1:])) + 1
        raise SingularCapacityError(f"capacity vanished at node {bad} (h={y[bad]!r})")
    out = f / c
    out[0] = u
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError(f"non-finite derivative at t={t}")
    return out


def null_row(y) -> np.ndarray:
    """Row ``r(y)`` with ``r(y) . y = 0``: ``r_0 = y_1``, ``r_1 = -y_0``."""
    y = np.asarray(y, dtype=float)
    r = np.zeros_like(y)
    r[0] = y[1]
    r[1] = -y[0]
    return r


def assemble_factorization(sys: SemidiscreteSystem, t: float, y,
                           k_modifier: float = 1.0):
    """Semilinear factorization ``A(y) y = f(y)`` and the mass diagonal.

    The tridiagonal part carries the diffusion couplings (including the
    coupling of node 1 to the controlled top node). Gravity, sink and the
    bottom-boundary inflow are state-independent given ``y`` and are folded
    onto the diagonal as ``v_i / y_i``, which requires every ``y_i != 0``.
    Row 0 is zero, or the null row of :func:`null_row` when
    ``sys.use_null_augmentation`` is set.

    Returns
    -------
    A : ndarray, shape (d, d)
    C : ndarray, shape (d,)
    """
    y = _check_state(sys, y)
    if np.any(y == 0.0):
        raise FactorizationError("state has a zero component; constant terms cannot be embedded")
    d = sys.d
    full, lower, upper, const = _parts(sys, t, y, k_modifier)
    v = const.copy()
    v[-1] += upper[-1] * full[-1]  # inflow from the fixed bottom node

    A = np.zeros((d, d))
    rows = np.arange(1, d)
    A[rows, rows - 1] = lower
    A[rows, rows] = -(lower + upper) + v / y[1:]
    A[rows[:-1], rows[:-1] + 1] = upper[:-1]
    if sys.use_null_augmentation:
        A[0] = null_row(y)
    return A, mass_matrix(sys, y)
