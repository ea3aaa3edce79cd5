import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from richards_sdre.discretize import (
    BoundaryData,
    Grid,
    SemidiscreteSystem,
    assemble_factorization,
    flux_rhs,
    mass_matrix,
    null_row,
    rhs,
)
from richards_sdre.errors import (
    FactorizationError,
    InvalidInputError,
    SingularCapacityError,
)
from richards_sdre.hydraulics import FeddesParams, GardnerParams, HaverkampParams
from richards_sdre.verification import NO_SINK, ConstantModel


def make_sys(model=None, n_nodes=31, feddes=None, h_B=-61.5, **kw):
    return SemidiscreteSystem(Grid(80.0, n_nodes), model or HaverkampParams(),
                              feddes or FeddesParams(), BoundaryData(h_B=h_B), **kw)


def loop_rhs(sys, t, y):
    """Node-by-node transcription of the interior stencil."""
    full = list(y) + [sys.boundary.bottom(t)]
    K = [float(sys.model.conductivity(h)) for h in full]
    dz = sys.grid.dz
    f = [0.0]
    for i in range(1, sys.d):
        diff = ((K[i - 1] + K[i]) * (full[i - 1] - full[i])
                + (K[i] + K[i + 1]) * (full[i + 1] - full[i])) / (2 * dz * dz)
        grav = (K[i + 1] - K[i - 1]) / (2 * dz)  # sigma = -1
        f.append(diff + grav - float(sys.feddes.uptake(full[i])))
    return np.array(f)


def test_grid_geometry():
    g = Grid()
    assert g.d == 30
    assert g.dz == pytest.approx(80.0 / 30.0, rel=1e-15)
    assert g.z[-1] == pytest.approx(80.0)
    with pytest.raises(InvalidInputError):
        Grid(n_nodes=2)
    with pytest.raises(InvalidInputError):
        Grid(Z=-1.0)


def test_initial_state():
    y = BoundaryData().initial_state(Grid())
    assert y.shape == (30,)
    assert y[0] == -20.73
    assert np.all(y[1:] == -61.5)


def test_bottom_schedule_interpolates():
    b = BoundaryData(h_B=[[0.0, -60.0], [100.0, -40.0]])
    assert b.bottom(50.0) == pytest.approx(-50.0)
    assert b.bottom(500.0) == pytest.approx(-40.0)
    with pytest.raises(InvalidInputError):
        BoundaryData(h_B=[[1.0, -60.0], [0.0, -40.0]])


@pytest.mark.parametrize("model", [HaverkampParams(), GardnerParams()])
def test_rhs_matches_loop_transcription(model):
    sys = make_sys(model)
    rng = np.random.default_rng(11)
    for _ in range(20):
        y = rng.uniform(-120, -2, sys.d)
        assert_allclose(flux_rhs(sys, 0.0, y), loop_rhs(sys, 0.0, y), rtol=1e-13, atol=1e-16)


def test_constant_k_reduces_to_second_difference():
    # uniform K, C = 1: interior rows are K (y_{i-1} - 2 y_i + y_{i+1}) / dz^2
    sys = SemidiscreteSystem(Grid(80.0, 9), ConstantModel(K_S=2.0), NO_SINK,
                             BoundaryData(h_B=-5.0))
    y = -np.arange(1.0, 9.0) ** 2
    full = np.append(y, -5.0)
    expected = 2.0 * (full[:-2] - 2 * full[1:-1] + full[2:]) / sys.grid.dz**2
    assert_allclose(flux_rhs(sys, 0.0, y)[1:], expected, rtol=1e-14)


def test_uniform_dry_state_is_stationary():
    # uniform head below h4: no gradient, no gravity difference, no sink
    sys = make_sys(h_B=-90.0)
    y = np.full(sys.d, -90.0)
    assert np.all(rhs(sys, 0.0, y, 0.0) == 0.0)


def test_top_row_is_control():
    sys = make_sys()
    y = BoundaryData().initial_state(sys.grid)
    assert rhs(sys, 0.0, y, 3.5)[0] == 3.5


def test_mass_matrix_top_entry_is_one():
    sys = make_sys()
    y = np.full(sys.d, -40.0)
    c = mass_matrix(sys, y)
    assert c[0] == 1.0
    assert_allclose(c[1:], HaverkampParams().capacity(-40.0))


def test_singular_capacity_raises():
    sys = make_sys(GardnerParams())
    y = np.full(sys.d, -40.0)
    y[3] = 2.0  # saturated interior node: capacity 0
    with pytest.raises(SingularCapacityError):
        rhs(sys, 0.0, y, 0.0)


def test_state_validation():
    sys = make_sys()
    with pytest.raises(InvalidInputError):
        flux_rhs(sys, 0.0, np.zeros(5))
    with pytest.raises(InvalidInputError):
        flux_rhs(sys, 0.0, np.full(sys.d, np.nan))


def test_factorization_rejects_zero_component():
    sys = make_sys()
    y = np.full(sys.d, -40.0)
    y[4] = 0.0
    with pytest.raises(FactorizationError):
        assemble_factorization(sys, 0.0, y)


def test_factorization_structure():
    sys = make_sys()
    y = np.linspace(-20, -70, sys.d)
    A, c = assemble_factorization(sys, 0.0, y)
    # tridiagonal below the first row
    i, j = np.indices(A.shape)
    assert np.all(A[(i >= 1) & (np.abs(i - j) > 1)] == 0)
    # coupling of node 1 to the controlled node
    K = HaverkampParams().conductivity(y[:2])
    assert A[1, 0] == pytest.approx((K[0] + K[1]) / (2 * sys.grid.dz**2), rel=1e-14)
    assert_allclose(A[0], null_row(y))


def test_factorization_without_augmentation_has_zero_first_row():
    sys = make_sys(use_null_augmentation=False)
    A, _ = assemble_factorization(sys, 0.0, np.full(sys.d, -40.0))
    assert np.all(A[0] == 0.0)


def test_null_row_annihilates_state():
    y = np.array([-20.73, -61.5, -61.5])
    assert abs(null_row(y) @ y) <= 1e-13 * abs(y[0] * y[1])
    assert_allclose(null_row(y), [-61.5, 20.73, 0.0])


state = arrays(np.float64, 30, elements=st.floats(min_value=-200.0, max_value=-0.01))


@settings(max_examples=150, deadline=None)
@given(y=state, km=st.floats(min_value=0.9, max_value=1.1))
def test_factorization_identity_property(y, km):
    for model in (HaverkampParams(), GardnerParams()):
        sys = make_sys(model)
        A, _ = assemble_factorization(sys, 0.0, y, km)
        f = flux_rhs(sys, 0.0, y, km)
        scale = np.max(np.abs(A) @ np.abs(y))
        assert np.max(np.abs(A @ y - f)) <= 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(y=state)
def test_rhs_finite_on_admissible_states(y):
    sys = make_sys()
    assert np.all(np.isfinite(rhs(sys, 0.0, y, 0.0)))


def test_gravity_sign_flip_changes_only_gravity_term():
    y = np.linspace(-20, -70, 30)
    a = make_sys(GardnerParams())
    b = make_sys(GardnerParams(), gravity_sign=1.0)
    full = np.append(y, -61.5)
    K = GardnerParams().conductivity(full)
    grav = (K[2:] - K[:-2]) / (2 * a.grid.dz)
    assert_allclose(flux_rhs(a, 0.0, y)[1:] - flux_rhs(b, 0.0, y)[1:], 2 * grav,
                    rtol=1e-10, atol=1e-16)


def test_source_hook_adds_to_interior_rows():
    sys = make_sys()
    y = np.full(sys.d, -40.0)
    base = flux_rhs(sys, 0.0, y)
    with_src = flux_rhs(sys, 0.0, y, source=lambda t, z: np.sin(z))
    assert with_src[0] == base[0]
    assert_allclose(with_src[1:] - base[1:], np.sin(sys.grid.z[1:30]), rtol=1e-12)
    assert math.isclose(with_src[5] - base[5], math.sin(5 * sys.grid.dz), rel_tol=1e-9)
