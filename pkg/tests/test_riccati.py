import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from richards_sdre.cost import CostModel, assemble_Q
from richards_sdre.discretize import BoundaryData, Grid, SemidiscreteSystem, assemble_factorization
from richards_sdre.errors import InvalidInputError, StabilizabilityError
from richards_sdre.hydraulics import FeddesParams, GardnerParams, HaverkampParams
from richards_sdre.riccati import (
    AreProblem,
    AreSolution,
    are_residual,
    feedback,
    newton_kleinman,
    solve_are,
    solve_sdre_step,
    stabilizing_gain,
)
from richards_sdre.verification import random_are_instance


def scalar(a, q, lam=1.0, b=1.0):
    return AreProblem([[a]], [b], [[q]], lam)


@pytest.mark.parametrize("a, expected", [(0.0, 1.0), (1.0, 1.0 + math.sqrt(2.0))])
def test_scalar_closed_forms(a, expected):
    sol = solve_are(scalar(a, 1.0))
    assert_allclose(sol.Pi[0, 0], expected, rtol=0, atol=1e-12)
    assert sol.closed_loop_spectral_abscissa < 0


def test_scalar_general_root():
    # stabilizing root of -(b^2/lam) p^2 + 2 a p + q = 0
    a, b, q, lam = -0.3, 2.0, 5.0, 0.7
    expected = lam * (a + math.sqrt(a * a + b * b * q / lam)) / (b * b)
    assert_allclose(solve_are(scalar(a, q, lam, b)).Pi[0, 0], expected, rtol=1e-13)


def test_zero_weight_hurwitz_gives_zero():
    sol = solve_are(AreProblem(np.diag([-1.0, -2.0]), [1.0, 1.0], np.zeros((2, 2)), 1.0))
    assert np.all(sol.Pi == 0.0)
    assert sol.method == "zero"


def test_zero_weight_unstable_still_stabilizes():
    # a = 1, q = 0: stabilizing root is p = 2 a lam / b^2 = 2
    sol = solve_are(scalar(1.0, 0.0))
    assert_allclose(sol.Pi[0, 0], 2.0, rtol=1e-12)
    assert sol.closed_loop_spectral_abscissa < 0


def test_unstabilizable_pair_raises_with_spectrum():
    prob = AreProblem(np.diag([1.0, -1.0]), [0.0, 1.0], np.eye(2), 1.0)
    with pytest.raises(StabilizabilityError) as info:
        solve_are(prob)
    assert info.value.spectrum is not None


def test_problem_validation():
    with pytest.raises(InvalidInputError):
        AreProblem(np.eye(2), [1.0], np.eye(2), 1.0)
    with pytest.raises(InvalidInputError):
        AreProblem(np.eye(2), [1.0, 0.0], np.array([[1.0, 1.0], [0.0, 1.0]]), 1.0)
    with pytest.raises(InvalidInputError):
        AreProblem(np.eye(2), [1.0, 0.0], -np.eye(2), 1.0)
    with pytest.raises(InvalidInputError):
        AreProblem(np.eye(2), [1.0, 0.0], np.eye(2), 0.0)


@pytest.mark.parametrize("d", [2, 5, 10, 30])
def test_matches_library_solver(d):
    rng = np.random.default_rng(100 + d)
    for _ in range(5):
        prob = random_are_instance(rng, d)
        ref = sla.solve_continuous_are(prob.A, prob.B[:, None], prob.Q, np.array([[prob.lam]]))
        sol = solve_are(prob)
        assert_allclose(sol.Pi, ref, rtol=1e-8, atol=1e-10 * np.abs(ref).max())


def test_random_d30_residual_and_symmetry():
    prob = random_are_instance(np.random.default_rng(7), 30)
    sol = solve_are(prob)
    assert sol.residual_norm < 1e-9 * (1 + np.linalg.norm(prob.Q, "fro"))
    assert np.linalg.norm(sol.Pi - sol.Pi.T) <= 1e-10 * np.linalg.norm(sol.Pi)
    assert_allclose(np.linalg.norm(are_residual(prob, sol.Pi), "fro"), sol.residual_norm)


def test_newton_kleinman_from_independent_start():
    # Bass gain start: no information from the Schur solution
    rng = np.random.default_rng(8)
    for d in (2, 5, 10, 30):
        prob = random_are_instance(rng, d)
        P_nk = newton_kleinman(prob, K0=stabilizing_gain(prob))
        P_s = solve_are(prob).Pi
        assert_allclose(P_nk, P_s, rtol=1e-8, atol=1e-10 * np.abs(P_s).max())


def test_newton_kleinman_rejects_destabilizing_start():
    prob = scalar(1.0, 1.0)
    with pytest.raises(StabilizabilityError):
        newton_kleinman(prob, np.zeros((1, 1)))


def test_feedback_examples():
    sol = AreSolution(np.array([[1.0]]), 0.0, -1.0)
    assert feedback(sol, [1.0], 1.0, [2.0]) == -2.0
    assert feedback(sol, [1.0], 0.5, [2.0]) == -4.0
    zero = AreSolution(np.zeros((3, 3)), 0.0, -1.0)
    assert feedback(zero, [1.0, 0, 0], 1e-5, [-1.0, -2.0, -3.0]) == 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3, 5, 8]))
def test_stabilizing_and_residual_property(seed, d):
    prob = random_are_instance(np.random.default_rng(seed), d)
    sol = solve_are(prob)
    closed = prob.A - np.outer(prob.B, prob.B @ sol.Pi) / prob.lam
    assert np.linalg.eigvals(closed).real.max() < 0
    assert sol.residual_norm <= 1e-9 * (1 + np.linalg.norm(prob.Q, "fro"))
    assert np.linalg.eigvalsh(sol.Pi).min() > -1e-9 * np.abs(sol.Pi).max()


def _sys(model):
    return SemidiscreteSystem(Grid(), model, FeddesParams(), BoundaryData())


@pytest.mark.parametrize("model", [HaverkampParams(), GardnerParams()])
def test_sdre_step_is_composition(model):
    sys = _sys(model)
    cm = CostModel(sys.feddes, sys.grid.dz)
    y = sys.boundary.initial_state(sys.grid)
    u, sol = solve_sdre_step(sys, cm, 0.0, y)
    assert u == pytest.approx(-(sol.Pi @ y)[0] / cm.lam, rel=1e-12)
    # the same problem assembled by hand
    A, c = assemble_factorization(sys, 0.0, y)
    prob = AreProblem(A / c[:, None], sys.B / c, assemble_Q(cm, y), cm.lam)
    assert_allclose(solve_are(prob).Pi, sol.Pi, rtol=1e-10, atol=1e-14 * np.abs(sol.Pi).max())


def test_sdre_on_plateau_state():
    sys = _sys(HaverkampParams())
    cm = CostModel(sys.feddes, sys.grid.dz)
    y = np.full(sys.d, -40.0)
    A, c = assemble_factorization(sys, 0.0, y)
    u, sol = solve_sdre_step(sys, cm, 0.0, y)
    assert np.all(assemble_Q(cm, y) == 0.0)
    # bottom inflow from h_B = -61.5 folded onto the last diagonal entry as
    # v / y with y = -40 makes the frozen matrix unstable, so Q = 0 does not
    # short-circuit to Pi = 0
    assert np.linalg.eigvals(A / c[:, None]).real.max() > 0
    assert sol.closed_loop_spectral_abscissa < 0
    assert np.linalg.norm(sol.Pi) > 0
    assert sol.residual_norm <= 1e-9


def test_sdre_initial_control_sign_is_wetting():
    # A(y) is Metzler with a nonnegative Pi, so for an all-negative state the
    # feedback raises the top head at t = 0
    for model in (HaverkampParams(), GardnerParams()):
        sys = _sys(model)
        u, _ = solve_sdre_step(sys, CostModel(sys.feddes, sys.grid.dz), 0.0,
                               sys.boundary.initial_state(sys.grid))
        assert u > 0
