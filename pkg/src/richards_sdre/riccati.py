"""Continuous algebraic Riccati equations and SDRE feedback.

Solves

    A^T P + P A - (1/lam) P B B^T P + Q = 0

for the stabilizing ``P`` with the invariant-subspace (ordered real Schur)
method on the Hamiltonian matrix, optionally polished by Newton-Kleinman
sweeps. :func:`solve_sdre_step` freezes the semilinear factorization at the
current state and returns the suboptimal feedback ``u = -(1/lam) B^T P y``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .cost import CostModel, assemble_Q
from .discretize import SemidiscreteSystem, assemble_factorization
from .errors import ConvergenceError, InvalidInputError, StabilizabilityError

__all__ = [
    "AreProblem",
    "AreSolution",
    "are_residual",
    "solve_are",
    "newton_kleinman",
    "stabilizing_gain",
    "feedback",
    "solve_sdre_step",
]

log = logging.getLogger(__name__)


@dataclass
class AreProblem:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    lam: float

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float).reshape(-1)
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.Q.shape != (n, n) or self.B.shape != (n,):
            raise InvalidInputError("inconsistent A, B, Q shapes")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError("lambda must be > 0")
        if not np.allclose(self.Q, self.Q.T, rtol=1e-12, atol=0.0):
            raise InvalidInputError("Q must be symmetric")
        if __debug__ and n and np.any(self.Q):
            if np.linalg.eigvalsh(self.Q).min() < -1e-12 * np.abs(self.Q).max():
                raise InvalidInputError("Q must be positive semidefinite")

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass
class AreSolution:
    Pi: np.ndarray
    residual_norm: float
    closed_loop_spectral_abscissa: float
    solve_time: float = 0.0
    method: str = "schur"


def are_residual(prob: AreProblem, Pi: np.ndarray) -> np.ndarray:
    A, b = prob.A, prob.B
    Pb = Pi @ b
    return A.T @ Pi + Pi @ A - np.outer(Pb, Pb) / prob.lam + prob.Q


def _closed_loop(prob: AreProblem, Pi: np.ndarray) -> np.ndarray:
    return prob.A - np.outer(prob.B, prob.B @ Pi) / prob.lam


def _abscissa(M: np.ndarray) -> float:
    return float(np.linalg.eigvals(M).real.max()) if M.size else -np.inf


def _finish(prob, Pi, t0, method):
    Pi = 0.5 * (Pi + Pi.T)
    res = float(np.linalg.norm(are_residual(prob, Pi), "fro"))
    return AreSolution(Pi, res, _abscissa(_closed_loop(prob, Pi)),
                       time.perf_counter() - t0, method)


def _schur_solve(prob: AreProblem) -> np.ndarray:
    n = prob.n
    G = np.outer(prob.B, prob.B) / prob.lam
    H = np.block([[prob.A, -G], [-prob.Q, -prob.A.T]])
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise StabilizabilityError(
            f"Hamiltonian has {sdim} stable eigenvalues, expected {n}",
            spectrum=np.linalg.eigvals(H),
        )
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e14:
        raise StabilizabilityError("stable invariant subspace is not a graph (U1 singular)",
                                   spectrum=np.linalg.eigvals(H))
    return np.linalg.solve(U1.T, U2.T).T


def stabilizing_gain(prob: AreProblem, shift: Optional[float] = None) -> np.ndarray:
    """A stabilizing gain ``K`` (``A - B K`` Hurwitz) by Bass's method.

    Solves ``(A + b I) X + X (A + b I)^T = 2 B B^T`` for a shift ``b`` above
    the spectral abscissa of ``-A`` and returns ``K = B^T X^{-1}``. Needs a
    controllable pair; independent of any Riccati solution.
    """
    A, B = prob.A, prob.B
    n = prob.n
    if shift is None:
        shift = np.abs(np.linalg.eigvals(A)).max() + 1.0
    M = A + shift * np.eye(n)
    X = sla.solve_continuous_lyapunov(M, 2.0 * np.outer(B, B))
    try:
        K = np.linalg.solve(X, B)
    except np.linalg.LinAlgError:
        raise StabilizabilityError("controllability Gramian is singular") from None
    if _abscissa(A - np.outer(B, K)) >= 0:
        raise StabilizabilityError("Bass gain is not stabilizing",
                                   spectrum=np.linalg.eigvals(A - np.outer(B, K)))
    return K


def newton_kleinman(prob: AreProblem, Pi0: Optional[np.ndarray] = None,
                    tol: float = 1e-13, max_iter: int = 50,
                    K0: Optional[np.ndarray] = None) -> np.ndarray:
    """Newton-Kleinman iteration from a stabilizing start.

    Starting from a gain ``K0``, the first sweep solves
    ``A0^T P + P A0 = -(Q + lam K0^T K0)`` with ``A0 = A - B K0``. Later
    sweeps (and a start from ``Pi0``) use the equivalent correction form
    ``Ak^T D + D Ak = -R(Pk)``, ``P <- P + D``, with ``R`` the Riccati
    residual; solving for the small correction lets the residual fall to
    roundoff level.
    """
    B, lam = prob.B, prob.lam
    if Pi0 is None:
        if K0 is None:
            raise InvalidInputError("give Pi0 or K0")
        K0 = np.asarray(K0, dtype=float)
        A0 = prob.A - np.outer(B, K0)
        if _abscissa(A0) >= 0:
            raise StabilizabilityError("initial gain is not stabilizing",
                                       spectrum=np.linalg.eigvals(A0))
        P = sla.solve_continuous_lyapunov(A0.T, -(prob.Q + lam * np.outer(K0, K0)))
    else:
        P = np.asarray(Pi0, dtype=float)
    P = 0.5 * (P + P.T)
    Ak = _closed_loop(prob, P)
    if _abscissa(Ak) >= 0:
        raise StabilizabilityError("initial guess is not stabilizing",
                                   spectrum=np.linalg.eigvals(Ak))
    prev = np.inf
    for _ in range(max_iter):
        D = sla.solve_continuous_lyapunov(Ak.T, -are_residual(prob, P))
        D = 0.5 * (D + D.T)
        P = P + D
        Ak = _closed_loop(prob, P)
        step = np.linalg.norm(D, "fro") / max(1.0, np.linalg.norm(P, "fro"))
        if step <= tol:
            return P
        # quadratic convergence has ended at roundoff level
        if step < 1e-8 and step >= 0.5 * prev:
            return P
        prev = step
    raise ConvergenceError(f"Newton-Kleinman did not converge in {max_iter} sweeps")


def solve_are(prob: AreProblem, tol: float = 1e-9, refine: bool = True) -> AreSolution:
    """Stabilizing solution of the continuous ARE.

    Parameters
    ----------
    prob : AreProblem
    tol : float
        Accept when ``||residual||_F <= tol * (1 + ||Q||_F)``.
    refine : bool
        Run Newton-Kleinman sweeps from the Schur solution when the residual
        is above tolerance.

    Raises
    ------
    StabilizabilityError
        The pair is not stabilizable (or the Hamiltonian has eigenvalues on
        the imaginary axis).
    ConvergenceError
        The residual could not be brought below tolerance.
    """
    t0 = time.perf_counter()
    if not np.any(prob.Q) and _abscissa(prob.A) < 0:
        return _finish(prob, np.zeros_like(prob.A), t0, "zero")
    Pi = _schur_solve(prob)
    sol = _finish(prob, Pi, t0, "schur")
    bound = tol * (1.0 + np.linalg.norm(prob.Q, "fro"))
    if sol.residual_norm > bound and refine and sol.closed_loop_spectral_abscissa < 0:
        try:
            sol = _finish(prob, newton_kleinman(prob, sol.Pi), t0, "schur+nk")
        except (ConvergenceError, np.linalg.LinAlgError, ValueError) as exc:
            log.debug("Newton-Kleinman refinement failed: %s", exc)
    if not sol.closed_loop_spectral_abscissa < 0:
        raise StabilizabilityError(
            f"closed loop not Hurwitz (abscissa {sol.closed_loop_spectral_abscissa:.3e})",
            spectrum=np.linalg.eigvals(_closed_loop(prob, sol.Pi)),
        )
    if not sol.residual_norm <= bound:
        raise ConvergenceError(f"ARE residual {sol.residual_norm:.3e} exceeds {bound:.3e}")
    return sol


def feedback(sol: AreSolution, B, lam: float, y) -> float:
    """``-(1/lam) B^T Pi y``."""
    return float(-(np.asarray(B, dtype=float) @ (sol.Pi @ np.asarray(y, dtype=float))) / lam)


def solve_sdre_step(sys: SemidiscreteSystem, cm: CostModel, t: float, y,
                    k_modifier: float = 1.0, tol: float = 1e-9):
    """Freeze the factorization at ``y``, solve the ARE and return ``(u, solution)``."""
    y = np.asarray(y, dtype=float)
    A, c = assemble_factorization(sys, t, y, k_modifier)
    An = A / c[:, None]
    prob = AreProblem(An, sys.B / c, assemble_Q(cm, y), cm.lam)
    sol = solve_are(prob, tol=tol)
    return feedback(sol, prob.B, cm.lam, y), sol
