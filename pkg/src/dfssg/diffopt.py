"""Sensitivity of the defender's local optimum to the attractiveness estimate.

The solver returns a local maximizer ``x*`` of ``DEU(x; phi_hat)``. Around a
strict local optimum the active constraints can be held as equalities and
the KKT conditions of the local quadratic model differentiated implicitly:

    [H  A^T] [dx]   [-d2f/dx dphi]
    [A   0 ] [dl] = [      0     ]

with ``f = -DEU`` (minimization form), ``H`` its Hessian and ``A`` the rows
of the active constraints. Strict complementarity is assumed; at weakly
active constraints the result is one valid choice of generalized Jacobian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .game import deu_cross_derivative, deu_gradient, deu_hessian

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-10
MAX_CONDITION = 1e12


class DegenerateActiveSetError(ValueError):
    pass


class SingularKKTError(np.linalg.LinAlgError):
    def __init__(self, condition):
        super().__init__(f"KKT system is singular (condition estimate {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class ActiveSet:
    lower: tuple
    upper: tuple
    budget_active: bool
    budget_row_kept: bool
    matrix: np.ndarray  # rows are gradients of the kept active constraints


@dataclass(frozen=True, eq=False)
class KktSystem:
    hessian: np.ndarray
    active_constraints: np.ndarray
    cross_term: np.ndarray
    duals: np.ndarray
    active_set: ActiveSet
    regularized: bool
    min_reduced_eigenvalue: float


def _independent_rows(rows, tol=PIVOT_TOLERANCE):
    """Indices of a maximal linearly independent prefix-greedy subset of ``rows``."""
    basis = []
    kept = []
    for i, row in enumerate(rows):
        r = np.asarray(row, dtype=float)
        resid = r.copy()
        for b in basis:
            resid -= np.dot(b, resid) * b
        norm = np.linalg.norm(resid)
        if norm > tol * max(1.0, np.linalg.norm(r)):
            basis.append(resid / norm)
            kept.append(i)
    return kept


def detect_active_set(report, activity_tolerance=1e-6):
    """Binding constraints at the solver output.

    Box rows come first; the budget row is dropped when it is a linear
    combination of them (every coordinate at a bound).
    """
    x = np.asarray(report.coverage, dtype=float)
    budget = report.budget
    n = len(x)
    lower = np.flatnonzero(x <= activity_tolerance)
    upper = np.flatnonzero(x >= 1.0 - activity_tolerance)
    both = np.intersect1d(lower, upper)
    if both.size:
        raise DegenerateActiveSetError(
            f"targets {both.tolist()} are at both bounds; activity tolerance too large")
    budget_active = bool(x.sum() >= budget - activity_tolerance)

    eye = np.eye(n)
    rows = [eye[i] for i in lower] + [eye[i] for i in upper]
    if budget_active:
        rows.append(np.ones(n))
    kept = _independent_rows(rows)
    matrix = np.array([rows[i] for i in kept]).reshape(len(kept), n)
    budget_row_kept = budget_active and (len(rows) - 1) in kept
    return ActiveSet(
        lower=tuple(lower.tolist()),
        upper=tuple(upper.tolist()),
        budget_active=budget_active,
        budget_row_kept=budget_row_kept,
        matrix=matrix,
    )


def ensure_strict(hessian, floor=1e-6):
    """Shift a symmetric matrix by a multiple of I so its smallest eigenvalue is >= floor.

    Returns ``(matrix, shifted)``.
    """
    h = np.asarray(hessian, dtype=float)
    if h.size == 0:
        return h.copy(), False
    min_eig = float(np.linalg.eigvalsh(0.5 * (h + h.T)).min())
    if min_eig >= floor:
        return h.copy(), False
    return h + (floor - min_eig) * np.eye(h.shape[0]), True


def build_kkt_system(report, phi_hat, w, defender_values, floor=1e-6, activity_tolerance=1e-6):
    """Assemble the KKT data at ``report.coverage`` for ``f = -DEU(.; phi_hat)``.

    Strictness is enforced on the curvature restricted to the active face:
    only there does the quadratic model need to be convex, and along the
    all-ones direction DEU is exactly linear.
    """
    x = np.asarray(report.coverage, dtype=float)
    active = detect_active_set(report, activity_tolerance)
    a = active.matrix
    hess = -deu_hessian(x, phi_hat, w, defender_values)
    cross = -deu_cross_derivative(x, phi_hat, w, defender_values)

    z = scipy.linalg.null_space(a) if a.shape[0] else np.eye(len(x))
    reduced = z.T @ hess @ z
    min_eig = float(np.linalg.eigvalsh(reduced).min()) if reduced.size else np.inf
    fixed, shifted = ensure_strict(reduced, floor)
    if shifted:
        shift = fixed[0, 0] - reduced[0, 0]
        hess = hess + shift * (z @ z.T)
        logger.info("local optimum not strict (min curvature %.3g); regularized", min_eig)

    grad_f = -deu_gradient(x, phi_hat, w, defender_values)
    if a.shape[0]:
        duals = np.linalg.lstsq(a.T, -grad_f, rcond=None)[0]
    else:
        duals = np.zeros(0)
    return KktSystem(
        hessian=hess,
        active_constraints=a,
        cross_term=cross,
        duals=duals,
        active_set=active,
        regularized=shifted,
        min_reduced_eigenvalue=min_eig,
    )


def solution_jacobian(system):
    """``dx*/dphi_hat`` as an (n, n) matrix (column j: response to phi_hat_j)."""
    h = system.hessian
    a = system.active_constraints
    n, k = h.shape[0], a.shape[0]
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = h
    kkt[:n, n:] = a.T
    kkt[n:, :n] = a
    condition = np.linalg.cond(kkt)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularKKTError(condition)
    rhs = np.zeros((n + k, system.cross_term.shape[1]))
    rhs[:n] = -system.cross_term
    dx = np.linalg.solve(kkt, rhs)[:n]
    pinned = list(system.active_set.lower) + list(system.active_set.upper)
    dx[pinned] = 0.0
    return dx


def chain_gradient(report, phi_hat, true_phi, w, defender_values, floor=1e-6,
                   activity_tolerance=1e-6):
    """Gradient of ``DEU(x*(phi_hat); true_phi)`` with respect to ``phi_hat``."""
    system = build_kkt_system(report, phi_hat, w, defender_values, floor, activity_tolerance)
    jac = solution_jacobian(system)
    g = deu_gradient(report.coverage, true_phi, w, defender_values)
    return jac.T @ g
