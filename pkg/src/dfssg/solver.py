"""Defender best response against an SUQR attacker.

Maximizes DEU over ``{0 <= p <= 1, sum(p) <= budget}`` by multi-start
projected gradient ascent with Armijo backtracking. Each run is finished by
a few Newton steps on the face identified by the ascent phase, so the
returned local optimum is accurate to near machine precision when the
problem is strictly concave on that face.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .game import _softmax

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 10
    max_iterations: int = 500
    stationarity_tolerance: float = 1e-6
    initial_step: float = 0.1
    backtracking_factor: float = 0.5
    min_step: float = 1e-12
    armijo: float = 1e-4
    polish: bool = True
    activity_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be positive")
        for name in ("stationarity_tolerance", "initial_step", "min_step", "armijo",
                     "activity_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtracking_factor < 1:
            raise ValueError("backtracking_factor must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SolveReport:
    coverage: np.ndarray
    objective: float
    stationarity_residual: float
    active_lower: tuple
    active_upper: tuple
    budget_active: bool
    budget: float
    converged: bool
    restarts_used: int
    best_restart_index: int
    iterations: int
    trace: tuple = field(default=(), repr=False)


def project_feasible(point, budget):
    """Euclidean projection onto ``{0 <= p <= 1, sum(p) <= budget}``.

    When clipping alone exceeds the budget the result is
    ``clip(v - tau, 0, 1)`` with ``tau > 0`` chosen so the budget binds.
    ``sum(clip(v - tau, 0, 1))`` is piecewise linear in ``tau`` with kinks at
    ``v_i`` and ``v_i - 1``; bisection over the sorted kinks locates the
    linear piece and ``tau`` is then solved for exactly.
    """
    v = np.array(point, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("point must be finite")
    if not budget > 0:
        raise ValueError("budget must be positive")
    return _kernels.project(v, float(budget))


class _Objective:
    """DEU and its derivatives for fixed (phi, w, u); no input validation."""

    def __init__(self, phi, w, defender_values):
        self.phi = np.asarray(phi, dtype=float)
        self.w = float(w)
        self.u = np.asarray(defender_values, dtype=float)

    def value(self, x):
        q = _softmax(self.w * x + self.phi)
        return float(np.dot((1.0 - x) * self.u, q))

    def value_and_gradient(self, x):
        q = _softmax(self.w * x + self.phi)
        a = (1.0 - x) * self.u
        deu = float(np.dot(a, q))
        return deu, q * (-self.u + self.w * (a - deu))

    def hessian(self, x):
        w, u = self.w, self.u
        q = _softmax(w * x + self.phi)
        a = (1.0 - x) * u
        deu = float(np.dot(a, q))
        c = -u + w * (a - deu)
        qq = np.outer(q, q)
        hess = np.diag(w * q * (c - u)) - w * (qq * c[:, None] + qq * c[None, :])
        return 0.5 * (hess + hess.T)


def _residual(x, grad, budget, step):
    return float(_kernels.residual(x, grad, budget, step))


def _face(x, budget, tol):
    lower = x <= tol
    upper = x >= 1.0 - tol
    budget_active = x.sum() >= budget - tol
    return lower, upper, budget_active


def _face_basis(free_count, budget_active):
    """Orthonormal basis of the directions that keep the face's equalities."""
    if not budget_active:
        return np.eye(free_count)
    if free_count <= 1:
        return np.zeros((free_count, 0))
    ones = np.ones((free_count, 1)) / np.sqrt(free_count)
    q, _ = np.linalg.qr(np.hstack([ones, np.eye(free_count)[:, : free_count - 1]]))
    return q[:, 1:]


def _polish(obj, x, budget, cfg, max_steps=20):
    """Newton iterations on the face of ``x``; returns an improved point or None."""
    lower, upper, budget_active = _face(x, budget, cfg.activity_tolerance)
    free = ~(lower | upper)
    if not free.any():
        return None
    y = x.copy()
    y[lower] = 0.0
    y[upper] = 1.0
    if budget_active:
        slack = budget - y[~free].sum()
        y[free] += (slack - y[free].sum()) / np.count_nonzero(free)
    z = _face_basis(np.count_nonzero(free), budget_active)
    if z.shape[1] == 0:
        candidate = y
    else:
        candidate = None
        for _ in range(max_steps):
            f, g = obj.value_and_gradient(y)
            hz = z.T @ obj.hessian(y)[np.ix_(free, free)] @ z
            if np.linalg.eigvalsh(hz).max() >= 0:
                return None
            gz = z.T @ g[free]
            step = z @ np.linalg.solve(hz, -gz)
            y_next = y.copy()
            y_next[free] += step
            if np.any(y_next[free] <= 0.0) or np.any(y_next[free] >= 1.0):
                return None
            y = y_next
            candidate = y
            if np.linalg.norm(step) <= 1e-15:
                break
    if candidate is None or np.any(candidate < 0) or np.any(candidate > 1):
        return None
    if candidate.sum() > budget + 1e-12:
        return None
    return candidate


def _ascend(obj, x0, budget, cfg):
    x, f, iterations, trace = _kernels.ascend(
        obj.phi, obj.w, obj.u, np.asarray(x0, dtype=float), float(budget),
        cfg.initial_step, cfg.stationarity_tolerance, cfg.max_iterations,
        cfg.backtracking_factor, cfg.min_step, cfg.armijo,
    )
    return x, float(f), int(iterations), list(trace)


def _finish(obj, x, f, budget, cfg):
    """Polish ``x`` on its face when that does not lose objective or stationarity."""
    s0 = cfg.initial_step
    g = obj.value_and_gradient(x)[1]
    residual = _residual(x, g, budget, s0)
    if cfg.polish:
        polished = _polish(obj, x, budget, cfg)
        if polished is not None:
            fp, gp = obj.value_and_gradient(polished)
            rp = _residual(polished, gp, budget, s0)
            if fp >= f - 1e-12 and rp <= max(residual, cfg.stationarity_tolerance):
                return polished, fp, rp, True
    return x, f, residual, False


def _random_start(rng, n, budget):
    return project_feasible(rng.uniform(0.0, 1.0, n) * (2.0 * budget / n), budget)


def solve_defender(phi_hat, w, defender_values, budget, config=None, initial_point=None):
    """Best local optimum of DEU over the budget polytope.

    The first start is the uniform coverage ``budget / n``; the remaining
    ``restarts - 1`` starts are random feasible points drawn from
    ``config.seed``. With ``initial_point`` a single warm-started run is done
    instead, which keeps the solution in the same basin.
    """
    cfg = config or SolverConfig()
    phi_hat = np.asarray(phi_hat, dtype=float)
    u = np.asarray(defender_values, dtype=float)
    n = len(phi_hat)
    if len(u) != n:
        raise ValueError(f"dimension mismatch: {n} vs {len(u)}")
    if not w < 0:
        raise ValueError(f"coverage weight w must be negative, got {w}")
    if not 0 < budget <= n:
        raise ValueError(f"budget must lie in (0, {n}]")
    obj = _Objective(phi_hat, w, u)

    if initial_point is not None:
        starts = [np.asarray(initial_point, dtype=float)]
    else:
        rng = np.random.default_rng(cfg.seed)
        starts = [np.full(n, budget / n)]
        starts += [_random_start(rng, n, budget) for _ in range(cfg.restarts - 1)]

    best = None
    for index, x0 in enumerate(starts):
        x, f, iterations, trace = _ascend(obj, x0, budget, cfg)
        if best is None or f > best[1] + 1e-12:
            best = (x, f, iterations, trace, index)
    x, f, iterations, trace, index = best
    x, f, residual, polished = _finish(obj, x, f, budget, cfg)
    if polished:
        trace = trace + [f]
    converged = residual <= cfg.stationarity_tolerance
    if not converged:
        logger.debug("solver stopped with stationarity residual %.3g", residual)
    lower, upper, budget_active = _face(x, budget, cfg.activity_tolerance)
    return SolveReport(
        coverage=x,
        objective=f,
        stationarity_residual=residual,
        active_lower=tuple(np.flatnonzero(lower).tolist()),
        active_upper=tuple(np.flatnonzero(upper).tolist()),
        budget_active=bool(budget_active),
        budget=float(budget),
        converged=bool(converged),
        restarts_used=len(starts),
        best_restart_index=index,
        iterations=iterations,
        trace=tuple(trace),
    )


def uniform_coverage(target_count, budget, defender_values=None, w=-4.0, config=None):
    """Coverage of the Unif baseline: the DEU-optimal response to ``phi = 0``.

    With equal (or unspecified) defender values this is ``budget / n`` on
    every target.
    """
    if not 0 < budget <= target_count:
        raise ValueError(f"budget must lie in (0, {target_count}]")
    if defender_values is None:
        return np.full(target_count, budget / target_count)
    report = solve_defender(np.zeros(target_count), w, defender_values, budget, config)
    return report.coverage
