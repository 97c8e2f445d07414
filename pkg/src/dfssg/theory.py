"""Two-target zero-sum games: rational and quantal-response checks.

A single defender resource is split as ``(x0, x1)`` with ``x0 + x1 = 1``.
Attacker values ``z`` are nonnegative and sum to one; the defender's payoff
is minus the attacker's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TwoTargetGame:
    z0: float
    z1: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.z0 >= self.z1 >= 0):
            raise ValueError(f"need z0 >= z1 >= 0, got ({self.z0}, {self.z1})")
        if abs(self.z0 + self.z1 - 1.0) > 1e-12:
            raise ValueError("attacker values must sum to 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @classmethod
    def from_z0(cls, z0, epsilon=0.0):
        return cls(float(z0), 1.0 - float(z0), float(epsilon))

    @property
    def values(self):
        return np.array([self.z0, self.z1])


def rational_best_response(values, coverage):
    """Index of the target a perfectly rational attacker hits.

    Payoff ties (within ``TIE_TOLERANCE``) go to the larger attacker value,
    then to the lowest index.
    """
    u = np.asarray(values, dtype=float)
    p = np.asarray(coverage, dtype=float)
    if u.size == 0:
        raise ValueError("empty game")
    if u.shape != p.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {p.shape}")
    payoff = (1.0 - p) * u
    tied = np.flatnonzero(payoff >= payoff.max() - TIE_TOLERANCE)
    best = u[tied].max()
    return int(tied[np.flatnonzero(u[tied] == best)[0]])


def optimal_rational_coverage(game):
    """Coverage equalizing the attacker's payoffs, and the defender's payoff there."""
    coverage = np.array([game.z0, game.z1])
    return coverage, -(1.0 - game.z0) * game.z0


def _check_theorem1(game):
    if game.epsilon ** 2 > (1.0 - game.z0) ** 2 + 1e-15:
        raise ValueError(
            f"epsilon^2 = {game.epsilon ** 2:.6g} exceeds (1 - z0)^2 = {(1 - game.z0) ** 2:.6g}")
    if game.z1 <= 0:
        raise ValueError("ratio undefined when z1 = 0")


def theorem1_ratio(game):
    """Closed-form ratio of the worst to the best realized DEU over estimates with error epsilon."""
    _check_theorem1(game)
    z0, z1, eps = game.z0, game.z1, game.epsilon
    return (1.0 - (z0 - eps)) * z0 / ((1.0 - (z1 - eps)) * z1)


@dataclass(frozen=True)
class Theorem1Report:
    game: TwoTargetGame
    estimates: tuple
    attacked: tuple
    realized_deus: tuple
    enumerated_ratio: float
    formula_ratio: float
    tolerance: float

    @property
    def error(self):
        return abs(self.enumerated_ratio - self.formula_ratio)

    @property
    def passed(self):
        return self.error <= self.tolerance


def theorem1_verify(game, tolerance=1e-12, ratio=theorem1_ratio):
    """Enumerate both estimates ``z0 +/- eps``, plan against each, let the attacker respond to the truth.

    ``ratio`` is the closed form being checked; it can be swapped out to
    exercise the failure path.
    """
    _check_theorem1(game)
    z = game.values
    eps = game.epsilon
    estimates, attacked, deus = [], [], []
    for sign in (1.0, -1.0):
        z_hat = np.array([game.z0 + sign * eps, 1.0 - (game.z0 + sign * eps)])
        coverage, _ = optimal_rational_coverage(
            TwoTargetGame(float(z_hat.max()), float(z_hat.min())))
        if z_hat[0] < z_hat[1]:
            coverage = coverage[::-1]
        target = rational_best_response(z, coverage)
        estimates.append(tuple(z_hat.tolist()))
        attacked.append(target)
        deus.append(-(1.0 - coverage[target]) * z[target])
    enumerated = min(deus) / max(deus)
    return Theorem1Report(
        game=game,
        estimates=tuple(estimates),
        attacked=tuple(attacked),
        realized_deus=tuple(deus),
        enumerated_ratio=enumerated,
        formula_ratio=float(ratio(game)),
        tolerance=tolerance,
    )


def _check_theorem2(alpha, epsilon):
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    c = (1.0 - alpha) * epsilon
    if not 0 < c < 1:
        raise ValueError(f"(1 - alpha) * epsilon must lie in (0, 1), got {c}")
    return c


def theorem2_lambda_bound(alpha, epsilon):
    """Rationality level above which the QR defender provably under-covers the valuable target."""
    c = _check_theorem2(alpha, epsilon)
    return 2.0 / c * math.log(1.0 / c)


def qr_attacker_payoff(coverage0, values, lam):
    """Expected attacker payoff against a QR attacker, vectorized over coverage of target 0."""
    p = np.asarray(coverage0, dtype=float)
    a0 = (1.0 - p) * values[0]
    a1 = p * values[1]
    q0 = expit(lam * (a0 - a1))
    return q0 * a0 + (1.0 - q0) * a1


def qr_optimal_coverage(values, lam, grid_resolution=1e-4):
    """Grid minimizer of the QR attacker's payoff over coverage of target 0 (first on ties)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 < grid_resolution <= 0.5:
        raise ValueError("grid_resolution must lie in (0, 0.5]")
    grid = np.linspace(0.0, 1.0, int(round(1.0 / grid_resolution)) + 1)
    payoff = qr_attacker_payoff(grid, np.asarray(values, dtype=float), lam)
    return float(grid[int(np.argmin(payoff))])


@dataclass(frozen=True)
class Theorem2Report:
    alpha: float
    epsilon: float
    lam: float
    grid_resolution: float
    coverage: float  # QR-optimal coverage of target 0 under the estimate
    coverage_limit: float
    attack_probability: float  # true QR attacker hitting target 0
    loss: float
    loss_bound: float
    tolerance: float

    @property
    def coverage_ok(self):
        return self.coverage <= self.coverage_limit + self.grid_resolution

    @property
    def loss_ok(self):
        return self.loss >= self.loss_bound - self.tolerance

    @property
    def passed(self):
        return self.coverage_ok and self.loss_ok


def theorem2_verify(alpha, epsilon, grid_resolution=1e-4, lam=None):
    """Check the QR under-coverage and loss bounds on the two-target construction.

    The defender believes the attacker values are ``(1 - eps, eps)``; the
    truth is ``(1, 0)``. At ``lam`` (default: the bound) the defender's
    QR-optimal coverage of target 0 must not exceed ``1 - alpha * eps`` and
    the defender must lose at least ``(1 - eps) * alpha * eps`` against the
    true QR attacker, relative to covering target 0 fully.
    """
    if not 0.5 <= alpha < 1:
        raise ValueError("alpha must lie in [0.5, 1)")
    _check_theorem2(alpha, epsilon)
    if lam is None:
        lam = theorem2_lambda_bound(alpha, epsilon)
    believed = np.array([1.0 - epsilon, epsilon])
    p = qr_optimal_coverage(believed, lam, grid_resolution)
    attack = float(expit(lam * (1.0 - p)))
    return Theorem2Report(
        alpha=alpha,
        epsilon=epsilon,
        lam=lam,
        grid_resolution=grid_resolution,
        coverage=p,
        coverage_limit=1.0 - alpha * epsilon,
        attack_probability=attack,
        loss=attack * (1.0 - p),
        loss_bound=(1.0 - epsilon) * alpha * epsilon,
        tolerance=grid_resolution,
    )


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class TheoryReport:
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return tuple(c for c in self.checks if not c.passed)

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]


def run_theory_checks(n_theorem1=100, n_theorem2=20, grid_resolution=1e-4, seed=0,
                      ratio=theorem1_ratio):
    """Run every two-target check and collect the results."""
    rng = np.random.default_rng(seed)
    checks = []

    example = theorem1_verify(TwoTargetGame(0.6, 0.4, 0.1), ratio=ratio)
    ok = example.passed and abs(example.enumerated_ratio - 15.0 / 14.0) <= 1e-12
    checks.append(Check(
        "theorem1.worked_example", ok,
        f"z=(0.6, 0.4), eps=0.1: realized DEU {example.realized_deus[0]:.2f} and "
        f"{example.realized_deus[1]:.2f}, ratio {example.enumerated_ratio:.7f} "
        f"(15/14 = {15 / 14:.7f}, formula {example.formula_ratio:.7f})"))

    worst = 0.0
    failed = 0
    for _ in range(n_theorem1):
        z0 = rng.uniform(0.5, 1.0)
        game = TwoTargetGame.from_z0(z0, rng.uniform(0.0, 1.0 - z0))
        report = theorem1_verify(game, ratio=ratio)
        worst = max(worst, report.error)
        failed += not report.passed
    checks.append(Check(
        "theorem1.enumeration", failed == 0,
        f"{n_theorem1 - failed}/{n_theorem1} random games agree with the closed form, "
        f"max |difference| {worst:.2e}"))

    failed = []
    for _ in range(n_theorem2):
        alpha = rng.uniform(0.5, 1.0)
        epsilon = rng.uniform(0.01, 0.5)
        report = theorem2_verify(alpha, epsilon, grid_resolution)
        if not report.passed:
            failed.append(f"(alpha={alpha:.4f}, eps={epsilon:.4f})")
    detail = f"{n_theorem2 - len(failed)}/{n_theorem2} random (alpha, eps) pairs pass"
    if failed:
        detail += "; failing: " + ", ".join(failed)
    checks.append(Check("theorem2.bound", not failed, detail))

    worst = 0.0
    for _ in range(20):
        game = TwoTargetGame.from_z0(rng.uniform(0.5, 1.0))
        p = qr_optimal_coverage(game.values, 1e4, grid_resolution)
        worst = max(worst, abs(p - optimal_rational_coverage(game)[0][0]))
    checks.append(Check(
        "qr.rational_limit", worst <= 1e-2,
        f"QR coverage at lambda=1e4 within {worst:.2e} of the rational optimum"))
    return TheoryReport(tuple(checks))
