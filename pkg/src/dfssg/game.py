"""Security game types, SUQR/QR attacker models and the defender objective.

Coverage vectors, attack distributions and attractiveness values are plain
1-D float arrays. Attractiveness is kept mean-centered: SUQR only identifies
it up to an additive constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SecurityGame:
    """One game instance.

    Parameters
    ----------
    features : ndarray of shape (n_targets, n_features)
    defender_values : ndarray of shape (n_targets,)
        Defender payoff when the attack on a target succeeds (all <= 0).
        A defended attack pays zero to both players.
    budget : float
        Number of defense resources; coverage must satisfy sum(p) <= budget.
    historical_coverage, attack_counts : optional
        Observed coverage and per-target attack tallies (training games).
    true_phi : optional
        Evaluation attractiveness (ground truth on synthetic games).
    """

    features: np.ndarray
    defender_values: np.ndarray
    budget: float
    historical_coverage: Optional[np.ndarray] = None
    attack_counts: Optional[np.ndarray] = None
    true_phi: Optional[np.ndarray] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValueError("features must be a non-empty 2-D array")
        n = features.shape[0]
        values = _vector(self.defender_values, n, "defender_values")
        if np.any(values > 0):
            raise ValueError("defender_values must be <= 0")
        budget = float(self.budget)
        if not 0 < budget <= n:
            raise ValueError(f"budget must lie in (0, {n}], got {budget}")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "defender_values", values)
        object.__setattr__(self, "budget", budget)

        if self.historical_coverage is not None:
            p = _vector(self.historical_coverage, n, "historical_coverage")
            check_coverage(p, budget)
            object.__setattr__(self, "historical_coverage", p)
        if self.attack_counts is not None:
            if self.historical_coverage is None:
                raise ValueError("attack_counts require historical_coverage")
            counts = np.asarray(self.attack_counts)
            if counts.shape != (n,):
                raise ValueError(f"attack_counts must have shape ({n},)")
            if np.any(counts < 0) or np.any(counts != np.round(counts)):
                raise ValueError("attack_counts must be nonnegative integers")
            object.__setattr__(self, "attack_counts", counts.astype(np.int64))
        if self.true_phi is not None:
            object.__setattr__(self, "true_phi", _vector(self.true_phi, n, "true_phi"))

    @property
    def target_count(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_attacks(self) -> bool:
        return self.attack_counts is not None


def _vector(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def check_coverage(p, budget, tol=1e-9):
    """Raise ValueError unless ``p`` lies in the budget polytope."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError("coverage entries must lie in [0, 1]")
    if p.sum() > budget + tol:
        raise ValueError(f"coverage sums to {p.sum()} > budget {budget}")
    return p


def center(phi):
    """Return ``phi`` shifted to zero mean (canonical gauge)."""
    phi = np.asarray(phi, dtype=float)
    return phi - phi.mean()


def _softmax(z):
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _check_same_length(*arrays):
    n = len(arrays[0])
    for a in arrays[1:]:
        if len(a) != n:
            raise ValueError(f"dimension mismatch: {n} vs {len(a)}")


def _suqr_inputs(coverage, phi, w):
    p = np.asarray(coverage, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _check_same_length(p, phi)
    if not w < 0:
        raise ValueError(f"coverage weight w must be negative, got {w}")
    return p, phi


def suqr_attack_distribution(coverage, phi, w):
    """SUQR attack probabilities ``q_i ~ exp(w * p_i + phi_i)``."""
    p, phi = _suqr_inputs(coverage, phi, w)
    return _softmax(w * p + phi)


def qr_attack_distribution(attacker_values, coverage, lam):
    """Quantal response: ``q_i ~ exp(lam * (1 - p_i) * u_a(i))``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    u_a = np.asarray(attacker_values, dtype=float)
    p = np.asarray(coverage, dtype=float)
    _check_same_length(u_a, p)
    return _softmax(lam * (1.0 - p) * u_a)


def defender_expected_utility(coverage, q, defender_values):
    """``sum_i (1 - p_i) q_i u_d(i)``."""
    p = np.asarray(coverage, dtype=float)
    q = np.asarray(q, dtype=float)
    u = np.asarray(defender_values, dtype=float)
    _check_same_length(p, q, u)
    return float(np.dot((1.0 - p) * q, u))


def _deu_parts(coverage, phi, w, defender_values):
    p, phi = _suqr_inputs(coverage, phi, w)
    u = np.asarray(defender_values, dtype=float)
    _check_same_length(p, u)
    q = _softmax(w * p + phi)
    a = (1.0 - p) * u
    deu = float(np.dot(a, q))
    return q, a, u, deu


def suqr_deu(coverage, phi, w, defender_values):
    """DEU of ``coverage`` against an SUQR attacker with attractiveness ``phi``."""
    return _deu_parts(coverage, phi, w, defender_values)[3]


def deu_gradient(coverage, phi, w, defender_values):
    """Gradient of the SUQR defender utility with respect to coverage.

    ``dDEU/dp_k = -q_k u_k + w q_k ((1 - p_k) u_k - DEU)``
    """
    q, a, u, deu = _deu_parts(coverage, phi, w, defender_values)
    return q * (-u + w * (a - deu))


def deu_hessian(coverage, phi, w, defender_values):
    """Second derivatives of the SUQR defender utility with respect to coverage."""
    q, a, u, deu = _deu_parts(coverage, phi, w, defender_values)
    c = -u + w * (a - deu)
    qq = np.outer(q, q)
    hess = np.diag(w * q * (c - u)) - w * (qq * c[:, None] + qq * c[None, :])
    return 0.5 * (hess + hess.T)


def deu_cross_derivative(coverage, phi, w, defender_values):
    """Mixed derivative ``d^2 DEU / dp_k dphi_j`` as an (n, n) matrix.

    Rows sum to zero: shifting every phi_j by a constant leaves the
    attack distribution unchanged.
    """
    q, a, u, deu = _deu_parts(coverage, phi, w, defender_values)
    c = -u + w * (a - deu)
    g = q * c
    return np.diag(g) - np.outer(g, q) - w * np.outer(q, q * (a - deu))


def empirical_attack_distribution(attack_counts):
    """Normalise attack tallies into a distribution; zeros are allowed."""
    counts = np.asarray(attack_counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("attack counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("at least one attack must be observed")
    return counts / total


def cross_entropy_loss(predicted, empirical):
    """``-sum_i empirical_i * log(predicted_i)``."""
    q_hat = np.asarray(predicted, dtype=float)
    q_tilde = np.asarray(empirical, dtype=float)
    _check_same_length(q_hat, q_tilde)
    support = q_tilde > 0
    if np.any(q_hat[support] <= 0):
        raise ValueError("predicted distribution assigns zero mass to an observed target")
    return float(-np.dot(q_tilde[support], np.log(q_hat[support])))


def entropy(distribution):
    q = np.asarray(distribution, dtype=float)
    q = q[q > 0]
    return float(-np.dot(q, np.log(q)))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Train/validation/test games of one SSG instance with a shared coverage weight."""

    train: tuple
    validation: tuple
    test: tuple
    w_coverage: float = -4.0

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "validation", tuple(self.validation))
        object.__setattr__(self, "test", tuple(self.test))
        if not self.w_coverage < 0:
            raise ValueError("w_coverage must be negative")
        for split in ("train", "validation"):
            for i, game in enumerate(getattr(self, split)):
                if not game.has_attacks:
                    raise ValueError(f"{split} game {i} has no attack observations")
