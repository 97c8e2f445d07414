import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_suqr(rng, n, w_range=(-6.0, -0.5)):
    """Random (coverage, phi, w, defender_values) with a feasible interior-ish coverage."""
    p = rng.uniform(0.05, 0.95, n)
    phi = rng.normal(0.0, 1.5, n)
    w = rng.uniform(*w_range)
    u = rng.uniform(-10.0, 0.0, n)
    return p, phi - phi.mean(), w, u


def central_difference(fn, x, h):
    """Central-difference Jacobian of ``fn`` (vector or scalar valued) at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e.flat[j] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_error(actual, expected):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(np.max(np.abs(expected)), 1e-8)
    return float(np.max(np.abs(actual - expected)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    """Store and print one acceptance verdict line."""
    line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
