import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dfssg.game import (
    Dataset,
    SecurityGame,
    check_coverage,
    cross_entropy_loss,
    defender_expected_utility,
    deu_cross_derivative,
    deu_gradient,
    deu_hessian,
    empirical_attack_distribution,
    entropy,
    qr_attack_distribution,
    suqr_attack_distribution,
    suqr_deu,
)

from conftest import central_difference, random_suqr, rel_error

finite = st.floats(-50, 50, allow_nan=False)


# --- attack models ---------------------------------------------------------

def test_suqr_symmetric_is_uniform():
    np.testing.assert_allclose(suqr_attack_distribution([0, 0], [0, 0], -4.0), [0.5, 0.5])


def test_suqr_hand_value():
    q = suqr_attack_distribution([1, 0], [0, 0], -1.0)
    expected0 = 1.0 / (1.0 + np.e)
    np.testing.assert_allclose(q, [expected0, 1 - expected0], atol=1e-15)
    np.testing.assert_allclose(q, [0.268941, 0.731059], atol=1e-6)


@pytest.mark.parametrize("c", [-30.0, 0.0, 2.5, 400.0])
def test_suqr_equal_phi_gives_uniform(c):
    q = suqr_attack_distribution([0.3] * 3, [c] * 3, -2.0)
    np.testing.assert_allclose(q, [1 / 3] * 3, atol=1e-15)


def test_suqr_rejects_bad_inputs():
    with pytest.raises(ValueError):
        suqr_attack_distribution([0, 0], [0, 0], 0.0)
    with pytest.raises(ValueError):
        suqr_attack_distribution([0, 0], [0, 0], 1.0)
    with pytest.raises(ValueError):
        suqr_attack_distribution([0, 0, 0], [0, 0], -1.0)


def test_suqr_large_phi_is_stable():
    q = suqr_attack_distribution([0.1, 0.5, 0.9], [700.0, -700.0, 699.0], -4.0)
    assert np.all(np.isfinite(q))
    assert abs(q.sum() - 1) <= 1e-12


@given(
    st.integers(1, 50).flatmap(lambda n: st.tuples(
        arrays(float, n, elements=st.floats(0, 1)),
        arrays(float, n, elements=finite),
    )),
    st.floats(-20, -1e-3),
)
def test_suqr_is_positive_distribution(pair, w):
    p, phi = pair
    q = suqr_attack_distribution(p, phi, w)
    assert abs(q.sum() - 1) <= 1e-12
    assert np.all(q > 0)


@given(
    st.integers(1, 30).flatmap(lambda n: st.tuples(
        arrays(float, n, elements=st.floats(0, 1)),
        arrays(float, n, elements=st.floats(-10, 10)),
    )),
    st.floats(-10, -0.01),
    st.floats(-100, 100),
)
def test_suqr_gauge_invariance(pair, w, c):
    p, phi = pair
    np.testing.assert_allclose(suqr_attack_distribution(p, phi + c, w),
                               suqr_attack_distribution(p, phi, w), atol=1e-12)


def test_qr_examples():
    np.testing.assert_allclose(qr_attack_distribution([1, 1], [0.5, 0.5], 1.0), [0.5, 0.5])
    assert qr_attack_distribution([1, 0], [0, 0], 50.0)[0] >= 1 - 1e-15
    with pytest.raises(ValueError):
        qr_attack_distribution([1, 0], [0, 0], 0.0)


# --- defender utility -------------------------------------------------------

def test_deu_hand_value():
    assert defender_expected_utility([0.5, 0.5], [0.5, 0.5], [-1, -1]) == pytest.approx(-0.5)


def test_deu_full_coverage_and_zero_values():
    assert defender_expected_utility([1, 1], [0.3, 0.7], [-4, -9]) == 0
    assert defender_expected_utility([0.2, 0.1], [0.3, 0.7], [0, 0]) == 0


def test_deu_dimension_mismatch():
    with pytest.raises(ValueError):
        defender_expected_utility([0.5], [0.5, 0.5], [-1, -1])


@given(
    st.integers(1, 20).flatmap(lambda n: st.tuples(
        arrays(float, n, elements=st.floats(0, 1)),
        arrays(float, n, elements=st.floats(-10, 10)),
        arrays(float, n, elements=st.floats(-10, 0)),
    )),
    st.data(),
)
def test_deu_nonpositive_and_monotone_in_values(triple, data):
    p, phi, u = triple
    q = suqr_attack_distribution(p, phi, -3.0)
    deu = defender_expected_utility(p, q, u)
    assert deu <= 0
    i = data.draw(st.integers(0, len(u) - 1))
    bumped = u.copy()
    bumped[i] -= data.draw(st.floats(0, 5))
    assert defender_expected_utility(p, q, bumped) <= deu + 1e-12


@pytest.mark.parametrize("n", [2, 8])
def test_deu_gradient_matches_finite_differences(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        p, phi, w, u = random_suqr(rng, n)
        fd = central_difference(lambda x: suqr_deu(x, phi, w, u), p, 1e-5)
        assert rel_error(deu_gradient(p, phi, w, u), fd) <= 1e-6


def test_deu_gradient_zero_values():
    assert np.all(deu_gradient([0.2, 0.5], [0.1, -0.1], -4.0, [0.0, 0.0]) == 0)


def test_deu_gradient_small_w_limit():
    rng = np.random.default_rng(7)
    p, phi, _, u = random_suqr(rng, 5)
    q = suqr_attack_distribution(p, phi, -1e-9)
    np.testing.assert_allclose(deu_gradient(p, phi, -1e-9, u), -q * u, atol=1e-6)
    with pytest.raises(ValueError):
        deu_gradient(p, phi, -0.0, u)


@pytest.mark.parametrize("n", [2, 8])
def test_deu_hessian_matches_finite_differences(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(20):
        p, phi, w, u = random_suqr(rng, n)
        fd = central_difference(lambda x: deu_gradient(x, phi, w, u), p, 1e-5)
        hess = deu_hessian(p, phi, w, u)
        assert rel_error(hess, fd) <= 1e-4
        assert np.max(np.abs(hess - hess.T)) <= 1e-10


def test_deu_hessian_zero_values():
    assert np.all(deu_hessian([0.2, 0.5, 0.1], [0.1, -0.1, 0], -4.0, [0.0] * 3) == 0)


def test_deu_linear_along_ones():
    rng = np.random.default_rng(3)
    p, phi, w, u = random_suqr(rng, 6)
    ones = np.ones(6)
    assert abs(ones @ deu_hessian(p, phi, w, u) @ ones) <= 1e-10


def test_cross_derivative_matches_finite_differences():
    rng = np.random.default_rng(5)
    for n in (2, 4, 7):
        p, phi, w, u = random_suqr(rng, n)
        fd = central_difference(lambda f: deu_gradient(p, f, w, u), phi, 1e-5)
        cross = deu_cross_derivative(p, phi, w, u)
        assert rel_error(cross, fd) <= 1e-6
        np.testing.assert_allclose(cross.sum(axis=1), 0, atol=1e-12)


# --- empirical distribution and losses ---------------------------------------

def test_empirical_examples():
    np.testing.assert_allclose(empirical_attack_distribution([3, 1]), [0.75, 0.25])
    np.testing.assert_allclose(empirical_attack_distribution([5, 5, 5, 5]), [0.25] * 4)
    np.testing.assert_allclose(empirical_attack_distribution([0, 10]), [0, 1])
    with pytest.raises(ValueError):
        empirical_attack_distribution([0, 0])
    with pytest.raises(ValueError):
        empirical_attack_distribution([-1, 2])


def test_cross_entropy_examples():
    assert cross_entropy_loss([0.25] * 4, [0.25] * 4) == pytest.approx(np.log(4))
    assert cross_entropy_loss([1 - 1e-12, 1e-12], [1, 0]) == pytest.approx(1e-12, rel=1e-3)
    with pytest.raises(ValueError):
        cross_entropy_loss([1.0, 0.0], [0.5, 0.5])


@given(st.integers(2, 10).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.floats(0.01, 1)),
    arrays(float, n, elements=st.floats(0, 1)),
)))
def test_gibbs_inequality(pair):
    a, b = pair
    q_hat = a / a.sum()
    if b.sum() == 0:
        b = np.ones_like(b)
    q_tilde = b / b.sum()
    assert cross_entropy_loss(q_hat, q_tilde) >= entropy(q_tilde) - 1e-12
    assert cross_entropy_loss(q_hat, q_hat) == pytest.approx(entropy(q_hat), abs=1e-12)


# --- game container ----------------------------------------------------------

def _game(**kw):
    base = dict(features=np.zeros((3, 2)), defender_values=[-1, -2, 0], budget=1.0)
    base.update(kw)
    return SecurityGame(**base)


def test_security_game_valid():
    g = _game(historical_coverage=[0.3, 0.3, 0.3], attack_counts=[1, 0, 2])
    assert g.target_count == 3 and g.n_features == 2 and g.has_attacks


@pytest.mark.parametrize("kw", [
    dict(defender_values=[-1, 2, 0]),
    dict(budget=0.0),
    dict(budget=4.0),
    dict(attack_counts=[1, 1, 1]),
    dict(historical_coverage=[0.6, 0.6, 0.6]),
    dict(historical_coverage=[1.2, 0, 0]),
    dict(features=np.zeros((0, 2)), defender_values=[]),
])
def test_security_game_rejects(kw):
    with pytest.raises(ValueError):
        _game(**kw)


def test_check_coverage():
    check_coverage([0.5, 0.5], 1.0)
    with pytest.raises(ValueError):
        check_coverage([0.5, 0.6], 1.0)


def test_dataset_requires_attacks_on_train():
    with pytest.raises(ValueError, match="train game 0"):
        Dataset([_game()], [], [])
    with pytest.raises(ValueError):
        Dataset([], [], [], w_coverage=1.0)
