import json

import numpy as np
import pytest

from dfssg.model import (
    PARAM_NAMES,
    AdamState,
    ValueModel,
    apply_update,
    backward,
    forward,
    forward_raw,
    init_model,
    load_model,
    model_from_dict,
    model_to_dict,
    sample_dropout_mask,
    save_model,
)

from conftest import rel_error


def _random_model(rng, f=4, h=6, scaled=False):
    m = init_model(f, h, seed=int(rng.integers(1 << 30)))
    m = m.with_params({
        "weights_in": m.weights_in,
        "bias_in": rng.normal(0, 0.5, h),
        "weights_out": m.weights_out,
        "bias_out": rng.normal(),
    })
    if scaled:
        m = m.with_input_scaling(rng.normal(size=f), rng.uniform(0.5, 2, f))
    return m


def test_init_bounds_and_determinism():
    a, b = init_model(30, 20, seed=3), init_model(30, 20, seed=3)
    for name in PARAM_NAMES:
        assert np.array_equal(np.asarray(getattr(a, name)), np.asarray(getattr(b, name)))
    assert np.all(np.abs(a.weights_in) <= np.sqrt(6 / 50))
    assert np.all(np.abs(a.weights_out) <= np.sqrt(6 / 21))
    assert np.all(a.bias_in == 0) and a.bias_out == 0
    assert np.all(forward_raw(a, np.zeros((3, 30))) == 0)
    with pytest.raises(ValueError):
        init_model(0, 5)


def test_forward_identical_rows_center_to_zero():
    m = init_model(5, 7, seed=1)
    np.testing.assert_array_equal(forward(m, np.ones((4, 5))), 0)


def test_forward_hand_model():
    m = ValueModel(weights_in=[[2.0]], bias_in=[-1.0], weights_out=[3.0], bias_out=0.0)
    assert forward_raw(m, [[1.0]])[0] == 3.0
    assert forward(m, [[1.0]])[0] == 0.0


def test_forward_linear_in_output_weights():
    rng = np.random.default_rng(0)
    m = _random_model(rng)
    y = rng.normal(size=(5, 4))
    doubled = m.with_params({**m.params(), "weights_out": 2 * m.weights_out})
    np.testing.assert_allclose(forward(doubled, y), 2 * forward(m, y), atol=1e-12)


def test_forward_centered_and_shape_checked():
    rng = np.random.default_rng(1)
    m = _random_model(rng)
    assert abs(forward(m, rng.normal(size=(7, 4))).sum()) <= 1e-10
    with pytest.raises(ValueError):
        forward(m, np.zeros((3, 5)))


def test_input_scaling_is_applied_before_first_layer():
    rng = np.random.default_rng(2)
    m = _random_model(rng, scaled=True)
    y = rng.normal(size=(5, 4))
    plain = ValueModel(m.weights_in, m.bias_in, m.weights_out, m.bias_out)
    np.testing.assert_allclose(forward(m, y), forward(plain, (y - m.input_offset) / m.input_scale))
    with pytest.raises(ValueError):
        m.with_input_scaling(np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        ValueModel(m.weights_in, m.bias_in, m.weights_out, m.bias_out, input_offset=np.zeros(4))


def test_dropout_mask_values():
    rng = np.random.default_rng(3)
    mask = sample_dropout_mask(rng, (50, 40), 0.5)
    assert set(np.unique(mask)) <= {0.0, 2.0}
    np.testing.assert_array_equal(sample_dropout_mask(rng, (3, 4), 0.0), 1.0)
    with pytest.raises(ValueError):
        sample_dropout_mask(rng, (2, 2), 1.0)


def test_dropout_rate_zero_is_identity():
    rng = np.random.default_rng(4)
    m = _random_model(rng)
    y = rng.normal(size=(5, 4))
    mask = sample_dropout_mask(rng, (5, m.hidden_dim), 0.0)
    np.testing.assert_array_equal(forward(m, y, mask), forward(m, y))


@pytest.mark.parametrize("use_mask,scaled", [(False, False), (True, False), (False, True)])
def test_backward_matches_finite_differences(use_mask, scaled):
    rng = np.random.default_rng(5)
    for _ in range(5):
        m = _random_model(rng, scaled=scaled)
        y = rng.normal(size=(6, 4))
        g = rng.normal(size=6)
        mask = sample_dropout_mask(rng, (6, m.hidden_dim), 0.3) if use_mask else None
        grads = backward(m, y, g, mask)
        scale = max(np.max(np.abs(grads[k])) for k in PARAM_NAMES)
        for name in PARAM_NAMES:
            base = np.asarray(m.params()[name], dtype=float)
            fd = np.zeros(base.shape)
            for idx in np.ndindex(base.shape):
                for sign in (1, -1):
                    p = m.params()
                    shifted = base.copy()
                    shifted[idx] += sign * 1e-5
                    p[name] = shifted if shifted.shape else float(shifted)
                    fd[idx] += sign * np.dot(g, forward(m.with_params(p), y, mask)) / 2e-5
            # bias_out has an exactly zero gradient (centering), so errors are
            # measured against the largest gradient entry of the model
            assert np.max(np.abs(grads[name] - fd)) <= 1e-5 * scale, name
            if np.max(np.abs(fd)) > 1e-3 * scale:
                assert rel_error(grads[name], fd) <= 1e-5, name


def test_backward_constant_gradient_is_zero():
    rng = np.random.default_rng(6)
    m = _random_model(rng)
    grads = backward(m, rng.normal(size=(5, 4)), np.full(5, 3.7))
    for name in PARAM_NAMES:
        np.testing.assert_allclose(grads[name], 0, atol=1e-12)


def test_backward_dead_unit_has_zero_incoming_gradient():
    rng = np.random.default_rng(7)
    m = _random_model(rng)
    b = m.bias_in.copy()
    b[2] = -1e6
    m = m.with_params({**m.params(), "bias_in": b})
    grads = backward(m, rng.normal(size=(5, 4)), rng.normal(size=5))
    assert np.all(grads["weights_in"][2] == 0) and grads["bias_in"][2] == 0


def test_backward_shape_check():
    m = init_model(3, 4)
    with pytest.raises(ValueError):
        backward(m, np.zeros((5, 3)), np.zeros(4))


def test_adam_zero_gradient_keeps_parameters():
    m = init_model(3, 4, seed=2)
    zero = {k: np.zeros_like(np.asarray(v)) for k, v in m.params().items()}
    new, state = apply_update(m, zero)
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(np.asarray(getattr(new, name)), np.asarray(getattr(m, name)))
    assert state.step == 1


def test_adam_first_step_reduces_quadratic():
    # loss = 0.5 * sum((theta - target)^2) over every parameter
    m = init_model(3, 4, seed=4)
    target = {k: np.asarray(v) + 1.0 for k, v in m.params().items()}

    def loss(model):
        return sum(0.5 * np.sum((np.asarray(v) - target[k]) ** 2) for k, v in model.params().items())

    grads = {k: np.asarray(v) - target[k] for k, v in m.params().items()}
    new, _ = apply_update(m, grads, learning_rate=1e-2)
    assert loss(new) < loss(m)
    again, _ = apply_update(m, grads, learning_rate=1e-2)
    assert np.array_equal(again.weights_in, new.weights_in)


def test_adam_rejects_shape_mismatch():
    m = init_model(3, 4)
    bad = {k: np.zeros(1) for k in PARAM_NAMES}
    with pytest.raises(ValueError):
        apply_update(m, bad)
    assert isinstance(apply_update(m, {k: np.zeros_like(np.asarray(v)) for k, v in m.params().items()})[1], AdamState)


@pytest.mark.parametrize("scaled", [False, True])
def test_checkpoint_round_trip_is_byte_identical(tmp_path, scaled):
    rng = np.random.default_rng(8)
    m = _random_model(rng, f=5, h=7, scaled=scaled)
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    save_model(m, first)
    loaded = load_model(first)
    save_model(loaded, second)
    assert first.read_bytes() == second.read_bytes()
    y = rng.normal(size=(4, 5))
    assert np.array_equal(forward(loaded, y), forward(m, y))


def test_checkpoint_rejects_foreign_documents():
    with pytest.raises(ValueError):
        model_from_dict({"format": "something-else"})
    data = model_to_dict(init_model(2, 2))
    data["version"] = 99
    with pytest.raises(ValueError):
        model_from_dict(json.loads(json.dumps(data)))


def test_model_validation():
    with pytest.raises(ValueError):
        ValueModel([[1.0]], [0.0], [1.0], 0.0, w_coverage=1.0)
    with pytest.raises(ValueError):
        ValueModel([[np.nan]], [0.0], [1.0], 0.0)
