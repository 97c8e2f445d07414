"""Target-value network: one hidden ReLU layer, linear output, mean-centered.

Forward and reverse passes are written out by hand in float64; the KKT
solves downstream need double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

PARAM_NAMES = ("weights_in", "bias_in", "weights_out", "bias_out")
CHECKPOINT_FORMAT = "dfssg-value-model"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ValueModel:
    weights_in: np.ndarray  # (hidden, input)
    bias_in: np.ndarray  # (hidden,)
    weights_out: np.ndarray  # (hidden,)
    bias_out: float
    w_coverage: float = -4.0
    # fixed affine input map y -> (y - input_offset) / input_scale; None is identity
    input_offset: Optional[np.ndarray] = None
    input_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        w_in = np.asarray(self.weights_in, dtype=float)
        hidden = w_in.shape[0]
        b_in = np.asarray(self.bias_in, dtype=float).reshape(hidden)
        w_out = np.asarray(self.weights_out, dtype=float).reshape(hidden)
        object.__setattr__(self, "weights_in", w_in)
        object.__setattr__(self, "bias_in", b_in)
        object.__setattr__(self, "weights_out", w_out)
        object.__setattr__(self, "bias_out", float(self.bias_out))
        if not self.w_coverage < 0:
            raise ValueError("w_coverage must be negative")
        if (self.input_offset is None) != (self.input_scale is None):
            raise ValueError("input_offset and input_scale must be given together")
        if self.input_offset is not None:
            offset = np.asarray(self.input_offset, dtype=float).reshape(w_in.shape[1])
            scale = np.asarray(self.input_scale, dtype=float).reshape(w_in.shape[1])
            if not np.all(scale > 0):
                raise ValueError("input_scale must be positive")
            object.__setattr__(self, "input_offset", offset)
            object.__setattr__(self, "input_scale", scale)
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def input_dim(self):
        return self.weights_in.shape[1]

    @property
    def hidden_dim(self):
        return self.weights_in.shape[0]

    def params(self):
        return {name: np.asarray(getattr(self, name), dtype=float) for name in PARAM_NAMES}

    def with_params(self, params):
        return replace(self, **{name: params[name] for name in PARAM_NAMES})

    def with_input_scaling(self, offset, scale):
        return replace(self, input_offset=offset, input_scale=scale)


def init_model(input_dim, hidden_dim=200, seed=0, w_coverage=-4.0):
    """Glorot-uniform weights, zero biases."""
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    bound_in = np.sqrt(6.0 / (input_dim + hidden_dim))
    bound_out = np.sqrt(6.0 / (hidden_dim + 1))
    return ValueModel(
        weights_in=rng.uniform(-bound_in, bound_in, (hidden_dim, input_dim)),
        bias_in=np.zeros(hidden_dim),
        weights_out=rng.uniform(-bound_out, bound_out, hidden_dim),
        bias_out=0.0,
        w_coverage=w_coverage,
    )


def sample_dropout_mask(rng, shape, rate):
    """Inverted-dropout mask: entries are 0 or ``1 / (1 - rate)``."""
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must lie in [0, 1)")
    if rate == 0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _check_features(model, features):
    y = np.asarray(features, dtype=float)
    if y.ndim != 2 or y.shape[1] != model.input_dim:
        raise ValueError(f"features must have shape (n_targets, {model.input_dim}), got {y.shape}")
    if model.input_offset is not None:
        y = (y - model.input_offset) / model.input_scale
    return y


def _hidden(model, y, dropout_mask):
    pre = y @ model.weights_in.T + model.bias_in
    act = np.maximum(pre, 0.0)
    if dropout_mask is not None:
        act = act * dropout_mask
    return pre, act


def forward_raw(model, features, dropout_mask=None):
    """Network output before centering."""
    y = _check_features(model, features)
    _, act = _hidden(model, y, dropout_mask)
    return act @ model.weights_out + model.bias_out


def forward(model, features, dropout_mask=None):
    """Mean-centered attractiveness for each row of ``features``."""
    raw = forward_raw(model, features, dropout_mask)
    return raw - raw.mean()


def backward(model, features, grad_phi, dropout_mask=None):
    """Gradients of ``<grad_phi, forward(model, features)>`` for every parameter."""
    y = _check_features(model, features)
    g = np.asarray(grad_phi, dtype=float)
    if g.shape != (y.shape[0],):
        raise ValueError(f"grad_phi must have shape ({y.shape[0]},)")
    g = g - g.mean()
    pre, act = _hidden(model, y, dropout_mask)
    d_act = np.outer(g, model.weights_out)
    if dropout_mask is not None:
        d_act = d_act * dropout_mask
    d_pre = d_act * (pre > 0)
    return {
        "weights_in": d_pre.T @ y,
        "bias_in": d_pre.sum(axis=0),
        "weights_out": act.T @ g,
        "bias_out": float(g.sum()),
    }


@dataclass(frozen=True, eq=False)
class AdamState:
    first: dict
    second: dict
    step: int = 0


def apply_update(model, gradients, state=None, learning_rate=1e-3,
                 beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam step in the descent direction of ``gradients``.

    Returns ``(new_model, new_state)``; inputs are not modified.
    """
    params = model.params()
    if state is None:
        state = AdamState({k: np.zeros_like(v) for k, v in params.items()},
                          {k: np.zeros_like(v) for k, v in params.items()})
    t = state.step + 1
    first, second, new = {}, {}, {}
    for name, value in params.items():
        g = np.asarray(gradients[name], dtype=float)
        if g.shape != np.shape(value):
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {np.shape(value)}")
        m = beta1 * state.first[name] + (1 - beta1) * g
        v = beta2 * state.second[name] + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        new[name] = value - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        first[name], second[name] = m, v
    return model.with_params(new), AdamState(first, second, t)


def model_to_dict(model):
    data = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "w_coverage": float(model.w_coverage),
        "weights_in": model.weights_in.tolist(),
        "bias_in": model.bias_in.tolist(),
        "weights_out": model.weights_out.tolist(),
        "bias_out": float(model.bias_out),
    }
    if model.input_offset is not None:
        data["input_offset"] = model.input_offset.tolist()
        data["input_scale"] = model.input_scale.tolist()
    return data


def model_from_dict(data):
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a value-model checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')}")
    model = ValueModel(
        weights_in=np.array(data["weights_in"], dtype=float).reshape(data["hidden_dim"], data["input_dim"]),
        bias_in=data["bias_in"],
        weights_out=data["weights_out"],
        bias_out=data["bias_out"],
        w_coverage=data["w_coverage"],
        input_offset=data.get("input_offset"),
        input_scale=data.get("input_scale"),
    )
    return model


def save_model(model, path):
    """Write a JSON checkpoint; floats use shortest round-trip repr."""
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
