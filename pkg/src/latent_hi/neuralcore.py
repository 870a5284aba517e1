"""Small dense-network engine: affine layers, dropout, reverse-mode gradients and Adam.

Inputs are row-major batches of shape (n, in_dim); a 1-D input is treated as a
batch of one and the output is returned 1-D again.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ShapeError, TrainingError

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "tanh"
    dropout_rate: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"bias {self.bias.shape} does not match weights {self.weights.shape}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def copy(self, **changes) -> "DenseLayer":
        return replace(self, weights=self.weights.copy(), bias=self.bias.copy(), **changes)


def glorot_layer(in_dim, out_dim, rng, activation="tanh", dropout_rate=0.0) -> DenseLayer:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return DenseLayer(w, np.zeros(out_dim), activation, dropout_rate)


def _activate(name, pre):
    if name == "tanh":
        return np.tanh(pre)
    if name == "relu":
        return np.maximum(pre, 0.0)
    return pre


def _activation_grad(name, pre):
    if name == "tanh":
        return 1.0 - np.tanh(pre) ** 2
    if name == "relu":
        # subgradient 0 at exactly 0
        return (pre > 0).astype(np.float64)
    return np.ones_like(pre)


@dataclass
class ForwardTrace:
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    masks: list[np.ndarray | None] = field(default_factory=list)
    squeeze: bool = False


def forward(layers, x, dropout_on=False, rng=None):
    """Run the chain; returns (output, trace).

    With ``dropout_on`` each post-activation of a layer with a non-zero
    dropout_rate is zeroed with that probability and survivors are scaled by
    1/(1-rate).
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    trace = ForwardTrace(squeeze=squeeze)
    for i, layer in enumerate(layers):
        if h.shape[1] != layer.in_dim:
            raise ShapeError(f"layer {i}: expected input dim {layer.in_dim}, got {h.shape[1]}")
        trace.inputs.append(h)
        pre = h @ layer.weights.T + layer.bias
        post = _activate(layer.activation, pre)
        mask = None
        if dropout_on and layer.dropout_rate > 0.0:
            if rng is None:
                raise ValueError("dropout requires an rng")
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(post.shape) < keep) / keep
            post = post * mask
        trace.pre.append(pre)
        trace.post.append(post)
        trace.masks.append(mask)
        h = post
    return (h[0] if squeeze else h), trace


def backward(layers, trace, loss_grad):
    """Reverse-mode pass through a recorded forward trace.

    Returns ``(grads, grad_input)`` where ``grads`` is a list of (dW, db) per
    layer, summed over the batch.
    """
    if len(trace.pre) != len(layers):
        raise ShapeError(f"trace covers {len(trace.pre)} layers, network has {len(layers)}")
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        pre, inp, mask = trace.pre[i], trace.inputs[i], trace.masks[i]
        if pre.shape[1] != layer.out_dim or inp.shape[1] != layer.in_dim or g.shape != pre.shape:
            raise ShapeError(f"layer {i}: trace shapes do not match the layer (stale trace?)")
        if mask is not None:
            g = g * mask
        delta = g * _activation_grad(layer.activation, pre)
        grads[i] = (delta.T @ inp, delta.sum(axis=0))
        g = delta @ layer.weights
    grad_input = g[0] if trace.squeeze else g
    return grads, grad_input


def layer_params(layers) -> list[np.ndarray]:
    out = []
    for layer in layers:
        out.extend([layer.weights, layer.bias])
    return out


def set_layer_params(layers, params):
    for i, layer in enumerate(layers):
        layer.weights = params[2 * i]
        layer.bias = params[2 * i + 1]


def flatten_grads(grads) -> list[np.ndarray]:
    out = []
    for dw, db in grads:
        out.extend([dw, db])
    return out


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update. Returns (new_params, new_state); inputs are not modified.

    Parameters are assumed to come from :func:`layer_params`, so parameter i
    belongs to layer i // 2.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state differ in length")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for i, (p, g, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in layer {i // 2}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps_adam))
        new_m.append(m)
        new_v.append(v)
    return new_p, replace(state, m=new_m, v=new_v, step=t)
