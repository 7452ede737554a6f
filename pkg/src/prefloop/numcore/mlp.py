"""Plain numpy MLPs with hand-written backprop.

All arithmetic is float64. Weights are stored as (out, in) matrices so a
batch forward is ``x @ W.T + b`` over rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Input or gradient dimensions do not match the network."""


class NonFiniteError(ValueError):
    """A NaN or Inf showed up where only finite values are allowed."""


ACTIVATIONS = ("relu", "leaky_relu", "tanh", "identity")


@dataclass
class Mlp:
    """Weights, biases and activation choices for one fully-connected net.

    ``layers`` is an ordered list of (weight, bias) pairs; consecutive layer
    dimensions chain. ``hidden_activation`` applies to every layer but the
    last, ``output_activation`` to the last.
    """

    layers: list[tuple[np.ndarray, np.ndarray]]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.hidden_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        if self.output_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.output_activation!r}")
        for i in range(len(self.layers) - 1):
            out_dim = self.layers[i][0].shape[0]
            in_next = self.layers[i + 1][0].shape[1]
            if out_dim != in_next:
                raise ShapeError(
                    f"layer {i} outputs {out_dim} but layer {i + 1} expects {in_next}"
                )
        for w, b in self.layers:
            if w.shape[0] != b.shape[0]:
                raise ShapeError(f"weight {w.shape} does not match bias {b.shape}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NonFiniteError("non-finite parameter entries")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]


def _activate(z: np.ndarray, kind: str, slope: float) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "leaky_relu":
        return np.where(z > 0.0, z, slope * z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(z: np.ndarray, a: np.ndarray, kind: str, slope: float) -> np.ndarray:
    # derivative wrt the pre-activation z; a is the already-computed activation
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "leaky_relu":
        return np.where(z > 0.0, 1.0, slope)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def mlp_init(
    sizes: list[int],
    hidden_activation: str = "relu",
    output_activation: str = "identity",
    rng: np.random.Generator | None = None,
    leaky_slope: float = 0.01,
) -> Mlp:
    """Build an MLP with seeded uniform fan-in initialization.

    He-style scaling for relu/leaky-relu layers, Xavier-style for tanh and
    identity layers.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n_layers = len(sizes) - 1
    layers = []
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        act = hidden_activation if i < n_layers - 1 else output_activation
        if act in ("relu", "leaky_relu"):
            bound = math.sqrt(6.0 / fan_in)
        else:
            bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        layers.append((w, b))
    return Mlp(layers, hidden_activation, output_activation, leaky_slope)


def identity_mlp(
    dim: int,
    hidden: int,
    rng: np.random.Generator | None = None,
    jitter: float = 0.0,
    shift: float = 10.0,
) -> Mlp:
    """Two-layer relu MLP that computes the identity on inputs > -shift.

    Uses the bias-shift trick relu(x + shift) - shift = x; needs hidden >= dim.
    ``jitter`` adds seeded noise to break exact symmetry when the map is used
    as a trainable starting point.
    """
    if hidden < dim:
        raise ShapeError(f"identity map needs hidden >= dim, got {hidden} < {dim}")
    w1 = np.zeros((hidden, dim))
    w1[:dim, :] = np.eye(dim)
    b1 = np.zeros(hidden)
    b1[:dim] = shift
    w2 = np.zeros((dim, hidden))
    w2[:, :dim] = np.eye(dim)
    b2 = np.full(dim, -shift)
    if jitter > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        w1 = w1 + jitter * rng.standard_normal(w1.shape)
        w2 = w2 + jitter * rng.standard_normal(w2.shape)
    return Mlp([(w1, b1), (w2, b2)], "relu", "identity")


def _check_input(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != mlp.in_dim:
        raise ShapeError(f"input dim {x.shape[-1]} != expected {mlp.in_dim}")
    return x


def mlp_forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """Forward pass; accepts a single vector or a batch of row vectors."""
    x = _check_input(mlp, x)
    n_layers = len(mlp.layers)
    a = x
    for i, (w, b) in enumerate(mlp.layers):
        z = a @ w.T + b
        kind = mlp.hidden_activation if i < n_layers - 1 else mlp.output_activation
        a = _activate(z, kind, mlp.leaky_slope)
    return a


def mlp_forward_cached(mlp: Mlp, x: np.ndarray):
    """Forward pass keeping per-layer inputs and pre-activations for backprop."""
    x = _check_input(mlp, x)
    n_layers = len(mlp.layers)
    a = x
    cache = []
    for i, (w, b) in enumerate(mlp.layers):
        z = a @ w.T + b
        kind = mlp.hidden_activation if i < n_layers - 1 else mlp.output_activation
        out = _activate(z, kind, mlp.leaky_slope)
        cache.append((a, z, out, kind))
        a = out
    return a, cache


def mlp_backward(mlp: Mlp, cache, upstream_grad: np.ndarray):
    """Gradients of sum(upstream_grad * forward(x)) wrt parameters and input.

    ``cache`` comes from :func:`mlp_forward_cached` on the same input.
    Returns (param_grads, input_grad) where param_grads mirrors ``layers``.
    """
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape[-1] != mlp.out_dim:
        raise ShapeError(f"upstream grad dim {g.shape[-1]} != out dim {mlp.out_dim}")
    if g.shape != cache[-1][2].shape:
        raise ShapeError(
            f"upstream grad shape {g.shape} != output shape {cache[-1][2].shape}"
        )
    param_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(mlp.layers)
    for i in range(len(mlp.layers) - 1, -1, -1):
        a_in, z, a_out, kind = cache[i]
        g = g * _activate_grad(z, a_out, kind, mlp.leaky_slope)
        w, _ = mlp.layers[i]
        if g.ndim == 1:
            dw = np.outer(g, a_in)
            db = g.copy()
        else:
            dw = g.T @ a_in
            db = g.sum(axis=0)
        param_grads[i] = (dw, db)
        g = g @ w
    return param_grads, g


def param_arrays(mlp: Mlp) -> list[np.ndarray]:
    """Flat list of parameter tensors in layer order: w0, b0, w1, b1, ..."""
    out = []
    for w, b in mlp.layers:
        out.append(w)
        out.append(b)
    return out


def grad_arrays(param_grads) -> list[np.ndarray]:
    """Flatten mlp_backward's per-layer grads to match param_arrays order."""
    out = []
    for dw, db in param_grads:
        out.append(dw)
        out.append(db)
    return out


def zeros_like_params(params: list[np.ndarray]) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in params]


def add_grads(acc: list[np.ndarray], grads: list[np.ndarray], scale: float = 1.0):
    for a, g in zip(acc, grads):
        a += scale * g


def clip_grad_norm(grads: list[np.ndarray], max_norm: float = 10.0) -> float:
    """Scale the whole gradient list so its global L2 norm is <= max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm and total > 0.0:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total
