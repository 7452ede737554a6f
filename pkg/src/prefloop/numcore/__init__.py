"""Minimal differentiable-function toolkit: MLPs, Adam, gradient checking."""

from prefloop.numcore.mlp import (
    Mlp,
    ShapeError,
    NonFiniteError,
    mlp_init,
    identity_mlp,
    mlp_forward,
    mlp_forward_cached,
    mlp_backward,
    param_arrays,
    zeros_like_params,
    clip_grad_norm,
)
from prefloop.numcore.adam import AdamState, adam_init, adam_step
from prefloop.numcore.gradcheck import GradCheckReport, grad_check
from prefloop.numcore.checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Mlp",
    "ShapeError",
    "NonFiniteError",
    "mlp_init",
    "identity_mlp",
    "mlp_forward",
    "mlp_forward_cached",
    "mlp_backward",
    "param_arrays",
    "zeros_like_params",
    "clip_grad_norm",
    "AdamState",
    "adam_init",
    "adam_step",
    "GradCheckReport",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]
