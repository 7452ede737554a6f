"""Surrogate vision-language model: frozen encoders, adapters, fine-tuning."""

from prefloop.vlm.encoders import FrozenEncoders, DegenerateEmbeddingError, EMBED_DIM
from prefloop.vlm.adapters import (
    Adapters,
    init_adapters,
    base_reward,
    adapted_reward,
    segment_return,
    cosine,
)
from prefloop.vlm.inverse_dynamics import make_inverse_head, inverse_dynamics_loss
from prefloop.vlm.finetune import VlmTrainer
from prefloop.vlm.checkpoint import save_vlm_checkpoint, load_vlm_checkpoint

__all__ = [
    "FrozenEncoders",
    "DegenerateEmbeddingError",
    "EMBED_DIM",
    "Adapters",
    "init_adapters",
    "base_reward",
    "adapted_reward",
    "segment_return",
    "cosine",
    "make_inverse_head",
    "inverse_dynamics_loss",
    "VlmTrainer",
    "save_vlm_checkpoint",
    "load_vlm_checkpoint",
]
