"""Adapter + inverse-head checkpoints for reuse across tasks."""

from __future__ import annotations

import numpy as np

from prefloop.numcore import Mlp, load_checkpoint, save_checkpoint
from prefloop.numcore.checkpoint import CheckpointError
from prefloop.vlm.adapters import Adapters


def _mlp_tensors(prefix: str, mlp: Mlp) -> dict[str, np.ndarray]:
    out = {}
    for i, (w, b) in enumerate(mlp.layers):
        out[f"{prefix}/w{i}"] = w
        out[f"{prefix}/b{i}"] = b
    return out


def _mlp_from_tensors(prefix: str, tensors: dict, template: Mlp) -> Mlp:
    layers = []
    for i in range(len(template.layers)):
        try:
            w = tensors[f"{prefix}/w{i}"]
            b = tensors[f"{prefix}/b{i}"]
        except KeyError as exc:
            raise CheckpointError(f"checkpoint missing tensor {exc}") from exc
        if w.shape != template.layers[i][0].shape:
            raise CheckpointError(
                f"{prefix}/w{i} shape {w.shape} != expected "
                f"{template.layers[i][0].shape}"
            )
        layers.append((w, b))
    return Mlp(layers, template.hidden_activation, template.output_activation,
               template.leaky_slope)


def save_vlm_checkpoint(path, adapters: Adapters, head: Mlp, seed: int,
                        source_task: str):
    tensors = {}
    tensors.update(_mlp_tensors("language_adapter", adapters.language))
    tensors.update(_mlp_tensors("image_adapter", adapters.image))
    tensors.update(_mlp_tensors("inverse_head", head))
    return save_checkpoint(path, tensors,
                           meta={"seed": seed, "source_task": source_task})


def load_vlm_checkpoint(path, adapters_template: Adapters, head_template: Mlp):
    """Returns (Adapters, head, meta); rejects shape mismatches whole."""
    tensors, meta = load_checkpoint(path)
    adapters = Adapters(
        language=_mlp_from_tensors("language_adapter", tensors,
                                   adapters_template.language),
        image=_mlp_from_tensors("image_adapter", tensors,
                                adapters_template.image),
    )
    head = _mlp_from_tensors("inverse_head", tensors, head_template)
    return adapters, head, meta
