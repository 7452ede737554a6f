"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GradCheckReport:
    max_relative_error: float
    per_parameter_errors: list[float]


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(
    loss_fn,
    grad_fn,
    params: list[np.ndarray],
    probe_count: int = 64,
    rng: np.random.Generator | None = None,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare grad_fn(params) against central differences of loss_fn.

    Probes ``probe_count`` randomly selected scalar coordinates across all
    parameter tensors. loss_fn must be deterministic; params are restored
    after probing.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    analytic = grad_fn(params)
    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    n_probes = min(probe_count, total)
    flat_ids = rng.choice(total, size=n_probes, replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    errors = []
    for flat in flat_ids:
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        local = int(flat - offsets[pi])
        p = params[pi].reshape(-1)
        orig = p[local]
        p[local] = orig + h
        up = loss_fn(params)
        p[local] = orig - h
        down = loss_fn(params)
        p[local] = orig
        numeric = (up - down) / (2.0 * h)
        a = float(analytic[pi].reshape(-1)[local])
        errors.append(_relative_error(a, numeric))
    return GradCheckReport(max_relative_error=max(errors), per_parameter_errors=errors)
