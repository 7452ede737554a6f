"""KL-divergence partitioning of machine labels into clean / uncertain / flipped.

Per filter session: the lower threshold is (-ln rho + alpha * rho) plus an
uncertainty allowance beta_t * std(KL) that decays linearly over sessions;
the upper threshold is fixed. Samples below the lower threshold count as
clean, samples above the upper threshold get their labels flipped, the rest
wait for human review. rho tracks the maximum loss seen on the latest clean
set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from prefloop.reward.ensemble import datum_kl

logger = logging.getLogger(__name__)

TAU_UPPER = 3.0 * math.log(10.0)


@dataclass
class FilterState:
    alpha: float = 0.5
    beta_min: float = 1.0
    beta_max: float = 3.0
    decay_rate: float = 1.0 / 300.0
    session: int = 0                 # filter sessions completed
    rho: float = math.log(2.0)       # max loss over the latest trusted set
    tau_upper: float = TAU_UPPER
    kl_std: float = 0.0
    tau_lower: float = float("nan")

    def __post_init__(self):
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must be in (0, 0.5], got {self.alpha}")

    @property
    def beta(self) -> float:
        return max(self.beta_min, self.beta_max - self.decay_rate * self.session)


@dataclass
class PartitionResult:
    clean: list
    flipped: list
    uncertain: list
    kl_values: list[float] = field(default_factory=list)
    warning: str | None = None


def compute_thresholds(state: FilterState, kl_values) -> FilterState:
    """Set this session's lower threshold from rho, alpha and the KL spread."""
    kl_values = np.asarray(kl_values, dtype=np.float64)
    if kl_values.size == 0:
        raise ValueError("compute_thresholds needs at least one KL value")
    if state.rho <= 0.0:
        raise ValueError(f"rho must be positive, got {state.rho}")
    state.kl_std = float(np.std(kl_values))
    state.tau_lower = (
        -math.log(state.rho) + state.alpha * state.rho + state.beta * state.kl_std
    )
    state.session += 1
    return state


def partition(batch: list, ensemble, state: FilterState) -> PartitionResult:
    """Split a VLM-labeled batch by each sample's KL to the ensemble prediction.

    Thresholds must have been computed for this batch. Updates rho to the
    maximum loss over this session's clean set (kept unchanged when the clean
    set is empty).
    """
    if math.isnan(state.tau_lower):
        raise ValueError("compute_thresholds must run before partition")
    kl = np.array([datum_kl(ensemble, d) for d in batch])
    warning = None
    if state.tau_lower > state.tau_upper:
        logger.warning("tau_lower %.3f exceeds tau_upper %.3f; routing all "
                       "non-flipped samples to uncertain", state.tau_lower,
                       state.tau_upper)
        warning = "tau_lower_exceeds_tau_upper"
        clean_mask = np.zeros(len(batch), dtype=bool)
    else:
        clean_mask = kl < state.tau_lower
    flip_mask = kl > state.tau_upper
    clean_mask &= ~flip_mask
    uncertain_mask = ~clean_mask & ~flip_mask

    clean = [d for d, m in zip(batch, clean_mask) if m]
    flipped = [d.flipped() for d, m in zip(batch, flip_mask) if m]
    uncertain = [d for d, m in zip(batch, uncertain_mask) if m]
    if clean:
        state.rho = float(np.max(kl[clean_mask]))
    return PartitionResult(clean=clean, flipped=flipped, uncertain=uncertain,
                           kl_values=kl.tolist(), warning=warning)
