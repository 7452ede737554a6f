"""Learned reward ensemble trained on pairwise preferences."""

from prefloop.reward.types import PreferenceDatum, SOURCES
from prefloop.reward.ensemble import (
    RewardEnsemble,
    make_ensemble,
    ensemble_reward,
    ensemble_reward_rows,
    segment_return_rows,
    preference_probability,
    preference_loss,
    kl_to_label,
)
from prefloop.reward.training import train_ensemble, relabel_buffer, ranking_accuracy

__all__ = [
    "PreferenceDatum",
    "SOURCES",
    "RewardEnsemble",
    "make_ensemble",
    "ensemble_reward",
    "ensemble_reward_rows",
    "segment_return_rows",
    "preference_probability",
    "preference_loss",
    "kl_to_label",
    "train_ensemble",
    "relabel_buffer",
    "ranking_accuracy",
]
