"""Annotators, KL-based noise filtering, budgets and the live label queue."""

from prefloop.feedback.annotators import (
    vlm_annotate,
    scripted_annotate,
    scripted_label_for_pair,
)
from prefloop.feedback.filtering import (
    FilterState,
    PartitionResult,
    compute_thresholds,
    partition,
    TAU_UPPER,
)
from prefloop.feedback.budget import HumanBudget, select_human_subset
from prefloop.feedback.queue import AnnotationQueue, DuplicateLabelError, queue_roundtrip

__all__ = [
    "vlm_annotate",
    "scripted_annotate",
    "scripted_label_for_pair",
    "FilterState",
    "PartitionResult",
    "compute_thresholds",
    "partition",
    "TAU_UPPER",
    "HumanBudget",
    "select_human_subset",
    "AnnotationQueue",
    "DuplicateLabelError",
    "queue_roundtrip",
]
