"""Deterministic 2-D point-mass tasks, observation rendering and replay."""

from prefloop.envsim.tasks import TaskSpec, make_task, TASK_IDS
from prefloop.envsim.dynamics import (
    EnvState,
    Action,
    step,
    reset_state,
    ARENA_MIN,
    ARENA_MAX,
    DT,
    FRICTION,
    V_MAX,
    CONTACT_RADIUS,
    HORIZON,
    STATE_DIM,
)
from prefloop.envsim.render import ObservationRenderer, OBS_DIM
from prefloop.envsim.replay import (
    ReplayBuffer,
    Segment,
    NotEnoughExperienceError,
    ground_truth_return,
    sample_segment_pairs,
)
from prefloop.envsim.traces import (
    save_trace_jsonl,
    load_trace_jsonl,
    rollout_scripted_expert,
    rollout_policy,
)

__all__ = [
    "TaskSpec",
    "make_task",
    "TASK_IDS",
    "EnvState",
    "Action",
    "step",
    "reset_state",
    "ARENA_MIN",
    "ARENA_MAX",
    "DT",
    "FRICTION",
    "V_MAX",
    "CONTACT_RADIUS",
    "HORIZON",
    "STATE_DIM",
    "ObservationRenderer",
    "OBS_DIM",
    "ReplayBuffer",
    "Segment",
    "NotEnoughExperienceError",
    "ground_truth_return",
    "sample_segment_pairs",
    "save_trace_jsonl",
    "load_trace_jsonl",
    "rollout_scripted_expert",
    "rollout_policy",
]
