"""End-to-end training loop, run configuration, metrics and exports."""

from prefloop.orchestrator.config import (
    ConfigError,
    RunConfig,
    EnvConfig,
    RewardConfig,
    VlmConfig,
    AgentConfig,
    FilterConfig,
    MODES,
    config_from_dict,
    config_to_dict,
    load_config,
)
from prefloop.orchestrator.metrics import RunMetrics
from prefloop.orchestrator.loop import Orchestrator, run
from prefloop.orchestrator.curves import export_reward_curve, reward_curves
from prefloop.orchestrator.evaluate import evaluate_policy

__all__ = [
    "ConfigError",
    "RunConfig",
    "EnvConfig",
    "RewardConfig",
    "VlmConfig",
    "AgentConfig",
    "FilterConfig",
    "MODES",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "RunMetrics",
    "Orchestrator",
    "run",
    "export_reward_curve",
    "reward_curves",
    "evaluate_policy",
]
