"""Run configuration: dataclasses mirrored one-to-one by the JSON config file.

Unknown keys anywhere in the file are rejected, as are mode/budget
contradictions, so a typo'd experiment fails before it spends compute.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

MODES = (
    "prefvlm",
    "pebble_human_only",
    "vlm_as_reward",
    "vlm_pref_only",
    "no_selection",
    "no_inverse_dynamics",
)

TEACHERS = ("scripted", "interactive")  # plus noisy:<eps>


class ConfigError(ValueError):
    """The run configuration is malformed or self-contradictory."""


@dataclass
class EnvConfig:
    success_radius: float = 0.15
    obs_seed: int = 7
    replay_capacity: int = 100_000


@dataclass
class RewardConfig:
    hidden: list[int] = field(default_factory=lambda: [256, 256, 256])
    learning_rate: float = 3e-4
    train_steps: int = 200
    batch_size: int = 128
    seed_steps_multiplier: int = 10
    ranking_probe_pairs: int = 64


@dataclass
class VlmConfig:
    encoder_seed: int = 777
    gap_strength: float = 1.0
    gap_bias_scale: float = 1.0
    noise_scale: float = 0.05
    learning_rate: float = 3e-4
    id_weight: float = 1.0
    finetune_steps: int = 100
    seed_finetune_steps: int = 300
    pref_minibatch: int = 32
    trans_minibatch: int = 128
    trans_pool_size: int = 1024
    adapter_jitter: float = 0.01


@dataclass
class AgentConfig:
    hidden: list[int] = field(default_factory=lambda: [256, 256, 256])
    learning_rate: float = 1e-4
    batch_size: int = 256
    update_every: int = 1
    discount: float = 0.99
    entropy_coef: float = 0.1
    tau: float = 0.005
    knn_k: int = 5
    knn_reference_size: int = 512


@dataclass
class FilterConfig:
    alpha: float = 0.5
    beta_min: float = 1.0
    beta_max: float = 3.0
    decay_rate: float = 1.0 / 300.0


@dataclass
class RunConfig:
    task: str = "reach"
    seed: int = 0
    mode: str = "prefvlm"
    teacher: str = "scripted"
    human_budget: int = 1000
    total_feedback_cap: int = 30000
    session_interval: int = 3000
    pairs_per_session: int = 256
    segment_length: int = 50
    warmup_random: int = 1000
    warmup_unsup: int = 5000
    initial_human: int = 250
    total_steps: int = 300_000
    eval_every: int = 5000
    eval_episodes: int = 20
    queue_timeout: float = 300.0
    vlm_init: str | None = None
    output_dir: str | None = None
    env: EnvConfig = field(default_factory=EnvConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    vlm: VlmConfig = field(default_factory=VlmConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)

    def teacher_flip_probability(self) -> float:
        if self.teacher.startswith("noisy:"):
            return float(self.teacher.split(":", 1)[1])
        return 0.0

    def uses_human_labels(self) -> bool:
        return self.mode in ("prefvlm", "pebble_human_only", "no_selection",
                             "no_inverse_dynamics")

    def uses_vlm(self) -> bool:
        return self.mode != "pebble_human_only"

    def runs_feedback_sessions(self) -> bool:
        return self.mode != "vlm_as_reward"


def _from_dict(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got "
                          f"{type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        if dataclasses.is_dataclass(f.type) or f.type in (
                EnvConfig, RewardConfig, VlmConfig, AgentConfig, FilterConfig):
            kwargs[name] = _from_dict(f.type, value, f"{path}{name}.")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


_NESTED = {"env": EnvConfig, "reward": RewardConfig, "vlm": VlmConfig,
           "agent": AgentConfig, "filter": FilterConfig}


def config_from_dict(data: dict) -> "RunConfig":
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name in _NESTED:
            kwargs[name] = _from_dict(_NESTED[name], value, f"{name}.")
        else:
            kwargs[name] = value
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def validate_config(cfg: RunConfig):
    if cfg.task not in ("reach", "push"):
        raise ConfigError(f"unknown task {cfg.task!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}; expected one of {MODES}")
    if cfg.teacher not in TEACHERS and not cfg.teacher.startswith("noisy:"):
        raise ConfigError(f"unknown teacher {cfg.teacher!r}")
    if cfg.teacher.startswith("noisy:"):
        try:
            eps = float(cfg.teacher.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad noisy teacher spec {cfg.teacher!r}") from exc
        if not 0.0 <= eps <= 1.0:
            raise ConfigError(f"flip probability {eps} outside [0, 1]")
    if cfg.session_interval <= 0:
        raise ConfigError("session_interval must be positive")
    if cfg.warmup_random + cfg.warmup_unsup >= cfg.total_steps:
        raise ConfigError("warmup phases must leave room for training steps")
    if cfg.mode in ("vlm_as_reward", "vlm_pref_only"):
        if cfg.human_budget > 0:
            raise ConfigError(
                f"mode {cfg.mode} uses no human labels; set human_budget to 0"
            )
    elif cfg.initial_human > cfg.human_budget:
        raise ConfigError("initial_human exceeds the human budget")
    if cfg.segment_length <= 0 or cfg.pairs_per_session <= 0:
        raise ConfigError("segment_length and pairs_per_session must be positive")
