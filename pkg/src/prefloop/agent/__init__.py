"""SAC-lite learner: squashed Gaussian policy, twin critics, state-entropy bonus."""

from prefloop.agent.policy import GaussianPolicy, make_policy
from prefloop.agent.critic import TwinCritics, make_critics, soft_update
from prefloop.agent.sac import SacConfig, sac_update, critic_loss
from prefloop.agent.exploration import IntrinsicRewardEstimator

__all__ = [
    "GaussianPolicy",
    "make_policy",
    "TwinCritics",
    "make_critics",
    "soft_update",
    "SacConfig",
    "sac_update",
    "critic_loss",
    "IntrinsicRewardEstimator",
]
