"""Three-member MLP reward ensemble with the pairwise logistic objective.

Member outputs pass through tanh, so per-step rewards live in (-1, 1).
Preference probabilities use the numerically stable logistic of the return
difference; the training loss is the label cross-entropy, averaged over
members and batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prefloop.numcore import (
    AdamState,
    Mlp,
    ShapeError,
    adam_init,
    mlp_forward,
    mlp_init,
)

ENSEMBLE_SIZE = 3
DEFAULT_HIDDEN = (256, 256, 256)


@dataclass
class RewardEnsemble:
    members: list[Mlp]
    optimizers: list[AdamState]
    state_dim: int
    action_dim: int

    @property
    def in_dim(self) -> int:
        return self.state_dim + self.action_dim


def make_ensemble(state_dim: int, action_dim: int = 2,
                  hidden: tuple[int, ...] = DEFAULT_HIDDEN,
                  learning_rate: float = 3e-4,
                  rng: np.random.Generator | None = None) -> RewardEnsemble:
    if rng is None:
        rng = np.random.default_rng(0)
    members = []
    for _ in range(ENSEMBLE_SIZE):
        members.append(
            mlp_init([state_dim + action_dim, *hidden, 1],
                     hidden_activation="leaky_relu", output_activation="tanh",
                     rng=rng)
        )
    from prefloop.numcore import param_arrays

    optimizers = [adam_init(param_arrays(m), learning_rate=learning_rate)
                  for m in members]
    return RewardEnsemble(members=members, optimizers=optimizers,
                          state_dim=state_dim, action_dim=action_dim)


def _sa_rows(ensemble: RewardEnsemble, states, actions) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    if states.shape[1] != ensemble.state_dim or actions.shape[1] != ensemble.action_dim:
        raise ShapeError(
            f"expected state dim {ensemble.state_dim} and action dim "
            f"{ensemble.action_dim}, got {states.shape[1]} and {actions.shape[1]}"
        )
    return np.concatenate([states, actions], axis=1)


def ensemble_reward_rows(ensemble: RewardEnsemble, states, actions) -> np.ndarray:
    """Mean member reward for each (state, action) row."""
    rows = _sa_rows(ensemble, states, actions)
    total = np.zeros(rows.shape[0])
    for m in ensemble.members:
        total += mlp_forward(m, rows)[:, 0]
    return total / len(ensemble.members)


def ensemble_reward(ensemble: RewardEnsemble, state, action) -> float:
    return float(ensemble_reward_rows(ensemble, state, action)[0])


def member_segment_return(member: Mlp, segment) -> float:
    return float(np.sum(mlp_forward(member, segment.state_action_rows())))


def segment_return_rows(ensemble: RewardEnsemble, segment) -> float:
    """Segment return under the ensemble-mean reward."""
    rows = segment.state_action_rows()
    return float(
        np.mean([np.sum(mlp_forward(m, rows)) for m in ensemble.members])
    )


def stable_logistic(z: float | np.ndarray):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def _oriented_logistic(z: float) -> float:
    # computed at |z| so that swapping arguments yields exactly 1 - p:
    # q >= 0.5 makes 1 - q exact in floating point
    q = 1.0 / (1.0 + np.exp(-abs(z)))
    return q if z >= 0 else 1.0 - q


def preference_probability(member: Mlp, segment_0, segment_1) -> float:
    """P[segment_1 preferred over segment_0] under one ensemble member."""
    if len(segment_0) != len(segment_1):
        raise ShapeError("segments must have equal length")
    r0 = member_segment_return(member, segment_0)
    r1 = member_segment_return(member, segment_1)
    return _oriented_logistic(r1 - r0)


def _log_logistic(z: np.ndarray) -> np.ndarray:
    # log(sigmoid(z)), stable for large |z|
    return np.where(z >= 0, -np.log1p(np.exp(-np.abs(z))),
                    z - np.log1p(np.exp(-np.abs(z))))


def _member_batch_returns(member: Mlp, batch) -> np.ndarray:
    rows = np.concatenate(
        [np.concatenate([d.pair[0].state_action_rows(),
                         d.pair[1].state_action_rows()]) for d in batch],
        axis=0,
    )
    T = len(batch[0].pair[0])
    out = mlp_forward(member, rows)[:, 0]
    return out.reshape(len(batch), 2, T).sum(axis=2)


def preference_loss(ensemble: RewardEnsemble, batch: list) -> float:
    """Mean label cross-entropy over members and batch."""
    if not batch:
        raise ValueError("empty preference batch")
    labels = np.array([d.label for d in batch])
    losses = []
    for m in ensemble.members:
        returns = _member_batch_returns(m, batch)
        z = returns[:, 1] - returns[:, 0]
        ce = -labels[:, 0] * _log_logistic(-z) - labels[:, 1] * _log_logistic(z)
        losses.append(np.mean(ce))
    return float(np.mean(losses))


def kl_to_label(label: tuple[float, float], labeled_side_probability: float) -> float:
    """KL from a one-hot label to the prediction: -ln p of the labeled side."""
    y0, y1 = label
    if not ((y0, y1) == (1.0, 0.0) or (y0, y1) == (0.0, 1.0)):
        raise ValueError(f"kl_to_label expects a hard label, got {label}")
    p = min(max(labeled_side_probability, 1e-12), 1.0 - 1e-12)
    return float(-np.log(p))


def labeled_side_probability(ensemble: RewardEnsemble, datum) -> float:
    """Probability the ensemble-mean returns assign to the labeled side."""
    r0 = segment_return_rows(ensemble, datum.pair[0])
    r1 = segment_return_rows(ensemble, datum.pair[1])
    p1 = _oriented_logistic(r1 - r0)
    return p1 if datum.label[1] >= datum.label[0] else 1.0 - p1


def datum_kl(ensemble: RewardEnsemble, datum) -> float:
    return kl_to_label(datum.label, labeled_side_probability(ensemble, datum))
