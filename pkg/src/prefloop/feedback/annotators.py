"""Machine and scripted teachers over segment pairs.

Label convention: (1, 0) means the first segment is preferred. The VLM
annotator compares adapted segment returns and breaks exact ties toward the
second segment; the scripted teacher compares hidden ground-truth returns,
and its noisy variant flips each label independently with probability eps.
"""

from __future__ import annotations

import numpy as np

from prefloop.envsim.replay import Segment, ground_truth_return
from prefloop.reward.types import PreferenceDatum
from prefloop.vlm.adapters import segment_return


def vlm_annotate(encoders, adapters, task, pair: tuple[Segment, Segment],
                 step: int = 0, use_adapters: bool = True) -> PreferenceDatum:
    """Preference from surrogate-VLM segment returns."""
    adp = adapters if use_adapters else None
    r0 = segment_return(encoders, adp, task.language_token, pair[0].observations)
    r1 = segment_return(encoders, adp, task.language_token, pair[1].observations)
    label = (1.0, 0.0) if r0 > r1 else (0.0, 1.0)
    return PreferenceDatum(pair=pair, label=label, source="vlm",
                           created_at_step=step)


def scripted_label_for_pair(task, pair: tuple[Segment, Segment]) -> tuple[float, float]:
    """The noiseless teacher's verdict, used both for labels and as the oracle."""
    g0 = ground_truth_return(pair[0], task)
    g1 = ground_truth_return(pair[1], task)
    return (1.0, 0.0) if g0 > g1 else (0.0, 1.0)


def scripted_annotate(task, pair: tuple[Segment, Segment],
                      flip_probability: float = 0.0,
                      rng: np.random.Generator | None = None,
                      step: int = 0) -> PreferenceDatum:
    """Ground-truth teacher; flips the label with ``flip_probability``."""
    label = scripted_label_for_pair(task, pair)
    if flip_probability > 0.0:
        if rng is None:
            raise ValueError("noisy scripted teacher needs an rng")
        if rng.random() < flip_probability:
            label = (1.0 - label[0], 1.0 - label[1])
    return PreferenceDatum(pair=pair, label=label, source="human",
                           created_at_step=step)
