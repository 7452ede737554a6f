"""Preference data shared by the reward model, VLM trainer and filter."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count

from prefloop.envsim.replay import Segment

SOURCES = ("vlm", "human", "flipped")

_datum_counter = count()


@dataclass
class PreferenceDatum:
    pair: tuple[Segment, Segment]
    label: tuple[float, float]  # (y0, y1), components >= 0 summing to 1
    source: str
    created_at_step: int = 0
    datum_id: int = field(default_factory=lambda: next(_datum_counter))

    def __post_init__(self):
        y0, y1 = self.label
        if y0 < 0 or y1 < 0 or abs(y0 + y1 - 1.0) > 1e-9:
            raise ValueError(f"label {self.label} must be nonnegative and sum to 1")
        if self.source not in SOURCES:
            raise ValueError(f"source {self.source!r} not in {SOURCES}")

    def flipped(self) -> "PreferenceDatum":
        """Same pair with the label inverted and source marked as flipped."""
        y0, y1 = self.label
        return PreferenceDatum(
            pair=self.pair,
            label=(1.0 - y0, 1.0 - y1),
            source="flipped",
            created_at_step=self.created_at_step,
            datum_id=self.datum_id,
        )
