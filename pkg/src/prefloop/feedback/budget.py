"""Human-annotation budget accounting and uncertain-subset selection."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class HumanBudget:
    total: int = 1000                    # hard cap on human labels
    consumed: int = 0
    per_round_fraction: float = 0.05
    total_feedback_cap: int = 30000      # machine + human labels together
    machine_consumed: int = 0

    @property
    def remaining(self) -> int:
        return self.total - self.consumed

    def grant_size(self, available: int, session_size: int) -> int:
        return min(available, int(self.per_round_fraction * session_size),
                   self.remaining)

    def feedback_remaining(self) -> int:
        return self.total_feedback_cap - self.machine_consumed - self.consumed


def select_human_subset(uncertain: list, budget: HumanBudget, session_size: int,
                        rng, already_labeled_ids: set | None = None):
    """Uniform subset of the uncertain pool, bounded by grant rules.

    Pairs that already carry a human label are excluded before sizing.
    Returns (selection, status); consumes budget for the grant.
    """
    if already_labeled_ids:
        pool = [d for d in uncertain if d.datum_id not in already_labeled_ids]
    else:
        pool = list(uncertain)
    if budget.remaining <= 0:
        return [], "budget_exhausted"
    size = budget.grant_size(len(pool), session_size)
    if size <= 0:
        return [], "nothing_selected"
    sel = rng.choice(len(pool), size=size, replace=False)
    budget.consumed += size
    return [pool[int(i)] for i in sorted(sel)], "ok"
