"""Run metrics: JSONL records plus a non-serialized wall-clock field.

Records are appended in training-step order and serialized with sorted keys,
so two identical runs produce byte-identical files. Wall-clock time is kept
out of the serialized records on purpose (it would break reproducibility);
it lives in the summary instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class RunMetrics:
    records: list[dict] = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    def add_eval(self, step: int, success_rate: float, true_return_mean: float,
                 ranking_accuracy: float | None):
        self.records.append({
            "kind": "eval",
            "step": step,
            "success_rate": success_rate,
            "true_return_mean": true_return_mean,
            "ranking_accuracy": ranking_accuracy,
        })

    def add_session(self, step: int, session: int, clean: int, flipped: int,
                    uncertain: int, human_granted: int, m_h: int,
                    machine_labels: int, vlm_label_accuracy: float | None,
                    reward_loss: float | None):
        self.records.append({
            "kind": "session",
            "step": step,
            "session": session,
            "clean": clean,
            "flipped": flipped,
            "uncertain": uncertain,
            "human_granted": human_granted,
            "m_h": m_h,
            "machine_labels": machine_labels,
            "vlm_label_accuracy": vlm_label_accuracy,
            "reward_loss": reward_loss,
        })

    def eval_records(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "eval"]

    def session_records(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "session"]

    def final_success_rate(self) -> float:
        evals = self.eval_records()
        return evals[-1]["success_rate"] if evals else float("nan")

    def best_success_rate(self) -> float:
        evals = self.eval_records()
        return max(r["success_rate"] for r in evals) if evals else float("nan")

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def save_jsonl(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl())
        return path

    @staticmethod
    def load_jsonl(path) -> "RunMetrics":
        lines = Path(path).read_text().splitlines()
        return RunMetrics(records=[json.loads(ln) for ln in lines if ln.strip()])
