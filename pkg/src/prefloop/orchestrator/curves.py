"""Per-timestep reward curves over stored traces, exported as CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from prefloop.envsim.traces import load_trace_jsonl
from prefloop.reward.ensemble import ensemble_reward_rows
from prefloop.vlm.adapters import reward_rows


def reward_curves(traces: list[list[dict]], encoders, adapters, language_token,
                  ensemble=None) -> dict[str, np.ndarray]:
    """Base / adapted / learned reward per timestep, averaged across traces.

    Traces longer than the shortest one are truncated so rows align.
    """
    if not traces:
        raise ValueError("no traces supplied")
    horizon = min(len(t) for t in traces)
    base = np.zeros(horizon)
    adapted = np.zeros(horizon)
    learned = np.zeros(horizon)
    progress = np.zeros(horizon)
    for rows in traces:
        obs = np.asarray([r["observation"] for r in rows[:horizon]])
        states = np.asarray([r["state"] for r in rows[:horizon]])
        actions = np.asarray([r["action"] for r in rows[:horizon]])
        base += reward_rows(encoders, None, language_token, obs)
        adapted += reward_rows(encoders, adapters, language_token, obs)
        if ensemble is not None:
            learned += ensemble_reward_rows(ensemble, states, actions)
        progress += np.asarray([r["true_progress"] for r in rows[:horizon]])
    n = len(traces)
    return {
        "t": np.arange(horizon),
        "base_reward": base / n,
        "adapted_reward": adapted / n,
        "learned_reward": learned / n if ensemble is not None else None,
        "true_progress": progress / n,
    }


def export_reward_curve(trace_paths: list, out_path, encoders, adapters,
                        language_token, ensemble=None) -> Path:
    """Read stored JSONL traces, write the averaged curve CSV."""
    traces = [load_trace_jsonl(p) for p in trace_paths]
    curves = reward_curves(traces, encoders, adapters, language_token,
                           ensemble=ensemble)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["t", "base_reward", "adapted_reward", "true_progress"]
    if curves["learned_reward"] is not None:
        columns.insert(3, "learned_reward")
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i in range(len(curves["t"])):
            writer.writerow([
                int(curves["t"][i]) if c == "t" else f"{curves[c][i]:.10g}"
                for c in columns
            ])
    return out_path
