"""Thread-safe annotation queue bridging the training loop and the HTTP API.

Each pending item resolves at most once; items unanswered within the timeout
return to the caller unlabeled. In headless mode a scripted teacher answers
synchronously, so the timeout path never triggers.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass

from prefloop.reward.types import PreferenceDatum


class DuplicateLabelError(RuntimeError):
    """A label was already submitted for this item id."""


class UnknownItemError(KeyError):
    """No pending item with this id."""


@dataclass
class PendingItem:
    item_id: int
    datum: PreferenceDatum
    enqueued_at: float


class AnnotationQueue:
    def __init__(self):
        self._lock = threading.Lock()
        self._resolved = threading.Condition(self._lock)
        self._ids = itertools.count(1)
        self._pending: dict[int, PendingItem] = {}
        self._completed: dict[int, str] = {}

    def enqueue(self, datum: PreferenceDatum) -> int:
        with self._lock:
            item_id = next(self._ids)
            self._pending[item_id] = PendingItem(item_id, datum, time.monotonic())
        return item_id

    def pending_items(self) -> list[PendingItem]:
        with self._lock:
            return sorted(self._pending.values(), key=lambda it: it.item_id)

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def submit(self, item_id: int, choice: str):
        """Resolve one item; first submission wins, duplicates are rejected."""
        if choice not in ("left", "right"):
            raise ValueError(f"choice must be 'left' or 'right', got {choice!r}")
        with self._resolved:
            if item_id in self._completed:
                raise DuplicateLabelError(f"item {item_id} already labeled")
            if item_id not in self._pending:
                raise UnknownItemError(item_id)
            del self._pending[item_id]
            self._completed[item_id] = choice
            self._resolved.notify_all()

    def take_result(self, item_id: int) -> str | None:
        with self._lock:
            return self._completed.get(item_id)

    def withdraw(self, item_id: int):
        with self._lock:
            self._pending.pop(item_id, None)

    def wait_for(self, item_ids: list[int], timeout: float) -> bool:
        """Block until every id resolves or the timeout elapses."""
        deadline = time.monotonic() + timeout
        with self._resolved:
            while any(i not in self._completed for i in item_ids):
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._resolved.wait(remaining)
        return True


def queue_roundtrip(queue: AnnotationQueue, selection: list[PreferenceDatum],
                    timeout: float, answer_fn=None, step: int = 0):
    """Push a human-selection batch through the queue.

    ``answer_fn(datum) -> (y0, y1)`` is the headless scripted teacher; when
    provided it answers synchronously. Returns (labeled, returned_unlabeled).
    """
    ids = [queue.enqueue(d) for d in selection]
    if answer_fn is not None:
        for item_id, datum in zip(ids, selection):
            label = answer_fn(datum)
            choice = "left" if label[0] >= label[1] else "right"
            queue.submit(item_id, choice)
    else:
        queue.wait_for(ids, timeout)
    labeled, returned = [], []
    for item_id, datum in zip(ids, selection):
        choice = queue.take_result(item_id)
        if choice is None:
            queue.withdraw(item_id)
            returned.append(datum)
            continue
        label = (1.0, 0.0) if choice == "left" else (0.0, 1.0)
        labeled.append(
            PreferenceDatum(pair=datum.pair, label=label, source="human",
                            created_at_step=step)
        )
    return labeled, returned
