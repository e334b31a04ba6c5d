"""The shared attempt/social-event log record and its JSON-lines dialect.

Simulated agents, random bots, and live human sessions all emit the same
record, so every metric runs unchanged on any log source.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

KIND_ATTEMPT = "attempt"
KIND_SOCIAL_COPY = "social_copy"
KIND_SOCIAL_NOOP = "social_noop"
KIND_INSPECT = "inspect"
KIND_INSPECT_ITEM = "inspect_item"

EVENT_KINDS = (KIND_ATTEMPT, KIND_SOCIAL_COPY, KIND_SOCIAL_NOOP, KIND_INSPECT, KIND_INSPECT_ITEM)


@dataclass(slots=True)
class AttemptEvent:
    """One innovation attempt or social-learning event.

    kind=attempt: combination holds the tried multiset, outcome the product id
    (None on failure or a repeated attempt). kind=social_copy: combination
    holds the copied item's recipe, outcome the copied item. Inspect events
    carry the inspected target in combination (and item for inspect_item).
    """

    t: float
    actor_id: str
    kind: str
    combination: tuple
    outcome: int | None
    score_after: int
    state_hash: str

    def to_json(self) -> str:
        return json.dumps({
            "t": self.t,
            "actor_id": self.actor_id,
            "kind": self.kind,
            "combination": list(self.combination),
            "outcome": self.outcome,
            "score_after": self.score_after,
            "state_hash": self.state_hash,
        }, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "AttemptEvent":
        return cls(
            t=doc["t"],
            actor_id=str(doc["actor_id"]),
            kind=doc["kind"],
            combination=tuple(doc["combination"]),
            outcome=doc["outcome"],
            score_after=doc["score_after"],
            state_hash=doc["state_hash"],
        )


def state_hash(owned: Iterable[int]) -> str:
    """Digest of an inventory state, prefixed with its size (size is recoverable)."""
    ids = sorted(owned)
    digest = hashlib.sha1(",".join(map(str, ids)).encode()).hexdigest()[:10]
    return f"{len(ids):03d}-{digest}"


def state_size(hashed: str) -> int:
    """Inventory size encoded in a state hash."""
    return int(hashed.split("-", 1)[0])


def write_events_jsonl(events: Iterable[AttemptEvent], path: str | Path) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(ev.to_json() + "\n")


def read_events_jsonl(path: str | Path) -> Iterator[AttemptEvent]:
    """Parse an event log; malformed lines raise ValueError naming the line number."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield AttemptEvent.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed event line: {exc}") from None
