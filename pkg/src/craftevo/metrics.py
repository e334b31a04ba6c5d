"""Measurement machinery over trajectories and event logs.

All metrics run on the shared AttemptEvent record, so simulated agents, bots,
and human sessions are analyzed by the same code. Entropy is reported in nats
(natural log throughout).
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .events import KIND_ATTEMPT, KIND_SOCIAL_COPY, AttemptEvent, state_size
from .evolution import Trajectory
from .task import MAX_COMBO_SIZE, TaskTree

ENTROPY_LOG_BASE = "e"

FEATURE_COLUMNS = ("semantic_similarity", "structural_similarity", "color_similarity",
                   "position", "n_items", "reward", "uncertainty", "recency", "success",
                   "empowerment")


def _records_of(source) -> list:
    """A Trajectory, a list of GenerationRecords, or a path to a replicate JSONL."""
    if isinstance(source, Trajectory):
        return source.records
    if isinstance(source, (str, Path)):
        from .evolution import load_trajectory_records

        return load_trajectory_records(source)
    return list(source)


def repertoire_series(trajectory: Trajectory | Sequence | str | Path) -> tuple[list[int], list[int]]:
    """Per-generation (instantaneous, cumulative) repertoire counts."""
    records = _records_of(trajectory)
    return ([r.repertoire_instant for r in records], [r.repertoire_cumulative for r in records])


def strategy_proportions(trajectory: Trajectory | Sequence | str | Path) -> list[dict]:
    """Per-generation fraction of the population holding each strategy."""
    records = _records_of(trajectory)
    out = []
    for rec in records:
        total = sum(rec.strategy_counts.values())
        out.append({name: count / total for name, count in sorted(rec.strategy_counts.items())})
    return out


def entropy_by_state(events: Iterable[AttemptEvent]) -> dict[str, float]:
    """Shannon entropy (nats) of the empirical combination distribution in each state."""
    by_state: dict[str, Counter] = defaultdict(Counter)
    for ev in events:
        if ev.kind == KIND_ATTEMPT:
            by_state[ev.state_hash][ev.combination] += 1
    out = {}
    for state, counts in by_state.items():
        total = sum(counts.values())
        out[state] = -sum((c / total) * math.log(c / total) for c in counts.values())
    return out


def mean_state_entropy(events: Iterable[AttemptEvent], weighted: bool = True) -> float:
    """Summary entropy of a log: mean of per-state entropies, NaN without attempts.

    By default states are weighted by their attempt counts, which is the same
    thing as pooling: one-visit states contribute a degenerate distribution
    for every behavior and would otherwise drown the comparison.
    """
    events = [ev for ev in events if ev.kind == KIND_ATTEMPT]
    per_state = entropy_by_state(events)
    if not per_state:
        return float("nan")
    if not weighted:
        return sum(per_state.values()) / len(per_state)
    counts = Counter(ev.state_hash for ev in events)
    total = sum(counts.values())
    return sum(per_state[s] * counts[s] for s in per_state) / total


def unique_actions_by_state(events: Iterable[AttemptEvent]) -> list[dict]:
    """Cumulative distinct combinations per actor at each visited state.

    Counts are cumulative across the actor's states in time order (a later
    state includes the distinct actions of earlier ones) and are normalized by
    the state's inventory size, recovered from the state hash.
    """
    per_actor_events: dict[str, list[AttemptEvent]] = defaultdict(list)
    for ev in events:
        if ev.kind == KIND_ATTEMPT:
            per_actor_events[ev.actor_id].append(ev)
    rows = []
    for actor, evs in per_actor_events.items():
        evs.sort(key=lambda e: e.t)
        seen: set = set()
        state_order: list[str] = []
        count_at_state: dict[str, int] = {}
        for ev in evs:
            seen.add(ev.combination)
            if ev.state_hash not in count_at_state:
                state_order.append(ev.state_hash)
            count_at_state[ev.state_hash] = len(seen)
        for state in state_order:
            size = state_size(state)
            rows.append({"actor_id": actor, "state_hash": state, "inventory_size": size,
                         "unique_count": count_at_state[state],
                         "unique_normalized": count_at_state[state] / size})
    return rows


def consecutive_similarity(events: Iterable[AttemptEvent], sim: np.ndarray) -> list[dict]:
    """Mean cross-similarity between each attempt and the immediately following one.

    Rows are per actor and labeled by whether the earlier attempt succeeded;
    this is the carrier for the semantic-generalization analysis.
    """
    per_actor: dict[str, list[AttemptEvent]] = defaultdict(list)
    for ev in events:
        if ev.kind == KIND_ATTEMPT:
            per_actor[ev.actor_id].append(ev)
    rows = []
    for actor, evs in sorted(per_actor.items()):
        evs.sort(key=lambda e: e.t)
        for i in range(len(evs) - 1):
            earlier, later = evs[i], evs[i + 1]
            values = [sim[a, b] for a in earlier.combination for b in later.combination]
            rows.append({"actor_id": actor, "attempt_index": i + 1,
                         "prior_success": earlier.outcome is not None,
                         "mean_similarity": float(np.mean(values))})
    return rows


def uncertainty_value(total_attempts: int, times_selected: int) -> float:
    """Directed-exploration bonus sqrt(ln(T) / (t_e + 1))."""
    if total_attempts < 1:
        raise ValueError("total_attempts must be >= 1")
    return math.sqrt(math.log(total_attempts) / (times_selected + 1))


def spearman_rho(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation over the strictly-upper-triangle entries."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"similarity matrices must share a square shape, got {a.shape} and {b.shape}")
    iu = np.triu_indices(a.shape[0], k=1)
    rho, _p = stats.spearmanr(a[iu], b[iu])
    return float(rho)


# -- behavioral feature table ----------------------------------------------------


@dataclass
class FeatureRow:
    actor_id: str
    attempt_index: int
    is_actual: bool
    combination: tuple
    features: dict

    def as_csv_row(self) -> list:
        return ([self.actor_id, self.attempt_index, int(self.is_actual),
                 " ".join(map(str, self.combination))]
                + [self.features[c] for c in FEATURE_COLUMNS])


def _mean_pairwise(combo: Sequence[int], matrix: np.ndarray | None) -> float:
    if matrix is None:
        return 0.0
    pairs = [(combo[i], combo[j]) for i in range(len(combo)) for j in range(i + 1, len(combo))]
    return float(np.mean([matrix[a, b] for a, b in pairs]))


def _sample_alternative(inventory: Sequence[int], rng: np.random.Generator) -> tuple:
    """Uniform multiset of size 2..3 over the inventory (single-item actions excluded)."""
    n = len(inventory)
    class_sizes = np.array([math.comb(n + k - 1, k) for k in (2, 3)], dtype=float)
    k = 2 + int(rng.choice(2, p=class_sizes / class_sizes.sum()))
    picks = np.sort(rng.choice(n + k - 1, size=k, replace=False)) - np.arange(k)
    return tuple(int(inventory[i]) for i in picks)


def behavioral_feature_table(events: Iterable[AttemptEvent], tree: TaskTree,
                             semantic_sim: np.ndarray | None = None,
                             structural_sim: np.ndarray | None = None,
                             color_sim: np.ndarray | None = None,
                             k: int = 10,
                             rng: np.random.Generator | None = None) -> list[FeatureRow]:
    """Actual-vs-alternative feature rows for choice modeling.

    Every attempt with >= 2 items yields one actual row plus k alternative
    rows sampled without replacement from the same state's action space
    (single-item actions are excluded throughout, since pairwise similarity is
    undefined for them). Item-level features are averaged over the
    combination, then every feature is z-normalized within actor, pooling
    actual and alternative rows.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    recipes_with_item: Counter = Counter()
    for recipe in tree.recipes:
        for item in set(recipe.ingredients):
            recipes_with_item[item] += 1

    per_actor: dict[str, list[AttemptEvent]] = defaultdict(list)
    for ev in events:
        per_actor[ev.actor_id].append(ev)

    rows: list[FeatureRow] = []
    for actor, evs in sorted(per_actor.items()):
        evs.sort(key=lambda e: e.t)
        inventory = sorted(tree.basic_items)
        owned = set(inventory)
        attempt_no = 0
        times_selected: Counter = Counter()
        last_selected: dict[int, int] = {}
        success_count: Counter = Counter()
        discovered_recipes: set[tuple] = set()
        actor_rows: list[FeatureRow] = []

        for ev in evs:
            if ev.kind == KIND_ATTEMPT:
                attempt_no += 1
                if len(ev.combination) >= 2:
                    combos = [ev.combination]
                    tried = {ev.combination}
                    n = len(inventory)
                    available = math.comb(n + 1, 2) + math.comb(n + 2, 3) - 1
                    attempts_left = 60 * (k + 1)  # rejection budget; space >> k in practice
                    while len(combos) < min(k, available) + 1 and attempts_left > 0:
                        alt = _sample_alternative(inventory, rng)
                        attempts_left -= 1
                        if alt not in tried:
                            tried.add(alt)
                            combos.append(alt)
                    for idx, combo in enumerate(combos):
                        feats = _combo_features(
                            combo, attempt_no, inventory, tree, recipes_with_item,
                            times_selected, last_selected, success_count, discovered_recipes,
                            semantic_sim, structural_sim, color_sim)
                        actor_rows.append(FeatureRow(actor, attempt_no, idx == 0, combo, feats))
                for item in set(ev.combination):
                    times_selected[item] += 1
                    last_selected[item] = attempt_no
                if ev.outcome is not None:
                    for item in set(ev.combination):
                        success_count[item] += 1
                    discovered_recipes.add(ev.combination)
            if ev.kind == KIND_SOCIAL_COPY and ev.combination:
                discovered_recipes.add(ev.combination)
            if ev.outcome is not None and ev.outcome not in owned:
                owned.add(ev.outcome)
                inventory = sorted(owned)
        _z_normalize(actor_rows)
        rows.extend(actor_rows)
    return rows


def _combo_features(combo, attempt_no, inventory, tree, recipes_with_item,
                    times_selected, last_selected, success_count, discovered_recipes,
                    semantic_sim, structural_sim, color_sim) -> dict:
    pos_of = {item: i + 1 for i, item in enumerate(inventory)}
    items = list(combo)
    empowerment = []
    for item in items:
        already = sum(1 for rec in discovered_recipes if item in rec)
        empowerment.append(recipes_with_item.get(item, 0) - already)
    return {
        "semantic_similarity": _mean_pairwise(combo, semantic_sim),
        "structural_similarity": _mean_pairwise(combo, structural_sim),
        "color_similarity": _mean_pairwise(combo, color_sim),
        "position": float(np.mean([pos_of[i] for i in items])),
        "n_items": float(len(items)),
        "reward": float(np.mean([tree.score_of(i) for i in items])),
        "uncertainty": float(np.mean([uncertainty_value(attempt_no, times_selected[i]) for i in items])),
        "recency": float(np.mean([attempt_no - last_selected.get(i, 0) for i in items])),
        "success": float(np.mean([success_count[i] for i in items])),
        "empowerment": float(np.mean(empowerment)),
    }


def _z_normalize(rows: list[FeatureRow]) -> None:
    """Within-actor z-scores per feature; constant columns normalize to 0."""
    if not rows:
        return
    for col in FEATURE_COLUMNS:
        values = np.array([r.features[col] for r in rows])
        std = values.std()
        mean = values.mean()
        for r, v in zip(rows, values):
            r.features[col] = float((v - mean) / std) if std > 1e-12 else 0.0
