"""Individual behavior: action selection, attempt execution, social learning, bots.

An agent picks each innovation attempt either at random, via its semantic
memory (partner prediction), or by generalizing a previously successful
combination; socially capable agents can instead copy one item from the
highest-scoring individual. Random bots are the knowledge-free baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import (KIND_ATTEMPT, KIND_SOCIAL_COPY, KIND_SOCIAL_NOOP, AttemptEvent, state_hash)
from .semantic import EmbeddingNet, pairs_from_combination, predict_partner
from .task import Combination, TaskTree, canonical_combination, sample_uniform_action


@dataclass(frozen=True)
class Strategy:
    """The four population types: each capacity can be present or absent."""

    has_semantic: bool
    has_social: bool

    @property
    def name(self) -> str:
        sem = "semantic" if self.has_semantic else "random"
        soc = "social" if self.has_social else "individual"
        return f"{sem}_{soc}"


STRATEGY_BY_NAME = {
    "semantic_social": Strategy(True, True),
    "semantic_individual": Strategy(True, False),
    "random_social": Strategy(False, True),
    "random_individual": Strategy(False, False),
}


@dataclass(frozen=True)
class BehaviorParams:
    p_sl: float = 0.5
    p_s: float = 0.9
    p_g: float = 0.1
    semantic_cost: int = 1

    def __post_init__(self):
        for name in ("p_sl", "p_s", "p_g"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.semantic_cost not in (1, 2, 3):
            raise ValueError(f"semantic_cost must be 1, 2 or 3, got {self.semantic_cost}")

    def for_strategy(self, strategy: Strategy) -> "BehaviorParams":
        """Zero out probabilities whose capacity the strategy lacks."""
        return BehaviorParams(
            p_sl=self.p_sl if strategy.has_social else 0.0,
            p_s=self.p_s if strategy.has_semantic else 0.0,
            p_g=self.p_g if strategy.has_semantic else 0.0,
            semantic_cost=self.semantic_cost,
        )


class AgentState:
    """Mutable per-individual state. One agent is one mutation domain."""

    __slots__ = ("id", "age", "score", "inventory", "attempt_memory", "success_memory",
                 "strategy", "params", "net", "pending_pairs", "_inv_sorted", "_state_hash")

    def __init__(self, agent_id: int, strategy: Strategy, params: BehaviorParams,
                 basic_items: Sequence[int], net: EmbeddingNet | None = None):
        if strategy.has_semantic and net is None:
            raise ValueError("semantic strategy requires a net")
        if not strategy.has_semantic and net is not None:
            raise ValueError("non-semantic strategy must not own a net")
        self.id = agent_id
        self.age = 0
        self.score = 0
        self.inventory: set[int] = set(basic_items)
        self.attempt_memory: set[Combination] = set()
        self.success_memory: list[tuple[Combination, int]] = []
        self.strategy = strategy
        self.params = params.for_strategy(strategy)
        self.net = net
        self.pending_pairs: list[tuple] = []
        self._inv_sorted: np.ndarray | None = None
        self._state_hash: str | None = None

    def inventory_sorted(self) -> np.ndarray:
        if self._inv_sorted is None:
            self._inv_sorted = np.fromiter(sorted(self.inventory), dtype=np.int64)
        return self._inv_sorted

    def inventory_hash(self) -> str:
        if self._state_hash is None:
            self._state_hash = state_hash(self.inventory)
        return self._state_hash

    def add_item(self, item_id: int) -> None:
        self.inventory.add(item_id)
        self._inv_sorted = None
        self._state_hash = None


def choose_individual_action(agent: AgentState, tree: TaskTree, rng: np.random.Generator,
                             predict_mode: str = "sample") -> tuple[Combination, bool]:
    """One individual-exploration choice; returns (combination, used_semantic).

    Draw order (fixed for reproducibility): combination size n ~ U{1,2,3},
    then the path coin against p_s, then inside the semantic path the
    generalization coin against p_g.
    """
    inv = agent.inventory_sorted()
    n = int(rng.integers(1, 4))
    if rng.random() >= agent.params.p_s:
        picks = inv[rng.integers(0, len(inv), size=n)]
        return canonical_combination(picks), False
    if rng.random() < agent.params.p_g and agent.success_memory:
        return generalize_action(agent, rng), True
    t1 = int(inv[rng.integers(0, len(inv))])
    chosen = [t1]
    if n >= 2:
        t2 = predict_partner(agent.net, t1, inv, mode=predict_mode, rng=rng)
        chosen.append(t2)
        if n == 3:
            chosen.append(predict_partner(agent.net, t2, inv, mode=predict_mode, rng=rng))
    return canonical_combination(chosen), True


def _nearest_owned(agent: AgentState, target: int, exclude: int | None) -> int:
    """Inventory item with maximal cosine similarity to target; ties to the lowest id."""
    candidates = agent.inventory_sorted()
    if exclude is not None:
        candidates = candidates[candidates != exclude]
    if len(candidates) == 0:
        return target
    emb = agent.net.E
    norms = np.linalg.norm(emb[candidates], axis=1) * np.linalg.norm(emb[target])
    sims = np.where(norms > 0, emb[candidates] @ emb[target] / np.where(norms == 0, 1.0, norms), 0.0)
    return int(candidates[int(np.argmax(sims))])  # argmax takes the first (lowest id) on ties


def generalize_action(agent: AgentState, rng: np.random.Generator) -> Combination:
    """Substitute one item of a known successful rule with its nearest embedding neighbor.

    Rules learned by observing others may contain items the agent has never
    held; those are likewise mapped to their nearest owned neighbors so the
    returned combination is always drawable from the inventory.
    """
    if not agent.success_memory or agent.net is None:
        raise ValueError("generalization requires semantic memory and at least one success")
    rule, _product = agent.success_memory[rng.integers(0, len(agent.success_memory))]
    pos = int(rng.integers(0, len(rule)))
    swapped = list(rule)
    for i, item in enumerate(rule):
        if i == pos:
            swapped[i] = _nearest_owned(agent, item, exclude=item)
        elif item not in agent.inventory:
            swapped[i] = _nearest_owned(agent, item, exclude=None)
    return canonical_combination(swapped)


def execute_attempt(agent: AgentState, tree: TaskTree, combination: Combination, t: float) -> AttemptEvent:
    """Resolve one attempt against the tree and update the agent.

    A fresh combination that matches a rule always scores, whether or not the
    product is already in the inventory: deriving an item yourself is the
    innovation the task rewards, and items copied from others only pay off
    once re-derived. Each combination can score at most once per lifetime
    (attempt memory gates re-scoring); a combination already in memory is
    logged as a repeated attempt with outcome None. The event's state_hash is
    the inventory in which the action was taken; score_after is post-outcome.
    """
    combo = canonical_combination(combination)
    for item_id in combo:
        if item_id not in agent.inventory:
            raise ValueError(f"agent {agent.id} attempted combination {combo} with unowned item {item_id}")
    pre_hash = agent.inventory_hash()
    if combo in agent.attempt_memory:
        return AttemptEvent(t=t, actor_id=str(agent.id), kind=KIND_ATTEMPT, combination=combo,
                            outcome=None, score_after=agent.score, state_hash=pre_hash)
    agent.attempt_memory.add(combo)
    product = tree.resolve(combo)
    if product is not None:
        agent.score += tree.score_of(product)
        if product not in agent.inventory:
            agent.add_item(product)
        if not any(rule == combo for rule, _ in agent.success_memory):
            agent.success_memory.append((combo, product))
            if agent.net is not None:
                agent.pending_pairs.extend(pairs_from_combination(combo))
    return AttemptEvent(t=t, actor_id=str(agent.id), kind=KIND_ATTEMPT, combination=combo,
                        outcome=product, score_after=agent.score, state_hash=pre_hash)


def best_demonstrator(agent: AgentState, population: Sequence[AgentState]) -> AgentState:
    """Highest-scoring individual other than the agent; score ties go to the lowest id."""
    others = [a for a in population if a.id != agent.id]
    if not others:
        raise ValueError("social learning requires a population of at least 2")
    return min(others, key=lambda a: (-a.score, a.id))


def social_learn(agent: AgentState, population: Sequence[AgentState], tree: TaskTree,
                 rng: np.random.Generator, t: float, train_on_observation: bool = True,
                 score_credit: bool = True) -> AttemptEvent:
    """Copy one unknown item (chosen uniformly) from the best individual.

    The copied item lands in the inventory and its recipe in success memory
    (fueling generalization and, with observation-training on, the semantic
    model), but not in attempt memory: re-deriving the combination oneself is
    still an open, scorable move. score_credit additionally awards the item's
    points at copy time; evolutionary runs leave it off so fitness stays tied
    to own innovation, while service bots keep the scoreboard comparable by
    crediting copies.
    """
    demonstrator = best_demonstrator(agent, population)
    novel = sorted(demonstrator.inventory - agent.inventory)
    pre_hash = agent.inventory_hash()
    if not novel:
        return AttemptEvent(t=t, actor_id=str(agent.id), kind=KIND_SOCIAL_NOOP, combination=(),
                            outcome=None, score_after=agent.score, state_hash=pre_hash)
    item = int(novel[rng.integers(0, len(novel))])
    agent.add_item(item)
    if score_credit:
        agent.score += tree.score_of(item)
    recipe = tree.recipe_for(item)
    combo: Combination = recipe.ingredients if recipe is not None else ()
    if recipe is not None:
        if not any(rule == recipe.ingredients for rule, _ in agent.success_memory):
            agent.success_memory.append((recipe.ingredients, item))
        if train_on_observation and agent.net is not None:
            agent.pending_pairs.extend(pairs_from_combination(recipe.ingredients))
    return AttemptEvent(t=t, actor_id=str(agent.id), kind=KIND_SOCIAL_COPY, combination=combo,
                        outcome=item, score_after=agent.score, state_hash=pre_hash)


# -- random bots ---------------------------------------------------------------


def bot_choose_action(bot: AgentState, rng: np.random.Generator) -> Combination:
    """Uniform draw over the bot's full action space (all multisets of size 1-3)."""
    return sample_uniform_action(bot.inventory_sorted(), rng)


def bot_act(bot: AgentState, population: Sequence[AgentState], tree: TaskTree,
            rng: np.random.Generator, t: float) -> AttemptEvent:
    """One bot action: success-biased copying first, random exploration otherwise."""
    if bot.strategy.has_social and len(population) > 1:
        demonstrator = best_demonstrator(bot, population)
        if demonstrator.inventory - bot.inventory:
            return social_learn(bot, population, tree, rng, t, train_on_observation=False)
    return execute_attempt(bot, tree, bot_choose_action(bot, rng), t)
