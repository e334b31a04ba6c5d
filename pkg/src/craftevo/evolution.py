"""Generational loop: attempts, model updates, mortality, selection, inheritance.

Each generation every agent spends its attempt budget on social or individual
learning, semantic agents then train on the pairs they collected, each agent
survives or dies against an age-dependent hazard, and vacant slots are filled
by offspring of parents sampled proportionally to cumulative score. Offspring
inherit the parent's strategy and (noisily) its semantic memory, but restart
from the basic inventory unless item transmission is enabled.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import task as task_mod
from .agents import (AgentState, BehaviorParams, STRATEGY_BY_NAME, Strategy,
                     choose_individual_action, execute_attempt, social_learn)
from .events import AttemptEvent
from .semantic import init_net, pairs_from_combination, perturb_net, train
from .task import TaskTree

MORTALITY_A = 0.0001365
MORTALITY_B = 0.2097

STRATEGY_ORDER = ("semantic_social", "semantic_individual", "random_social", "random_individual")


@dataclass
class SimConfig:
    """Full parameterization of a run; mirrors the JSON config file field-for-field."""

    population_size: int = 100
    generations: int = 150
    n_attempt: int = 10
    p_sl: float = 0.5
    p_s: float = 0.9
    p_g: float = 0.1
    semantic_cost: int = 1
    strategy_mix: dict = field(default_factory=lambda: {"semantic_social": 1.0})
    mortality_a: float = MORTALITY_A
    mortality_b: float = MORTALITY_B
    mortality_sign: str = "increasing"
    inheritance: str = "knowledge_only"
    item_loss_prob: float = 0.0
    transmission_noise_sd: float = 0.0
    train_on_observation: bool = True
    copy_score_credit: bool = False
    embed_dim: int = 16
    hidden_dim: int = 16
    learning_rate: float = 0.1
    epochs_per_generation: int = 1
    rehearsal_pairs: int = 128
    predict_mode: str = "sample"
    score_base: float = 2.0
    task_source: str = "default"
    master_seed: int = 20260810
    replicates: int = 1

    def validate(self) -> list[str]:
        """All problems at once, as human-readable field-naming messages."""
        errors = []
        if self.population_size < 1:
            errors.append(f"population_size must be >= 1, got {self.population_size}")
        if self.generations < 0:
            errors.append(f"generations must be >= 0, got {self.generations}")
        if self.n_attempt < 1:
            errors.append(f"n_attempt must be >= 1, got {self.n_attempt}")
        for name in ("p_sl", "p_s", "p_g", "item_loss_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                errors.append(f"{name} must be in [0, 1], got {v}")
        if self.semantic_cost not in (1, 2, 3):
            errors.append(f"semantic_cost must be 1, 2 or 3, got {self.semantic_cost}")
        if not self.strategy_mix:
            errors.append("strategy_mix must name at least one strategy")
        for key, frac in self.strategy_mix.items():
            if key not in STRATEGY_BY_NAME:
                errors.append(f"strategy_mix names unknown strategy {key!r} "
                              f"(expected one of {sorted(STRATEGY_BY_NAME)})")
            elif not 0.0 <= frac <= 1.0:
                errors.append(f"strategy_mix[{key!r}] must be in [0, 1], got {frac}")
        if self.strategy_mix and abs(sum(self.strategy_mix.values()) - 1.0) > 1e-9:
            errors.append(f"strategy_mix fractions must sum to 1, got {sum(self.strategy_mix.values())}")
        social_present = any(STRATEGY_BY_NAME[k].has_social
                             for k, v in self.strategy_mix.items()
                             if k in STRATEGY_BY_NAME and v > 0)
        if social_present and self.p_sl > 0 and self.population_size < 2:
            errors.append("population_size must be >= 2 when social learning can occur")
        if self.mortality_a < 0:
            errors.append(f"mortality_a must be >= 0, got {self.mortality_a}")
        if self.mortality_sign not in ("increasing", "verbatim"):
            errors.append(f"mortality_sign must be 'increasing' or 'verbatim', got {self.mortality_sign!r}")
        if self.inheritance not in ("knowledge_only", "knowledge_plus_items"):
            errors.append(f"inheritance must be 'knowledge_only' or 'knowledge_plus_items', got {self.inheritance!r}")
        if self.transmission_noise_sd < 0:
            errors.append(f"transmission_noise_sd must be >= 0, got {self.transmission_noise_sd}")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            errors.append(f"net dimensions must be >= 1, got embed_dim={self.embed_dim} hidden_dim={self.hidden_dim}")
        if self.learning_rate < 0:
            errors.append(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs_per_generation < 0:
            errors.append(f"epochs_per_generation must be >= 0, got {self.epochs_per_generation}")
        if self.rehearsal_pairs < 0:
            errors.append(f"rehearsal_pairs must be >= 0, got {self.rehearsal_pairs}")
        if self.predict_mode not in ("sample", "argmax"):
            errors.append(f"predict_mode must be 'sample' or 'argmax', got {self.predict_mode!r}")
        if self.score_base <= 1.0:
            errors.append(f"score_base must be > 1, got {self.score_base}")
        if self.master_seed < 0:
            errors.append(f"master_seed must be >= 0, got {self.master_seed}")
        if self.replicates < 1:
            errors.append(f"replicates must be >= 1, got {self.replicates}")
        return errors

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**doc)
        errors = cfg.validate()
        if errors:
            raise ValueError("invalid config: " + "; ".join(errors))
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls.from_dict(json.loads(text))

    def behavior_params(self) -> BehaviorParams:
        return BehaviorParams(p_sl=self.p_sl, p_s=self.p_s, p_g=self.p_g, semantic_cost=self.semantic_cost)

    def load_tree(self) -> TaskTree:
        if self.task_source == "default":
            return task_mod.default_task_tree(self.score_base)
        return task_mod.load_task_tree(self.task_source, self.score_base)


@dataclass
class GenerationRecord:
    generation: int
    agents: list
    repertoire_instant: int
    repertoire_cumulative: int
    strategy_counts: dict
    events: list
    extinction: bool = False

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "agents": self.agents,
            "repertoire_instant": self.repertoire_instant,
            "repertoire_cumulative": self.repertoire_cumulative,
            "strategy_counts": self.strategy_counts,
            "extinction": self.extinction,
            "events": [json.loads(ev.to_json()) for ev in self.events],
        }


@dataclass
class Trajectory:
    config: dict
    records: list
    final_similarity: np.ndarray | None = None

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"config": self.config}, sort_keys=True, separators=(",", ":")) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


def load_trajectory_records(path) -> list[GenerationRecord]:
    """Read GenerationRecords (events included) back from a replicate JSONL file."""
    records = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            if "generation" not in doc:
                continue  # leading config line
            records.append(GenerationRecord(
                generation=doc["generation"],
                agents=doc["agents"],
                repertoire_instant=doc["repertoire_instant"],
                repertoire_cumulative=doc["repertoire_cumulative"],
                strategy_counts=doc["strategy_counts"],
                events=[AttemptEvent.from_dict(e) for e in doc["events"]],
                extinction=doc.get("extinction", False),
            ))
    return records


def death_probability(age: int, a: float = MORTALITY_A, b: float = MORTALITY_B,
                      sign: str = "increasing") -> float:
    """Age-dependent hazard. increasing: min(1, a*e^(b*age)); verbatim: a*e^(-b*age)."""
    if age < 0:
        raise ValueError(f"age must be >= 0, got {age}")
    if sign == "increasing":
        return min(1.0, a * math.exp(b * age))
    if sign == "verbatim":
        return min(1.0, a * math.exp(-b * age))
    raise ValueError(f"unknown mortality sign {sign!r}")


def apply_mortality(population: Sequence[AgentState], cfg: SimConfig,
                    rng: np.random.Generator) -> list[AgentState]:
    """Independent death draw per agent, in id order."""
    return [a for a in population
            if rng.random() >= death_probability(a.age, cfg.mortality_a, cfg.mortality_b, cfg.mortality_sign)]


def _strategy_counts(mix: dict, n: int) -> dict[str, int]:
    """Largest-remainder allocation of n agents over the mix fractions."""
    names = [s for s in STRATEGY_ORDER if mix.get(s, 0.0) > 0.0]
    exact = {s: mix[s] * n for s in names}
    counts = {s: int(exact[s]) for s in names}
    short = n - sum(counts.values())
    for s in sorted(names, key=lambda s: (counts[s] - exact[s], s))[:short]:
        counts[s] += 1
    return counts


def _fresh_agent(agent_id: int, strategy: Strategy, cfg: SimConfig, tree: TaskTree,
                 rng: np.random.Generator) -> AgentState:
    net = None
    if strategy.has_semantic:
        net = init_net(tree.n_items, cfg.embed_dim, cfg.hidden_dim,
                       seed=int(rng.integers(0, 2**32)), learning_rate=cfg.learning_rate)
    return AgentState(agent_id, strategy, cfg.behavior_params(), tree.basic_items, net)


def init_population(cfg: SimConfig, tree: TaskTree, rng: np.random.Generator) -> list[AgentState]:
    counts = _strategy_counts(cfg.strategy_mix, cfg.population_size)
    population = []
    next_id = 0
    for name in STRATEGY_ORDER:
        for _ in range(counts.get(name, 0)):
            population.append(_fresh_agent(next_id, STRATEGY_BY_NAME[name], cfg, tree, rng))
            next_id += 1
    return population


def _spawn_offspring(parent: AgentState, agent_id: int, cfg: SimConfig, tree: TaskTree,
                     rng: np.random.Generator) -> AgentState:
    net = None
    if parent.strategy.has_semantic:
        net = perturb_net(parent.net, cfg.transmission_noise_sd, rng)
    child = AgentState(agent_id, parent.strategy, parent.params, tree.basic_items, net)
    if cfg.inheritance == "knowledge_plus_items":
        for item in sorted(parent.inventory - set(tree.basic_items)):
            if rng.random() >= cfg.item_loss_prob:
                child.add_item(item)  # inherited items carry no score credit
    return child


def select_and_reproduce(survivors: list[AgentState], cfg: SimConfig, rng: np.random.Generator,
                         tree: TaskTree, next_id: int) -> tuple[list[AgentState], int, bool]:
    """Survivors persist (age + 1); vacancies are filled by fitness-proportional offspring.

    Parent sampling weight is score + 1 so an all-zero-score population still
    reproduces uniformly. An empty survivor set is an extinction: the
    population restarts from the initial strategy mix.
    """
    if not survivors:
        rebooted = []
        for name, count in _strategy_counts(cfg.strategy_mix, cfg.population_size).items():
            for _ in range(count):
                rebooted.append(_fresh_agent(next_id, STRATEGY_BY_NAME[name], cfg, tree, rng))
                next_id += 1
        return rebooted, next_id, True
    for agent in survivors:
        agent.age += 1
    vacancies = cfg.population_size - len(survivors)
    if vacancies > 0:
        weights = np.array([a.score + 1.0 for a in survivors])
        cum = np.cumsum(weights)
        offspring = []
        for _ in range(vacancies):
            parent = survivors[int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))]
            offspring.append(_spawn_offspring(parent, next_id, cfg, tree, rng))
            next_id += 1
        survivors = survivors + offspring
    return survivors, next_id, False


def run_generation(population: list[AgentState], tree: TaskTree, cfg: SimConfig,
                   rng: np.random.Generator, generation: int = 0, t0: int = 0,
                   next_id: int | None = None, discovered: set | None = None,
                   ) -> tuple[list[AgentState], GenerationRecord, int, int]:
    """One full generation; returns (population, record, next event t, next agent id).

    Draw order is fixed: agents act in id order; per attempt slot one
    social-vs-individual coin, then the action draws; then model updates
    (one rule-permutation draw per semantic agent with any successes), one
    mortality draw per agent in id order, and one parent draw (plus
    inheritance draws) per vacancy.
    """
    if next_id is None:
        next_id = max(a.id for a in population) + 1
    if discovered is None:
        discovered = set()
        for a in population:
            discovered |= a.inventory
    events: list[AttemptEvent] = []
    t = t0
    for agent in population:
        slots = 0
        while slots < cfg.n_attempt:
            if rng.random() < agent.params.p_sl:
                ev = social_learn(agent, population, tree, rng, t, cfg.train_on_observation,
                                  score_credit=cfg.copy_score_credit)
                slots += 1
            else:
                combo, used_semantic = choose_individual_action(agent, tree, rng, cfg.predict_mode)
                ev = execute_attempt(agent, tree, combo, t)
                slots += agent.params.semantic_cost if used_semantic else 1
            events.append(ev)
            t += 1
    for agent in population:
        if agent.net is not None and cfg.epochs_per_generation > 0:
            pairs = list(agent.pending_pairs)
            pairs.extend(_rehearsal_pairs(agent, cfg.rehearsal_pairs, rng))
            if pairs:
                train(agent.net, pairs, epochs=cfg.epochs_per_generation,
                      learning_rate=cfg.learning_rate)
        agent.pending_pairs.clear()
    for ev in events:
        if ev.outcome is not None:
            discovered.add(ev.outcome)
    survivors = apply_mortality(population, cfg, rng)
    population, next_id, extinct = select_and_reproduce(survivors, cfg, rng, tree, next_id)
    record = _snapshot(generation, population, discovered, events, extinct)
    return population, record, t, next_id


def _rehearsal_pairs(agent: AgentState, budget: int, rng: np.random.Generator) -> list:
    """Replay pairs from a random sample of known rules, up to the pair budget.

    Rehearsal is what consolidates a rule over an agent's lifetime: a single
    pass per novel rule is far too weak a signal for the partner predictions
    to sharpen within a lifespan.
    """
    if budget <= 0 or not agent.success_memory:
        return []
    pairs: list = []
    order = rng.permutation(len(agent.success_memory))
    for ri in order:
        rule_pairs = pairs_from_combination(agent.success_memory[int(ri)][0])
        if len(pairs) + len(rule_pairs) > budget:
            break
        pairs.extend(rule_pairs)
    return pairs


def _snapshot(generation: int, population: Sequence[AgentState], discovered: set,
              events: list, extinct: bool = False) -> GenerationRecord:
    instant: set[int] = set()
    counts: dict[str, int] = {}
    agents = []
    for a in population:
        instant |= a.inventory
        counts[a.strategy.name] = counts.get(a.strategy.name, 0) + 1
        agents.append({"id": a.id, "score": a.score, "inventory_size": len(a.inventory),
                       "strategy": a.strategy.name, "age": a.age})
    return GenerationRecord(
        generation=generation,
        agents=agents,
        repertoire_instant=len(instant),
        repertoire_cumulative=len(discovered | instant),
        strategy_counts=counts,
        events=events,
        extinction=extinct,
    )


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(replicate,)))


def run_simulation(cfg: SimConfig, replicate: int = 0, tree: TaskTree | None = None) -> Trajectory:
    """One replicate, bit-identical across re-runs with the same config and index."""
    errors = cfg.validate()
    if errors:
        raise ValueError("invalid config: " + "; ".join(errors))
    if tree is None:
        tree = cfg.load_tree()
    rng = replicate_rng(cfg.master_seed, replicate)
    population = init_population(cfg, tree, rng)
    discovered: set[int] = set(tree.basic_items)
    records = [_snapshot(0, population, discovered, events=[])]
    t, next_id = 0, cfg.population_size
    for g in range(1, cfg.generations + 1):
        population, record, t, next_id = run_generation(
            population, tree, cfg, rng, generation=g, t0=t, next_id=next_id, discovered=discovered)
        records.append(record)
    return Trajectory(config={**cfg.to_dict(), "replicate": replicate}, records=records)
