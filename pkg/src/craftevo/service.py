"""Live play service: the innovation task as HTTP sessions for humans and bots.

Conditions differ only in display labels (real item names vs opaque 3-letter
codes); the underlying rules are identical. Group sessions seat one human with
bot co-players that act on a fixed cadence, copy success-biased, and explore
uniformly otherwise. Every state change flows through the event log, so a
session can always be replayed and audited from its log alone.

Time: a session's clock starts at the first player action and runs
SESSION_SECONDS. Live deployments use wall time; tests and scripted clients
create sessions with manual_time and pass `now` (seconds since start)
explicitly on each call.
"""

from __future__ import annotations

import itertools
import json
import string
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .agents import AgentState, BehaviorParams, Strategy, bot_act
from .events import (KIND_ATTEMPT, KIND_INSPECT, KIND_INSPECT_ITEM, AttemptEvent, state_hash)
from .task import Combination, TaskTree, canonical_combination, default_task_tree

SESSION_SECONDS = 600.0
BOT_CADENCE_SECONDS = 8.0
GROUP_SIZE = 6
DEFAULT_BONUS_RATE = 0.001

CONDITIONS = ("semantic", "non_semantic")
MODES = ("individual", "group")


def opaque_labels(n_items: int, label_seed: int = 0) -> list[str]:
    """Condition-stable 3-letter codes with no lexical relation to item names."""
    rng = np.random.default_rng(label_seed)
    alphabet = string.ascii_uppercase
    codes = ["".join(combo) for combo in itertools.product(alphabet, repeat=3)]
    picks = rng.choice(len(codes), size=n_items, replace=False)
    return [codes[int(i)] for i in picks]


@dataclass
class Player:
    id: str
    is_bot: bool
    state: AgentState
    crafted: set = field(default_factory=set)


class SessionError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class Session:
    """One live session. All mutating calls are serialized through one lock."""

    def __init__(self, condition: str, mode: str, seed: int, tree: TaskTree | None = None,
                 bonus_rate: float = DEFAULT_BONUS_RATE, label_seed: int = 0,
                 manual_time: bool = False, duration: float = SESSION_SECONDS,
                 humans: int = 1):
        if condition not in CONDITIONS:
            raise SessionError(422, f"unknown condition {condition!r}")
        if mode not in MODES:
            raise SessionError(422, f"unknown mode {mode!r}")
        if mode == "group" and not 1 <= humans <= GROUP_SIZE:
            raise SessionError(422, f"group sessions seat 1-{GROUP_SIZE} humans, got {humans}")
        if mode == "individual" and humans != 1:
            raise SessionError(422, "individual sessions seat exactly one human")
        self.id = str(uuid.uuid4())
        self.condition = condition
        self.mode = mode
        self.seed = seed
        self.tree = tree if tree is not None else default_task_tree()
        self.bonus_rate = bonus_rate
        self.duration = duration
        self.manual_time = manual_time
        self.lock = threading.Lock()
        self.events: list[AttemptEvent] = []
        self.started_at: float | None = None  # wall clock; None until first action
        self.clock: float = 0.0  # seconds since start, monotone
        self.rng = np.random.default_rng(seed)
        self.labels = ([it.name for it in self.tree.items] if condition == "semantic"
                       else opaque_labels(self.tree.n_items, label_seed))
        self.players: dict[str, Player] = {}
        params = BehaviorParams(p_sl=0.0, p_s=0.0, p_g=0.0)
        for h in range(humans):
            pid = f"player_{h}"
            self.players[pid] = Player(pid, False, AgentState(
                h, Strategy(False, False), params, self.tree.basic_items))
        if mode == "group":
            bot_params = BehaviorParams(p_sl=1.0, p_s=0.0, p_g=0.0)
            for b in range(GROUP_SIZE - humans):
                pid = f"bot_{b}"
                self.players[pid] = Player(pid, True, AgentState(
                    humans + b, Strategy(False, True), bot_params, self.tree.basic_items))
        self.bot_steps_done = 0

    # -- time ------------------------------------------------------------

    def _advance_clock(self, now: float | None) -> None:
        """Move the session clock forward; `now` is seconds since clock start.

        Manual-time sessions only move when a call supplies `now` (omitting it
        keeps the current clock); real-time sessions follow the wall clock.
        """
        if self.started_at is None:
            return
        if self.manual_time:
            if now is None:
                return
            if now < self.clock:
                raise SessionError(422, f"time went backwards: {now} < {self.clock}")
            self.clock = float(now)
        else:
            self.clock = time.monotonic() - self.started_at

    def _start_clock_if_needed(self, now: float | None) -> None:
        if self.started_at is None:
            self.started_at = 0.0 if self.manual_time else time.monotonic()
            self.clock = 0.0
        self._advance_clock(now)

    @property
    def remaining(self) -> float:
        if self.started_at is None:
            return self.duration
        return max(0.0, self.duration - self.clock)

    @property
    def expired(self) -> bool:
        return self.started_at is not None and self.clock >= self.duration

    # -- bots ------------------------------------------------------------

    def advance_bots(self, now: float | None = None) -> list[AttemptEvent]:
        """Run every bot's actions up to the cadence tick at the current clock."""
        self._advance_clock(now)
        if self.started_at is None or self.mode != "group":
            return []
        horizon = min(self.clock, self.duration)
        due = int(horizon // BOT_CADENCE_SECONDS)
        new_events = []
        bots = [p for p in sorted(self.players.values(), key=lambda p: p.id) if p.is_bot]
        population = [p.state for p in sorted(self.players.values(), key=lambda p: p.state.id)]
        while self.bot_steps_done < due:
            self.bot_steps_done += 1
            t = self.bot_steps_done * BOT_CADENCE_SECONDS
            for bot in bots:
                ev = bot_act(bot.state, population, self.tree, self.rng, t)
                ev = AttemptEvent(t=ev.t, actor_id=bot.id, kind=ev.kind, combination=ev.combination,
                                  outcome=ev.outcome, score_after=ev.score_after,
                                  state_hash=ev.state_hash)
                if ev.kind == KIND_ATTEMPT and ev.outcome is not None:
                    bot.crafted.add(ev.outcome)
                new_events.append(ev)
        self.events.extend(new_events)
        return new_events

    # -- player operations -------------------------------------------------

    def _player(self, player_id: str) -> Player:
        if player_id not in self.players:
            raise SessionError(404, f"unknown player {player_id!r}")
        return self.players[player_id]

    def submit_attempt(self, player_id: str, items: Iterable[int], now: float | None = None) -> dict:
        player = self._player(player_id)
        self._start_clock_if_needed(now)
        self.advance_bots()
        if self.expired:
            raise SessionError(409, "session expired")
        try:
            combo: Combination = canonical_combination(items)
        except ValueError as exc:
            raise SessionError(422, str(exc)) from None
        state = player.state
        for item in combo:
            if not 0 <= item < self.tree.n_items:
                raise SessionError(422, f"unknown item id {item}")
            if item not in state.inventory:
                raise SessionError(409, f"item {item} is not in the inventory")
        pre_hash = state.inventory_hash()
        product = self.tree.resolve(combo)
        first_craft = product is not None and product not in player.crafted
        if product is not None:
            if first_craft:
                player.crafted.add(product)
                state.score += self.tree.score_of(product)
            if product not in state.inventory:
                state.add_item(product)
        state.attempt_memory.add(combo)
        event = AttemptEvent(t=self.clock, actor_id=player_id, kind=KIND_ATTEMPT,
                             combination=combo, outcome=product, score_after=state.score,
                             state_hash=pre_hash)
        self.events.append(event)
        return {
            "outcome": None if product is None else self._item_view(product),
            "first_craft": first_craft,
            "event_index": len(self.events) - 1,
            "view": self.player_view(player_id),
        }

    def inspect_player(self, player_id: str, target_id: str, now: float | None = None) -> dict:
        player = self._player(player_id)
        self._start_clock_if_needed(now)
        self.advance_bots()
        if self.mode != "group":
            raise SessionError(409, "inspection is only available in group sessions")
        if target_id == player_id:
            raise SessionError(422, "cannot inspect yourself")
        target = self._player(target_id)
        discovered = sorted(target.state.inventory - set(self.tree.basic_items))
        event = AttemptEvent(t=self.clock, actor_id=player_id, kind=KIND_INSPECT,
                             combination=(target.state.id,), outcome=None,
                             score_after=player.state.score,
                             state_hash=player.state.inventory_hash())
        self.events.append(event)
        return {"target": target_id, "items": [self._item_view(i) for i in discovered],
                "target_score": target.state.score}

    def inspect_item_recipe(self, player_id: str, target_id: str, item: int,
                            now: float | None = None) -> dict:
        player = self._player(player_id)
        self._start_clock_if_needed(now)
        self.advance_bots()
        if self.mode != "group":
            raise SessionError(409, "inspection is only available in group sessions")
        target = self._player(target_id)
        if item not in target.state.inventory:
            raise SessionError(409, f"player {target_id!r} does not own item {item}")
        recipe = self.tree.recipe_for(item)
        ingredients = list(recipe.ingredients) if recipe is not None else []
        event = AttemptEvent(t=self.clock, actor_id=player_id, kind=KIND_INSPECT_ITEM,
                             combination=(target.state.id, item), outcome=None,
                             score_after=player.state.score,
                             state_hash=player.state.inventory_hash())
        self.events.append(event)
        return {"target": target_id, "item": self._item_view(item),
                "ingredients": [self._item_view(i) for i in ingredients]}

    # -- views -------------------------------------------------------------

    def _item_view(self, item_id: int) -> dict:
        return {"id": item_id, "label": self.labels[item_id],
                "score": self.tree.score_of(item_id)}

    def player_view(self, player_id: str, now: float | None = None) -> dict:
        player = self._player(player_id)
        self._advance_clock(now)
        self.advance_bots()
        scoreboard = sorted(
            ({"player": p.id, "score": p.state.score, "is_bot": p.is_bot}
             for p in self.players.values()),
            key=lambda row: (-row["score"], row["player"]))
        return {
            "session_id": self.id,
            "condition": self.condition,
            "mode": self.mode,
            "inventory": [self._item_view(i) for i in sorted(player.state.inventory)],
            "score": player.state.score,
            "bonus": round(player.state.score * self.bonus_rate, 6),
            "remaining_seconds": self.remaining,
            "started": self.started_at is not None,
            "scoreboard": scoreboard,
            "event_count": len(self.events),
        }


def replay_log(events: Iterable[AttemptEvent], tree: TaskTree | None = None) -> dict:
    """Re-derive every player's final inventory and score from a session log.

    Replays attempts through the same task rules and cross-checks each event's
    recorded outcome, state hash, and running score; the first divergence
    raises with the event index.
    """
    tree = tree if tree is not None else default_task_tree()
    inventories: dict[str, set] = {}
    scores: dict[str, int] = {}
    succeeded: dict[str, set] = {}
    basics = set(tree.basic_items)
    for index, ev in enumerate(events):
        actor = ev.actor_id
        inv = inventories.setdefault(actor, set(basics))
        succeeded.setdefault(actor, set())
        scores.setdefault(actor, 0)
        if ev.kind == KIND_ATTEMPT:
            expected_hash = state_hash(inv)
            if ev.state_hash != expected_hash:
                raise ValueError(f"event {index}: state hash mismatch for {actor!r}")
            product = tree.resolve(ev.combination)
            if product != ev.outcome and ev.outcome is not None:
                raise ValueError(f"event {index}: outcome mismatch for {actor!r}: "
                                 f"log says {ev.outcome}, rules say {product}")
            # outcome None is also valid for a repeated attempt of a known rule
            if ev.outcome is not None:
                if ev.combination not in succeeded[actor]:
                    succeeded[actor].add(ev.combination)
                    scores[actor] += tree.score_of(product)
                inv.add(product)
        elif ev.kind == "social_copy":
            if ev.outcome is None:
                raise ValueError(f"event {index}: social_copy without an item")
            inv.add(ev.outcome)
            # copies may or may not credit score (bots do, simulated agents don't)
            delta = ev.score_after - scores[actor]
            if delta not in (0, tree.score_of(ev.outcome)):
                raise ValueError(f"event {index}: social_copy score delta {delta} for {actor!r} "
                                 f"is neither 0 nor the item score")
            scores[actor] = ev.score_after
        if ev.kind == KIND_ATTEMPT and ev.score_after != scores[actor]:
            raise ValueError(f"event {index}: score mismatch for {actor!r}: "
                             f"log says {ev.score_after}, replay says {scores[actor]}")
    return {"scores": scores, "inventories": {k: sorted(v) for k, v in inventories.items()}}


# -- HTTP layer -----------------------------------------------------------------


class CreateSessionRequest(BaseModel):
    condition: str
    mode: str
    seed: int = 0
    bonus_rate: float = DEFAULT_BONUS_RATE
    label_seed: int = 0
    manual_time: bool = False
    duration: float = SESSION_SECONDS
    humans: int = 1


class AttemptRequest(BaseModel):
    items: list[int]
    now: float | None = None


class InspectRequest(BaseModel):
    target: str
    now: float | None = None


class InspectItemRequest(BaseModel):
    target: str
    item: int
    now: float | None = None


class ReplayRequest(BaseModel):
    events: list[dict]


def create_app(tree: TaskTree | None = None) -> FastAPI:
    app = FastAPI(title="craftevo session service")
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions
    base_tree = tree

    def get_session(session_id: str) -> Session:
        if session_id not in sessions:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return sessions[session_id]

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            session = Session(req.condition, req.mode, req.seed, tree=base_tree,
                              bonus_rate=req.bonus_rate, label_seed=req.label_seed,
                              manual_time=req.manual_time, duration=req.duration,
                              humans=req.humans)
        except SessionError as exc:
            raise HTTPException(exc.status, exc.message) from None
        sessions[session.id] = session
        return {"session_id": session.id,
                "players": sorted(session.players),
                "view": session.player_view("player_0")}

    def _guarded(session: Session, fn, *args):
        with session.lock:
            try:
                return fn(*args)
            except SessionError as exc:
                raise HTTPException(exc.status, exc.message) from None

    @app.post("/sessions/{session_id}/players/{player_id}/attempts")
    def submit_attempt(session_id: str, player_id: str, req: AttemptRequest):
        session = get_session(session_id)
        return _guarded(session, session.submit_attempt, player_id, req.items, req.now)

    @app.post("/sessions/{session_id}/players/{player_id}/inspect")
    def inspect(session_id: str, player_id: str, req: InspectRequest):
        session = get_session(session_id)
        return _guarded(session, session.inspect_player, player_id, req.target, req.now)

    @app.post("/sessions/{session_id}/players/{player_id}/inspect-item")
    def inspect_item(session_id: str, player_id: str, req: InspectItemRequest):
        session = get_session(session_id)
        return _guarded(session, session.inspect_item_recipe, player_id, req.target, req.item, req.now)

    @app.get("/sessions/{session_id}/players/{player_id}/view")
    def view(session_id: str, player_id: str, now: float | None = None):
        session = get_session(session_id)
        return _guarded(session, session.player_view, player_id, now)

    @app.get("/sessions/{session_id}/log")
    def log(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return {"session_id": session_id,
                    "events": [json.loads(ev.to_json()) for ev in session.events]}

    @app.get("/sessions/{session_id}/events")
    def event_stream(session_id: str, since: int = 0, now: float | None = None):
        """Server-pushed event stream (SSE); replays from the `since` index."""
        session = get_session(session_id)

        def generate():
            cursor = since
            idle = 0.0
            while True:
                with session.lock:
                    try:
                        session.advance_bots(now if session.manual_time else None)
                    except SessionError:
                        pass
                    chunk = session.events[cursor:]
                    expired = session.expired
                for i, ev in enumerate(chunk):
                    payload = json.loads(ev.to_json())
                    payload["index"] = cursor + i
                    yield f"id: {cursor + i}\ndata: {json.dumps(payload, sort_keys=True)}\n\n"
                cursor += len(chunk)
                if expired or session.manual_time:
                    yield "event: end\ndata: {}\n\n"
                    return
                time.sleep(0.25)
                idle += 0.25
                if idle > session.duration + 60:
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/replay")
    def replay(req: ReplayRequest):
        try:
            events = [AttemptEvent.from_dict(doc) for doc in req.events]
            result = replay_log(events, base_tree)
        except (KeyError, TypeError) as exc:
            raise HTTPException(422, f"malformed event: {exc}") from None
        except ValueError as exc:
            raise HTTPException(409, str(exc)) from None
        return result

    return app
