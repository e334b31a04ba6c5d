/**
 * UI state and its pure transition functions.
 *
 * All mutations run through a single queue (see store below): user input and
 * server pushes interleave in arrival order, and every inventory or score
 * change originates from a server response or event, never from local guesses.
 */

import type { ItemView, LogEvent, PlayerView, ScoreboardRow } from "./api.js";

export const MAX_SLOTS = 3;

export interface OutcomeBanner {
  kind: "success" | "failure" | "repeat" | "error" | "info";
  text: string;
}

export interface RecipeModal {
  target: string;
  item: ItemView;
  ingredients: ItemView[];
}

export interface GroupPanel {
  target: string;
  items: ItemView[];
  targetScore: number;
}

export interface UiState {
  sessionId: string;
  playerId: string;
  condition: string;
  mode: string;
  inventory: ItemView[];
  slots: (ItemView | null)[];
  banner: OutcomeBanner | null;
  scoreboard: ScoreboardRow[];
  score: number;
  bonus: number;
  remainingSeconds: number;
  started: boolean;
  expired: boolean;
  groupPanel: GroupPanel | null;
  recipeModal: RecipeModal | null;
  lastEventIndex: number;
}

export function emptyState(sessionId: string, playerId: string, condition: string, mode: string): UiState {
  return {
    sessionId,
    playerId,
    condition,
    mode,
    inventory: [],
    slots: [null, null, null],
    banner: null,
    scoreboard: [],
    score: 0,
    bonus: 0,
    remainingSeconds: 0,
    started: false,
    expired: false,
    groupPanel: null,
    recipeModal: null,
    lastEventIndex: -1,
  };
}

/** Descending score; ties keep their existing relative order (stable). */
export function sortScoreboard(rows: ScoreboardRow[]): ScoreboardRow[] {
  return rows
    .map((row, i) => ({ row, i }))
    .sort((a, b) => (b.row.score - a.row.score) || (a.i - b.i))
    .map((entry) => entry.row);
}

/** Sync all server-owned fields from an authoritative view. */
export function applyView(state: UiState, view: PlayerView): UiState {
  const owned = new Set(view.inventory.map((item) => item.id));
  return {
    ...state,
    inventory: [...view.inventory].sort((a, b) => a.id - b.id),
    score: view.score,
    bonus: view.bonus,
    remainingSeconds: view.remaining_seconds,
    started: view.started,
    expired: view.started && view.remaining_seconds <= 0,
    scoreboard: sortScoreboard(view.scoreboard),
    // drop slot contents the player no longer owns (cannot happen in normal
    // play, but reconnects re-derive everything from the server)
    slots: state.slots.map((slot) => (slot !== null && owned.has(slot.id) ? slot : null)),
  };
}

/** Place an owned item into the first free slot; ignored when full or foreign. */
export function placeItem(state: UiState, item: ItemView): UiState {
  if (state.expired) return state;
  if (!state.inventory.some((it) => it.id === item.id)) return state;
  const free = state.slots.findIndex((slot) => slot === null);
  if (free < 0) return state;
  const slots = [...state.slots];
  slots[free] = item;
  return { ...state, slots };
}

export function removeSlot(state: UiState, index: number): UiState {
  if (index < 0 || index >= MAX_SLOTS) return state;
  const slots = [...state.slots];
  slots[index] = null;
  return { ...state, slots };
}

export function clearSlots(state: UiState): UiState {
  return { ...state, slots: [null, null, null] };
}

export function selectedItems(state: UiState): number[] {
  return state.slots.filter((slot): slot is ItemView => slot !== null).map((slot) => slot.id);
}

/** Fold one pushed server event into the state (scoreboard ticks, bot moves). */
export function applyServerEvent(state: UiState, ev: LogEvent): UiState {
  const index = ev.index ?? state.lastEventIndex + 1;
  if (index <= state.lastEventIndex) return state; // replayed duplicate
  const scoreboard = state.scoreboard.map((row) =>
    row.player === ev.actor_id ? { ...row, score: ev.score_after } : row,
  );
  return { ...state, lastEventIndex: index, scoreboard: sortScoreboard(scoreboard) };
}

export function showBanner(state: UiState, banner: OutcomeBanner): UiState {
  return { ...state, banner };
}

export function markExpired(state: UiState): UiState {
  return { ...state, expired: true, remainingSeconds: 0 };
}

/**
 * Single-writer store: subscribers render, dispatchers queue transitions, and
 * transitions apply strictly in dispatch order even when they are async.
 */
export class Store {
  private state: UiState;
  private queue: Promise<void> = Promise.resolve();
  private listeners: ((state: UiState) => void)[] = [];

  constructor(initial: UiState) {
    this.state = initial;
  }

  get(): UiState {
    return this.state;
  }

  subscribe(listener: (state: UiState) => void): void {
    this.listeners.push(listener);
  }

  dispatch(update: (state: UiState) => UiState | Promise<UiState>): Promise<void> {
    this.queue = this.queue.then(async () => {
      this.state = await update(this.state);
      for (const listener of this.listeners) listener(this.state);
    });
    return this.queue;
  }
}
