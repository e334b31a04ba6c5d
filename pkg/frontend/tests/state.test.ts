import { describe, expect, it } from "vitest";

import type { ItemView, PlayerView } from "../src/api.js";
import {
  applyServerEvent,
  applyView,
  clearSlots,
  emptyState,
  placeItem,
  removeSlot,
  selectedItems,
  sortScoreboard,
  Store,
} from "../src/state.js";

const item = (id: number, label = `item-${id}`): ItemView => ({ id, label, score: id });

function baseView(overrides: Partial<PlayerView> = {}): PlayerView {
  return {
    session_id: "s",
    condition: "semantic",
    mode: "group",
    inventory: [item(0), item(1), item(2)],
    score: 0,
    bonus: 0,
    remaining_seconds: 600,
    started: false,
    scoreboard: [
      { player: "player_0", score: 0, is_bot: false },
      { player: "bot_0", score: 0, is_bot: true },
    ],
    event_count: 0,
    ...overrides,
  };
}

function stateWithInventory() {
  return applyView(emptyState("s", "player_0", "semantic", "group"), baseView());
}

describe("slots", () => {
  it("fills the first free slot with an owned item", () => {
    let state = stateWithInventory();
    state = placeItem(state, item(1));
    expect(state.slots[0]?.id).toBe(1);
    expect(state.slots[1]).toBeNull();
  });

  it("ignores a fourth selection once slots are full", () => {
    let state = stateWithInventory();
    for (const id of [0, 1, 2]) state = placeItem(state, item(id));
    const full = state.slots.map((slot) => slot?.id);
    state = placeItem(state, item(2));
    expect(state.slots.map((slot) => slot?.id)).toEqual(full);
  });

  it("rejects items the player does not own", () => {
    let state = stateWithInventory();
    state = placeItem(state, item(99));
    expect(state.slots.every((slot) => slot === null)).toBe(true);
  });

  it("allows the same item twice (repeat attempts are legal)", () => {
    let state = stateWithInventory();
    state = placeItem(state, item(1));
    state = placeItem(state, item(1));
    expect(selectedItems(state)).toEqual([1, 1]);
  });

  it("clears a single slot or all slots", () => {
    let state = stateWithInventory();
    state = placeItem(state, item(0));
    state = placeItem(state, item(1));
    state = removeSlot(state, 0);
    expect(selectedItems(state)).toEqual([1]);
    state = clearSlots(state);
    expect(selectedItems(state)).toEqual([]);
  });

  it("ignores placement after expiry", () => {
    let state = stateWithInventory();
    state = applyView(state, baseView({ started: true, remaining_seconds: 0 }));
    expect(state.expired).toBe(true);
    state = placeItem(state, item(0));
    expect(selectedItems(state)).toEqual([]);
  });
});

describe("scoreboard", () => {
  it("sorts by descending score with stable ties", () => {
    const rows = [
      { player: "a", score: 3, is_bot: false },
      { player: "b", score: 7, is_bot: true },
      { player: "c", score: 3, is_bot: true },
    ];
    expect(sortScoreboard(rows).map((row) => row.player)).toEqual(["b", "a", "c"]);
  });

  it("reorders live on server events and ignores replayed duplicates", () => {
    let state = stateWithInventory();
    const ev = {
      index: 0, t: 8, actor_id: "bot_0", kind: "attempt", combination: [0, 1],
      outcome: 6, score_after: 12, state_hash: "006-x",
    };
    state = applyServerEvent(state, ev);
    expect(state.scoreboard[0].player).toBe("bot_0");
    expect(state.lastEventIndex).toBe(0);
    const again = applyServerEvent(state, { ...ev, score_after: 99 });
    expect(again).toBe(state);
  });
});

describe("applyView", () => {
  it("is the single source of inventory and score", () => {
    let state = stateWithInventory();
    const view = baseView({
      inventory: [item(2), item(0), item(1), item(9)],
      score: 17,
      started: true,
      remaining_seconds: 120,
    });
    state = applyView(state, view);
    expect(state.inventory.map((it) => it.id)).toEqual([0, 1, 2, 9]);
    expect(state.score).toBe(17);
    expect(state.started).toBe(true);
    expect(state.expired).toBe(false);
  });

  it("drops slot contents that are no longer owned after a resync", () => {
    let state = stateWithInventory();
    state = placeItem(state, item(2));
    state = applyView(state, baseView({ inventory: [item(0), item(1)] }));
    expect(state.slots.every((slot) => slot === null)).toBe(true);
  });
});

describe("store", () => {
  it("applies queued async transitions strictly in dispatch order", async () => {
    const store = new Store(stateWithInventory());
    const seen: number[] = [];
    store.subscribe((state) => seen.push(state.score));
    void store.dispatch(async (state) => {
      await new Promise((resolve) => setTimeout(resolve, 20));
      return { ...state, score: 1 };
    });
    void store.dispatch((state) => ({ ...state, score: state.score + 1 }));
    await store.dispatch((state) => state);
    expect(seen).toEqual([1, 2, 2]);
    expect(store.get().score).toBe(2);
  });
});
