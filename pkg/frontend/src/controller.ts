/**
 * Glue between the API client, the store, and the rendered screen.
 *
 * Every server interaction funnels through here: attempts and inspections go
 * out, authoritative views come back, and the event stream keeps the
 * scoreboard and clock live. On stream loss the controller reconnects with
 * exponential backoff, replays missed events from the last acknowledged
 * index, and re-fetches the view to resynchronize.
 */

import { ApiClient, ApiError, type ItemView, type SessionInfo } from "./api.js";
import {
  applyServerEvent,
  applyView,
  clearSlots,
  emptyState,
  markExpired,
  placeItem,
  removeSlot,
  selectedItems,
  showBanner,
  Store,
} from "./state.js";
import { PlayScreen } from "./ui.js";

export interface ControllerOptions {
  /** Manual-time sessions pass an explicit clock on every call (tests). */
  now?: () => number;
  reconnectBaseMs?: number;
  maxReconnects?: number;
}

export class SessionController {
  readonly store: Store;
  private stopped = false;

  constructor(
    private api: ApiClient,
    session: SessionInfo,
    private playerId: string,
    screen: PlayScreen | null,
    private options: ControllerOptions = {},
  ) {
    const view = session.view;
    this.store = new Store(applyView(
      emptyState(session.session_id, playerId, view.condition, view.mode), view));
    if (screen !== null) {
      screen.bind({
        onPlace: (item) => this.place(item),
        onSlotClear: (index) => this.store.dispatch((s) => removeSlot(s, index)),
        onAttempt: () => this.attempt(),
        onInspect: (target) => this.inspect(target),
        onRecipe: (target, item) => this.openRecipe(target, item),
        onCloseRecipe: () => this.store.dispatch((s) => ({ ...s, recipeModal: null })),
      });
      this.store.subscribe((state) => screen.render(state));
      screen.render(this.store.get());
    }
  }

  static async create(api: ApiClient, condition: string, mode: string, screen: PlayScreen | null,
                      options: ControllerOptions & { seed?: number; manual_time?: boolean;
                                                     duration?: number } = {}): Promise<SessionController> {
    const { now, reconnectBaseMs, maxReconnects, ...createOptions } = options;
    const session = await api.createSession(condition, mode, createOptions);
    return new SessionController(api, session, "player_0", screen, { now, reconnectBaseMs, maxReconnects });
  }

  place(item: ItemView): Promise<void> {
    return this.store.dispatch((state) => placeItem(state, item));
  }

  async attempt(): Promise<void> {
    await this.store.dispatch(async (state) => {
      const items = selectedItems(state);
      if (items.length === 0 || state.expired) return state;
      try {
        const result = await this.api.submitAttempt(
          state.sessionId, this.playerId, items, this.options.now?.());
        let next = applyView(clearSlots(state), result.view);
        if (result.outcome === null) {
          next = showBanner(next, { kind: "failure", text: "Nothing happened" });
        } else if (result.first_craft) {
          next = showBanner(next, {
            kind: "success",
            text: `Created ${result.outcome.label} (+${result.outcome.score})`,
          });
        } else {
          next = showBanner(next, { kind: "repeat", text: `${result.outcome.label} again` });
        }
        return next;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409 && err.message.includes("expired")) {
          return showBanner(markExpired(state), { kind: "error", text: "Session expired" });
        }
        const text = err instanceof Error ? err.message : String(err);
        return showBanner(state, { kind: "error", text });
      }
    });
  }

  async inspect(target: string): Promise<void> {
    await this.store.dispatch(async (state) => {
      if (state.mode !== "group") return state;
      const result = await this.api.inspectPlayer(
        state.sessionId, this.playerId, target, this.options.now?.());
      return {
        ...state,
        groupPanel: { target, items: result.items, targetScore: result.target_score },
      };
    });
  }

  async openRecipe(target: string, item: ItemView): Promise<void> {
    await this.store.dispatch(async (state) => {
      const result = await this.api.inspectItem(
        state.sessionId, this.playerId, target, item.id, this.options.now?.());
      return { ...state, recipeModal: { target, item: result.item, ingredients: result.ingredients } };
    });
  }

  async refreshView(): Promise<void> {
    await this.store.dispatch(async (state) => {
      const view = await this.api.view(state.sessionId, this.playerId, this.options.now?.());
      const next = applyView(state, view);
      return next.expired && !state.expired
        ? showBanner(next, { kind: "info", text: "Session over" })
        : next;
    });
  }

  /** Run the live-sync loop until the stream ends or the controller stops. */
  async liveSync(): Promise<void> {
    const base = this.options.reconnectBaseMs ?? 500;
    const maxAttempts = this.options.maxReconnects ?? 8;
    let failures = 0;
    while (!this.stopped && failures <= maxAttempts) {
      const since = this.store.get().lastEventIndex + 1;
      try {
        await this.api.streamEvents(this.store.get().sessionId, since, (ev) => {
          void this.store.dispatch((state) => applyServerEvent(state, ev));
        }, this.options.now?.());
        await this.refreshView();
        if (this.store.get().expired) return;
        if (this.options.now !== undefined) return; // manual time: one replay pass
        failures = 0;
      } catch {
        failures += 1;
        await new Promise((resolve) => setTimeout(resolve, base * 2 ** (failures - 1)));
        await this.refreshView().catch(() => undefined);
      }
    }
  }

  stop(): void {
    this.stopped = true;
  }
}
