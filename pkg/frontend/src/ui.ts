/**
 * DOM construction and rendering for the play screen.
 *
 * Layout mirrors the four task panels: combination slots with an attempt
 * button, the inventory grid, the live scoreboard, and (group mode only) the
 * inspection panel with a recipe modal. Condition skinning is label-only:
 * the same structure renders for semantic and non-semantic sessions, with
 * item tiles showing either real names or opaque codes plus a deterministic
 * color chip derived from the label.
 */

import type { ItemView } from "./api.js";
import type { UiState } from "./state.js";

export interface UiCallbacks {
  onPlace(item: ItemView): void;
  onSlotClear(index: number): void;
  onAttempt(): void;
  onInspect(target: string): void;
  onRecipe(target: string, item: ItemView): void;
  onCloseRecipe(): void;
}

/** Stable 32-bit FNV-1a hash of the label, mapped to an HSL color. */
export function labelColor(label: string): string {
  let hash = 0x811c9dc5;
  for (let i = 0; i < label.length; i++) {
    hash ^= label.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return `hsl(${hash % 360}, 55%, 55%)`;
}

function el(doc: Document, tag: string, className: string, text = ""): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function itemTile(doc: Document, item: ItemView, className: string): HTMLElement {
  const tile = el(doc, "button", className);
  tile.dataset.itemId = String(item.id);
  const chip = el(doc, "span", "color-chip");
  chip.style.backgroundColor = labelColor(item.label);
  const label = el(doc, "span", "item-label", item.label);
  tile.append(chip, label);
  return tile;
}

export class PlayScreen {
  readonly root: HTMLElement;
  private callbacks: UiCallbacks | null = null;

  constructor(private doc: Document) {
    this.root = el(doc, "div", "play-screen");
  }

  bind(callbacks: UiCallbacks): void {
    this.callbacks = callbacks;
  }

  /** Rebuild the screen from scratch; state is small enough that diffing is noise. */
  render(state: UiState): void {
    const doc = this.doc;
    this.root.replaceChildren();
    this.root.dataset.condition = state.condition;
    this.root.dataset.mode = state.mode;

    const header = el(doc, "header", "status-bar");
    header.append(
      el(doc, "span", "score", `Score: ${state.score}`),
      el(doc, "span", "bonus", `Bonus: ${state.bonus.toFixed(2)}`),
      el(doc, "span", "clock", this.clockText(state)),
    );
    this.root.append(header);

    this.root.append(this.combinationPanel(state));
    this.root.append(this.inventoryPanel(state));
    this.root.append(this.scoreboardPanel(state));
    if (state.mode === "group") {
      this.root.append(this.inspectPanel(state));
    }
    if (state.recipeModal !== null) {
      this.root.append(this.recipeModal(state));
    }
  }

  private clockText(state: UiState): string {
    if (state.expired) return "Time is up";
    if (!state.started) return "Clock starts on your first attempt";
    const seconds = Math.max(0, Math.round(state.remainingSeconds));
    return `${Math.floor(seconds / 60)}:${String(seconds % 60).padStart(2, "0")}`;
  }

  private combinationPanel(state: UiState): HTMLElement {
    const panel = el(this.doc, "section", "panel combination-panel");
    panel.append(el(this.doc, "h2", "panel-title", "Combine"));
    const slotRow = el(this.doc, "div", "slot-row");
    state.slots.forEach((slot, index) => {
      const cell = el(this.doc, "div", slot === null ? "slot empty" : "slot filled");
      if (slot !== null) {
        const tile = itemTile(this.doc, slot, "item-tile slot-item");
        tile.addEventListener("click", () => this.callbacks?.onSlotClear(index));
        cell.append(tile);
      } else {
        cell.append(el(this.doc, "span", "slot-placeholder", "+"));
      }
      slotRow.append(cell);
    });
    panel.append(slotRow);
    const attempt = el(this.doc, "button", "attempt-button", "Attempt");
    (attempt as HTMLButtonElement).disabled =
      state.expired || state.slots.every((slot) => slot === null);
    attempt.addEventListener("click", () => this.callbacks?.onAttempt());
    panel.append(attempt);
    const banner = el(this.doc, "div", `outcome-banner ${state.banner?.kind ?? "idle"}`);
    banner.textContent = state.banner?.text ?? "";
    panel.append(banner);
    return panel;
  }

  private inventoryPanel(state: UiState): HTMLElement {
    const panel = el(this.doc, "section", "panel inventory-panel");
    panel.append(el(this.doc, "h2", "panel-title", `Inventory (${state.inventory.length})`));
    const grid = el(this.doc, "div", "inventory-grid");
    for (const item of state.inventory) {
      const tile = itemTile(this.doc, item, "item-tile inventory-item");
      tile.addEventListener("click", () => this.callbacks?.onPlace(item));
      grid.append(tile);
    }
    panel.append(grid);
    return panel;
  }

  private scoreboardPanel(state: UiState): HTMLElement {
    const panel = el(this.doc, "section", "panel scoreboard-panel");
    panel.append(el(this.doc, "h2", "panel-title", "Scores"));
    const list = el(this.doc, "ol", "scoreboard");
    for (const row of state.scoreboard) {
      const entry = el(this.doc, "li", row.player === state.playerId ? "score-row self" : "score-row");
      entry.dataset.player = row.player;
      entry.append(
        el(this.doc, "span", "player-name", row.player),
        el(this.doc, "span", "player-score", String(row.score)),
      );
      if (state.mode === "group" && row.player !== state.playerId) {
        entry.addEventListener("click", () => this.callbacks?.onInspect(row.player));
      }
      list.append(entry);
    }
    panel.append(list);
    return panel;
  }

  private inspectPanel(state: UiState): HTMLElement {
    const panel = el(this.doc, "section", "panel inspect-panel");
    panel.append(el(this.doc, "h2", "panel-title", "Inspected innovations"));
    const body = el(this.doc, "div", "inspect-body");
    if (state.groupPanel === null) {
      body.append(el(this.doc, "p", "inspect-hint", "Click a group member to see their discoveries"));
    } else {
      body.append(el(this.doc, "p", "inspect-target", state.groupPanel.target));
      const grid = el(this.doc, "div", "inspect-grid");
      for (const item of state.groupPanel.items) {
        const tile = itemTile(this.doc, item, "item-tile inspected-item");
        const target = state.groupPanel.target;
        tile.addEventListener("click", () => this.callbacks?.onRecipe(target, item));
        grid.append(tile);
      }
      body.append(grid);
    }
    panel.append(body);
    return panel;
  }

  private recipeModal(state: UiState): HTMLElement {
    const modal = el(this.doc, "div", "recipe-modal");
    const card = el(this.doc, "div", "recipe-card");
    card.append(el(this.doc, "h3", "recipe-title", state.recipeModal!.item.label));
    const row = el(this.doc, "div", "recipe-ingredients");
    for (const ingredient of state.recipeModal!.ingredients) {
      row.append(itemTile(this.doc, ingredient, "item-tile ingredient-item"));
    }
    card.append(row);
    const close = el(this.doc, "button", "recipe-close", "Close");
    close.addEventListener("click", () => this.callbacks?.onCloseRecipe());
    card.append(close);
    modal.append(card);
    return modal;
  }
}

/**
 * Structural signature of a rendered tree: tags, classes, and data-attribute
 * keys, with all text and label-derived styling stripped. Two sessions that
 * differ only in display labels produce identical signatures.
 */
export function structuralSnapshot(node: Element): string {
  const classes = [...node.classList].sort().join(".");
  const dataKeys = Object.keys((node as HTMLElement).dataset ?? {}).sort().join(",");
  const children = [...node.children].map((child) => structuralSnapshot(child));
  return `<${node.tagName.toLowerCase()} class=${classes} data=${dataKeys}>[${children.join("")}]`;
}
