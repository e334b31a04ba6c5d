/**
 * Browser bootstrap: read session parameters from the query string, create a
 * session, mount the play screen, and start live sync.
 *
 *   index.html?server=http://127.0.0.1:8000&condition=semantic&mode=group
 */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { PlayScreen } from "./ui.js";

export async function boot(doc: Document, win: Window): Promise<SessionController> {
  const params = new URLSearchParams(win.location.search);
  const server = params.get("server") ?? "http://127.0.0.1:8000";
  const condition = params.get("condition") ?? "semantic";
  const mode = params.get("mode") ?? "individual";
  const seed = Number(params.get("seed") ?? "0");

  const api = new ApiClient(server);
  const screen = new PlayScreen(doc);
  doc.body.append(screen.root);
  const controller = await SessionController.create(api, condition, mode, screen, { seed });
  void controller.liveSync();
  return controller;
}

declare const window: (Window & typeof globalThis) | undefined;

if (typeof window !== "undefined" && typeof document !== "undefined") {
  void boot(document, window);
}
