/**
 * Typed client for the session service HTTP interface.
 *
 * The UI talks to the backend exclusively through this module: REST calls for
 * actions and views, plus a server-sent event stream with index-based replay
 * so a reconnecting client never misses or duplicates an event.
 */

export interface ItemView {
  id: number;
  label: string;
  score: number;
}

export interface ScoreboardRow {
  player: string;
  score: number;
  is_bot: boolean;
}

export interface PlayerView {
  session_id: string;
  condition: string;
  mode: string;
  inventory: ItemView[];
  score: number;
  bonus: number;
  remaining_seconds: number;
  started: boolean;
  scoreboard: ScoreboardRow[];
  event_count: number;
}

export interface SessionInfo {
  session_id: string;
  players: string[];
  view: PlayerView;
}

export interface AttemptResult {
  outcome: ItemView | null;
  first_craft: boolean;
  event_index: number;
  view: PlayerView;
}

export interface InspectResult {
  target: string;
  items: ItemView[];
  target_score: number;
}

export interface RecipeResult {
  target: string;
  item: ItemView;
  ingredients: ItemView[];
}

export interface LogEvent {
  index?: number;
  t: number;
  actor_id: string;
  kind: string;
  combination: number[];
  outcome: number | null;
  score_after: number;
  state_hash: string;
}

export interface CreateOptions {
  seed?: number;
  manual_time?: boolean;
  duration?: number;
  humans?: number;
  label_seed?: number;
}

async function expectOk(resp: Response): Promise<any> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      detail = body.detail ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, String(detail));
  }
  return resp.json();
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  async createSession(condition: string, mode: string, options: CreateOptions = {}): Promise<SessionInfo> {
    const resp = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ condition, mode, ...options }),
    });
    return expectOk(resp);
  }

  async submitAttempt(sessionId: string, playerId: string, items: number[], now?: number): Promise<AttemptResult> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/players/${playerId}/attempts`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ items, now }),
    });
    return expectOk(resp);
  }

  async inspectPlayer(sessionId: string, playerId: string, target: string, now?: number): Promise<InspectResult> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/players/${playerId}/inspect`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ target, now }),
    });
    return expectOk(resp);
  }

  async inspectItem(sessionId: string, playerId: string, target: string, item: number, now?: number): Promise<RecipeResult> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/players/${playerId}/inspect-item`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ target, item, now }),
    });
    return expectOk(resp);
  }

  async view(sessionId: string, playerId: string, now?: number): Promise<PlayerView> {
    const query = now === undefined ? "" : `?now=${now}`;
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/players/${playerId}/view${query}`);
    return expectOk(resp);
  }

  async log(sessionId: string): Promise<LogEvent[]> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/log`);
    const body = await expectOk(resp);
    return body.events;
  }

  async replay(events: LogEvent[]): Promise<{ scores: Record<string, number> }> {
    const resp = await fetch(`${this.baseUrl}/replay`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ events }),
    });
    return expectOk(resp);
  }

  /**
   * Consume the server-sent event stream from a given index. Resolves when the
   * server closes the stream; the caller handles reconnect policy.
   */
  async streamEvents(
    sessionId: string,
    since: number,
    onEvent: (ev: LogEvent) => void,
    now?: number,
  ): Promise<void> {
    const query = now === undefined ? `since=${since}` : `since=${since}&now=${now}`;
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/events?${query}`);
    if (!resp.ok || resp.body === null) {
      throw new ApiError(resp.status, "event stream unavailable");
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let sep;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        const dataLine = frame.split("\n").find((line) => line.startsWith("data: "));
        if (!dataLine) continue;
        if (frame.startsWith("event: end")) return;
        const payload = JSON.parse(dataLine.slice("data: ".length));
        if (payload && typeof payload === "object" && "kind" in payload) {
          onEvent(payload as LogEvent);
        }
      }
    }
  }
}
