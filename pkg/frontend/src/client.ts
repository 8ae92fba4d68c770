import {
  Ack,
  OperatorCommand,
  TelemetrySnapshot,
  isTelemetrySnapshot,
} from "./types.js";

export type ConnectionStatus = "connecting" | "live" | "disconnected";

export interface TelemetryHandlers {
  onSnapshot: (snap: TelemetrySnapshot) => void;
  onStatus?: (status: ConnectionStatus) => void;
}

/**
 * Ordered telemetry stream over a websocket. Malformed or wrong-version
 * frames are dropped; the handler only ever sees validated snapshots.
 */
export class TelemetryClient {
  private ws: WebSocket | null = null;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly handlers: TelemetryHandlers,
    private readonly reconnectMs = 2000,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
    this.ws = null;
  }

  private open(): void {
    this.handlers.onStatus?.("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => this.handlers.onStatus?.("live");
    ws.onmessage = (ev: MessageEvent) => {
      let raw: unknown;
      try {
        raw = JSON.parse(String(ev.data));
      } catch {
        return;
      }
      if (isTelemetrySnapshot(raw)) this.handlers.onSnapshot(raw);
    };
    ws.onclose = () => {
      this.handlers.onStatus?.("disconnected");
      if (!this.closed) setTimeout(() => this.open(), this.reconnectMs);
    };
  }
}

/** Fire-and-ack command channel over HTTP POST. */
export class CommandClient {
  constructor(
    private readonly endpoint: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async send(cmd: OperatorCommand): Promise<Ack> {
    const res = await this.fetchFn(this.endpoint, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(cmd),
    });
    if (!res.ok) {
      return { v: cmd.v, accepted: false, reason: `HTTP ${res.status}` };
    }
    return (await res.json()) as Ack;
  }
}
