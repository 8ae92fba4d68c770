import { CommandClient, ConnectionStatus, TelemetryClient } from "./client.js";
import { MissionGrid } from "./grid.js";
import { CommandPanel } from "./panel.js";
import { AssignmentTimeline } from "./timeline.js";
import { TelemetrySnapshot } from "./types.js";

export interface ConsoleElements {
  banner: HTMLElement;
  grid: HTMLElement;
  timeline: HTMLElement;
  panel: HTMLElement;
}

/**
 * Wires the telemetry stream to the three views. Every rendered change
 * originates from a received snapshot; commands only produce acks.
 */
export class OperatorConsole {
  readonly timeline: AssignmentTimeline;
  readonly grid: MissionGrid;
  readonly panel: CommandPanel;
  private last: TelemetrySnapshot | null = null;
  private status: ConnectionStatus = "connecting";

  constructor(
    els: ConsoleElements,
    private readonly banner: HTMLElement = els.banner,
    commands?: CommandClient,
  ) {
    this.timeline = new AssignmentTimeline(els.timeline);
    this.grid = new MissionGrid(els.grid);
    this.panel = new CommandPanel(
      els.panel,
      commands ?? new CommandClient("/command"),
    );
  }

  handleSnapshot(snap: TelemetrySnapshot): void {
    this.last = snap;
    this.panel.observe(snap);
    this.timeline.push(snap);
    this.grid.render(snap, this.status !== "live");
  }

  handleStatus(status: ConnectionStatus): void {
    this.status = status;
    this.banner.dataset.status = status;
    this.banner.textContent =
      status === "live"
        ? "telemetry live"
        : status === "connecting"
          ? "connecting…"
          : "disconnected — data may be stale";
    if (this.last) this.grid.render(this.last, status !== "live");
  }
}

export function mount(doc: Document = document): OperatorConsole {
  const byId = (id: string): HTMLElement => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el;
  };
  const console_ = new OperatorConsole({
    banner: byId("banner"),
    grid: byId("grid"),
    timeline: byId("timeline"),
    panel: byId("panel"),
  });
  const proto = doc.location.protocol === "https:" ? "wss" : "ws";
  const client = new TelemetryClient(
    `${proto}://${doc.location.host}/telemetry`,
    {
      onSnapshot: (s) => console_.handleSnapshot(s),
      onStatus: (s) => console_.handleStatus(s),
    },
  );
  client.connect();
  return console_;
}
