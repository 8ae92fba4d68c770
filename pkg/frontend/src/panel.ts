import { CommandClient } from "./client.js";
import { Ack, TelemetrySnapshot, command } from "./types.js";

/**
 * Operator command panel. Optimistic UI is deliberately off: a control
 * re-enables only when its ack returns, and displayed state changes only
 * when a telemetry snapshot reflects them.
 */
export class CommandPanel {
  private readonly log: HTMLElement;
  private goals = 0;
  private uavs = 0;
  private built = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: CommandClient,
  ) {
    this.root.classList.add("command-panel");
    this.log = document.createElement("div");
    this.log.className = "ack-log";
    this.log.dataset.testid = "ack-log";
  }

  /** The panel sizes its controls from the first snapshot. */
  observe(snap: TelemetrySnapshot): void {
    if (!this.built || snap.goals.length !== this.goals ||
        snap.uavs.length !== this.uavs) {
      this.goals = snap.goals.length;
      this.uavs = snap.uavs.length;
      this.build();
    }
  }

  private build(): void {
    this.built = true;
    this.root.replaceChildren();

    const run = document.createElement("div");
    run.className = "run-controls";
    for (const kind of ["pause", "resume", "stepOnce", "reset"] as const) {
      run.append(this.button(kind, () => command(kind)));
    }
    this.root.append(run);

    const goals = document.createElement("div");
    goals.className = "priority-controls";
    for (let j = 1; j <= this.goals; j++) {
      for (const level of [0, 1, 2]) {
        goals.append(
          this.button(`g${j}→${level}`, () =>
            command("setGoalPriority", { goal: j, level }),
          ),
        );
      }
    }
    this.root.append(goals);

    const faults = document.createElement("div");
    faults.className = "fault-controls";
    for (let u = 1; u <= this.uavs; u++) {
      faults.append(
        this.button(`fault uav ${u}`, () => {
          const raw = window.prompt(`fault index for UAV ${u} (1-18)`, "5");
          if (raw === null) return null;
          return command("injectFault", { uav: u, faultIndex: Number(raw) });
        }),
      );
    }
    this.root.append(faults);
    this.root.append(this.log);
  }

  private button(
    label: string,
    make: () => ReturnType<typeof command> | null,
  ): HTMLButtonElement {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.addEventListener("click", () => {
      const cmd = make();
      if (cmd === null) return;
      btn.disabled = true;
      void this.client
        .send(cmd)
        .then((ack) => this.logAck(cmd.kind, ack))
        .catch((err) =>
          this.logAck(cmd.kind, {
            v: cmd.v,
            accepted: false,
            reason: String(err),
          }),
        )
        .finally(() => {
          btn.disabled = false;
        });
    });
    return btn;
  }

  private logAck(kind: string, ack: Ack): void {
    const line = document.createElement("div");
    line.className = ack.accepted ? "ack ok" : "ack rejected";
    line.textContent = ack.accepted
      ? `${kind}: accepted, effective epoch ${ack.effectiveEpoch ?? "?"}`
      : `${kind}: rejected — ${ack.reason ?? "unknown"}`;
    this.log.prepend(line);
    while (this.log.childElementCount > 20) this.log.lastElementChild?.remove();
  }
}
