import { TelemetrySnapshot } from "./types.js";

const PRIORITY_LABEL = ["achieved", "low", "high"] as const;

/** Goal priority tiles plus per-UAV health/SOC cards. */
export class MissionGrid {
  constructor(private readonly root: HTMLElement) {
    this.root.classList.add("mission-grid");
  }

  render(snap: TelemetrySnapshot, stale: boolean): void {
    this.root.replaceChildren();
    this.root.classList.toggle("stale", stale);

    const goals = document.createElement("div");
    goals.className = "goal-row";
    snap.goals.forEach((level, j) => {
      const tile = document.createElement("div");
      tile.className = `goal-tile priority-${level}`;
      tile.dataset.goal = String(j + 1);
      tile.dataset.level = String(level);
      const label = PRIORITY_LABEL[level] ?? `level ${level}`;
      tile.textContent = `goal ${j + 1}: ${label}`;
      goals.append(tile);
    });
    this.root.append(goals);

    const cards = document.createElement("div");
    cards.className = "uav-row";
    for (const uav of snap.uavs) {
      const card = document.createElement("div");
      card.className = "uav-card";
      card.dataset.uav = String(uav.id);
      const health =
        uav.fault === 1 ? "healthy" : uav.fault <= 4 ? "degraded" : "severe";
      card.classList.add(health);
      const bids = uav.topBids
        .map((b) => `g${b.goal}: ${b.value === null ? "n/a" : b.value.toFixed(1)}`)
        .join(", ");
      card.innerHTML = "";
      const lines = [
        `UAV ${uav.id} @ region ${uav.loc}`,
        `health: ${health} (fault ${uav.fault})`,
        `SOC: ${(uav.soc * 100).toFixed(1)}%`,
        `assigned: ${uav.assignment === 0 ? "idle" : `goal ${uav.assignment}`}`,
        uav.available ? "available" : "busy",
        `bids — ${bids}`,
      ];
      for (const text of lines) {
        const p = document.createElement("div");
        p.textContent = text;
        card.append(p);
      }
      cards.append(card);
    }
    this.root.append(cards);

    const status = document.createElement("div");
    status.className = "epoch-status";
    status.textContent = `epoch ${snap.epoch}${snap.paused ? " (paused)" : ""}`;
    this.root.append(status);
  }
}
