import { TelemetrySnapshot } from "./types.js";

export interface TimelineEntry {
  epoch: number;
  assigned: number[];
}

const SVG_NS = "http://www.w3.org/2000/svg";
const CELL_W = 48;
const ROW_H = 22;
const PAD = 36;

/**
 * Per-UAV assignment timeline rendered as a step plot: x is the decision
 * epoch, y the assigned goal (0 = idle). Snapshots taken before any epoch
 * has run carry no decision record and are ignored.
 */
export class AssignmentTimeline {
  private entries = new Map<number, TimelineEntry>();

  constructor(private readonly root: HTMLElement) {
    this.root.classList.add("timeline");
  }

  push(snap: TelemetrySnapshot): void {
    if (snap.decision.topQ.length === 0) return; // pre-step snapshot
    // the snapshot reports the world epoch about to run; the decision
    // belongs to the epoch just completed
    const epoch = snap.epoch - 1;
    this.entries.set(epoch, { epoch, assigned: [...snap.decision.assigned] });
    this.render();
  }

  sequence(): TimelineEntry[] {
    return [...this.entries.values()].sort((a, b) => a.epoch - b.epoch);
  }

  render(): void {
    const seq = this.sequence();
    this.root.replaceChildren();
    if (seq.length === 0) {
      this.root.textContent = "no decisions yet";
      return;
    }
    const uavCount = seq[0]!.assigned.length;
    const goalMax = Math.max(1, ...seq.flatMap((e) => e.assigned));
    const width = PAD + seq.length * CELL_W + PAD;

    const label = document.createElement("div");
    label.className = "timeline-text";
    label.dataset.testid = "timeline-text";
    label.textContent = seq
      .map((e) => `[${e.assigned.join(",")}]`)
      .join(" → ");
    this.root.append(label);

    for (let u = 0; u < uavCount; u++) {
      const height = (goalMax + 1) * ROW_H + PAD;
      const svg = document.createElementNS(SVG_NS, "svg");
      svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
      svg.setAttribute("width", String(width));
      svg.setAttribute("height", String(height));
      svg.setAttribute("data-uav", String(u + 1));
      svg.setAttribute("role", "img");
      svg.setAttribute("aria-label", `UAV ${u + 1} assignment timeline`);

      for (let g = 0; g <= goalMax; g++) {
        const y = height - PAD - g * ROW_H;
        const tick = document.createElementNS(SVG_NS, "text");
        tick.setAttribute("x", "4");
        tick.setAttribute("y", String(y + 4));
        tick.setAttribute("class", "tick");
        tick.textContent = g === 0 ? "idle" : `g${g}`;
        svg.append(tick);
      }

      const points = seq
        .map((e, i) => {
          const x0 = PAD + i * CELL_W;
          const y = height - PAD - (e.assigned[u] ?? 0) * ROW_H;
          return `${x0},${y} ${x0 + CELL_W},${y}`;
        })
        .join(" ");
      const line = document.createElementNS(SVG_NS, "polyline");
      line.setAttribute("points", points);
      line.setAttribute("class", "step");
      line.setAttribute("fill", "none");
      svg.append(line);

      seq.forEach((e, i) => {
        const x = PAD + i * CELL_W + CELL_W / 2;
        const text = document.createElementNS(SVG_NS, "text");
        text.setAttribute("x", String(x));
        text.setAttribute("y", String(height - 8));
        text.setAttribute("class", "tick");
        text.setAttribute("text-anchor", "middle");
        text.textContent = String(e.epoch);
        svg.append(text);
      });

      this.root.append(svg);
    }
  }
}
