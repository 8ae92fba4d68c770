/** JSON message schemas spoken by the coordination service (schema v1). */

export const SCHEMA_VERSION = 1;

export interface TopBid {
  goal: number;
  value: number | null;
}

export interface UavTelemetry {
  id: number;
  assignment: number;
  fault: number;
  available: boolean;
  loc: number;
  soc: number;
  topBids: TopBid[];
}

export interface TopQ {
  decision: number[];
  q: number | null;
}

export interface DecisionTelemetry {
  assigned: number[];
  topQ: TopQ[];
}

export interface TelemetrySnapshot {
  v: number;
  epoch: number;
  goals: number[];
  uavs: UavTelemetry[];
  decision: DecisionTelemetry;
  paused: boolean;
}

export type CommandKind =
  | "setGoalPriority"
  | "injectFault"
  | "setSoc"
  | "pause"
  | "resume"
  | "stepOnce"
  | "reset";

export interface OperatorCommand {
  v: number;
  kind: CommandKind;
  args: Record<string, unknown>;
}

export interface Ack {
  v: number;
  accepted: boolean;
  effectiveEpoch?: number;
  reason?: string;
}

export function isTelemetrySnapshot(raw: unknown): raw is TelemetrySnapshot {
  if (typeof raw !== "object" || raw === null) return false;
  const m = raw as Record<string, unknown>;
  return (
    m.v === SCHEMA_VERSION &&
    typeof m.epoch === "number" &&
    Array.isArray(m.goals) &&
    Array.isArray(m.uavs) &&
    typeof m.decision === "object" &&
    m.decision !== null
  );
}

export function command(
  kind: CommandKind,
  args: Record<string, unknown> = {},
): OperatorCommand {
  return { v: SCHEMA_VERSION, kind, args };
}
