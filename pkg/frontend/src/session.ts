/**
 * Client-side session state.
 *
 * A Session is a pure protocol consumer: it folds the ordered message
 * stream into a view (pool, poses, planned paths, task handles, per
 * robot timeline spans, trace records) and emits control messages for
 * user interactions. There is no simulation logic here; everything
 * shown is reconstructed from wire traffic.
 */

import {
  Body, CapabilityMsg, Envelope, Pose, TaskState, Value, WaypointMsg,
  decode, encode, DecodeError,
} from "./protocol.js";

export interface RobotView {
  name: string;
  capabilities: CapabilityMsg[];
  properties: Record<string, Value>;
  pose?: Pose;
  battery?: number;
  path: WaypointMsg[];          // intended path from the latest GOTO_SET
}

export interface TaskView {
  programId: string;
  state: TaskState;
  detail: string;
}

export type SpanStatus = "running" | "succeeded" | "failed" | "terminated";

/** One bar on the per-robot Gantt timeline. */
export interface TimelineSpan {
  instanceId: string;
  robot: string;
  action: string;
  args: Value[];
  startTs: number;
  endTs?: number;
  status: SpanStatus;
}

export interface WorldEvent { ts: number; name: string; args: Value[] }

export class Session {
  robots = new Map<string, RobotView>();
  tasks = new Map<string, TaskView>();
  spans: TimelineSpan[] = [];
  events: WorldEvent[] = [];
  banner: string | null = null;
  clockMs = 0;                  // latest timestamp seen from the server

  private traces = new Map<string, string[]>();
  private byInstance = new Map<string, TimelineSpan>();
  private seen = new Set<string>();
  private outN = 0;

  constructor(private sendLine: (line: string) => void = () => {}) {}

  // -- inbound ------------------------------------------------------------

  handleLine(raw: string): void {
    if (!raw.trim()) return;
    let env: Envelope;
    try {
      env = decode(raw);
    } catch (e) {
      if (e instanceof DecodeError) return;   // tolerate foreign traffic
      throw e;
    }
    this.apply(env);
  }

  apply(env: Envelope): void {
    const key = `${env.sender}/${env.id}`;
    if (this.seen.has(key)) return;   // re-delivery is a no-op
    this.seen.add(key);
    if (env.ts > this.clockMs) this.clockMs = env.ts;
    const b = env.body;
    switch (b.kind) {
      case "ADVERTISE": {
        const r = this.robot(b.robot);
        r.capabilities = b.capabilities;
        r.properties = { ...r.properties, ...b.properties };
        break;
      }
      case "RETRACT": {
        if (b.action === undefined) {
          this.robots.delete(b.robot);
        } else {
          const r = this.robots.get(b.robot);
          if (r) r.capabilities = r.capabilities.filter(
            (c) => c.action !== b.action);
        }
        break;
      }
      case "PROPERTY_UPDATE":
        this.robot(b.robot).properties[b.prop] = b.value;
        break;
      case "POSE_UPDATE": {
        const r = this.robot(b.robot);
        r.pose = b.pose;
        r.battery = b.battery;
        break;
      }
      case "START_ACTION": {
        const span: TimelineSpan = {
          instanceId: b.instanceId, robot: b.robot, action: b.action,
          args: b.args, startTs: env.ts, status: "running",
        };
        this.spans.push(span);
        this.byInstance.set(b.instanceId, span);
        break;
      }
      case "ACTION_STATUS": {
        if (b.status === "accepted" || b.status === "running") break;
        const span = this.byInstance.get(b.instanceId);
        if (span && span.endTs === undefined) {
          span.endTs = env.ts;
          span.status = b.status;
        }
        break;
      }
      case "GOTO_SET":
        for (const e of b.entries) this.robot(e.robot).path = e.waypoints;
        break;
      case "EVENT":
        if (b.name === "trace" && env.sender === "runtime") {
          const [pid, record] = b.args;
          const lines = this.traces.get(String(pid)) ?? [];
          lines.push(String(record));
          this.traces.set(String(pid), lines);
        } else {
          this.events.push({ ts: env.ts, name: b.name, args: b.args });
        }
        break;
      case "TASK_STATUS":
        this.tasks.set(b.programId, {
          programId: b.programId, state: b.state, detail: b.detail,
        });
        break;
      default:
        break;    // SUBMIT_PROGRAM / CANCEL_* from other clients
    }
  }

  private robot(name: string): RobotView {
    let r = this.robots.get(name);
    if (!r) {
      r = { name, capabilities: [], properties: {}, path: [] };
      this.robots.set(name, r);
    }
    return r;
  }

  // -- outbound (user interactions) ---------------------------------------

  private send(body: Body): void {
    const env: Envelope = {
      id: `ui-${this.outN++}`, sender: "ui", ts: this.clockMs, body,
    };
    this.sendLine(encode(env));
  }

  submitProgram(source: string, programId: string): void {
    this.send({ kind: "SUBMIT_PROGRAM", source, programId });
  }

  cancelTask(programId: string): void {
    this.send({ kind: "CANCEL_TASK", programId });
  }

  fireEvent(name: string, args: Value[] = []): void {
    this.send({ kind: "EVENT", name, args });
  }

  setProperty(robot: string, prop: string, value: Value): void {
    this.send({ kind: "PROPERTY_UPDATE", robot, prop, value });
  }

  /** Pool editing: spawn or re-shape a mock robot. */
  advertiseRobot(robot: string, capabilities: CapabilityMsg[],
                 properties: Record<string, Value> = {}): void {
    this.send({ kind: "ADVERTISE", robot, capabilities, properties });
  }

  /** Pool editing: drop one capability, or the whole robot. */
  retractRobot(robot: string, action?: string): void {
    this.send(action === undefined
      ? { kind: "RETRACT", robot }
      : { kind: "RETRACT", robot, action });
  }

  queryTask(programId: string): void {
    this.send({ kind: "TASK_STATUS", programId, state: "running", detail: "" });
  }

  // -- derived views ------------------------------------------------------

  /** Trace records received so far for one program. */
  traceRecords(programId: string): string[] {
    return this.traces.get(programId) ?? [];
  }

  /** Exported trace text; byte-identical to the server's trace file
   * once the task has finished. */
  exportTrace(programId: string): string {
    return this.traceRecords(programId).map((l) => l + "\n").join("");
  }

  /** Timeline grouped per robot, rows sorted by name. */
  ganttRows(): Array<{ robot: string; spans: TimelineSpan[] }> {
    const rows = new Map<string, TimelineSpan[]>();
    for (const s of this.spans) {
      const key = s.robot || "?";
      const row = rows.get(key) ?? [];
      row.push(s);
      rows.set(key, row);
    }
    return [...rows.entries()]
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([robot, spans]) => ({ robot, spans }));
  }
}
