/**
 * Wire codec for orchestration traffic.
 *
 * Mirrors the runtime's canonical newline-framed JSON encoding exactly:
 * fixed key order, no whitespace, durations as {"ms": n}, and float
 * formatting that keeps integral coordinates as "2.0" so lines are
 * byte-identical with the server encoder. Decoding is tolerant of
 * unknown fields; unknown kinds or versions throw DecodeError.
 */

export const PROTOCOL_VERSION = 1;

export type ActStatus =
  | "accepted" | "running" | "succeeded" | "failed" | "terminated";

export type TaskState =
  | "accepted" | "running" | "succeeded" | "failed" | "cancelled";

export interface DurationValue { ms: number }
export type Value = string | number | boolean | DurationValue;

export interface Pose { x: number; y: number; theta: number }

export interface CapabilityMsg {
  action: string;
  sig: string[];
  typicalDurationMs?: number;
}

export interface WaypointMsg { x: number; y: number; delayMs?: number }

export interface GotoEntry { robot: string; waypoints: WaypointMsg[] }

export type Body =
  | { kind: "ADVERTISE"; robot: string; capabilities: CapabilityMsg[];
      properties: Record<string, Value> }
  | { kind: "RETRACT"; robot: string; action?: string }
  | { kind: "PROPERTY_UPDATE"; robot: string; prop: string; value: Value }
  | { kind: "POSE_UPDATE"; robot: string; pose: Pose; battery: number }
  | { kind: "START_ACTION"; instanceId: string; action: string;
      args: Value[]; robot: string }
  | { kind: "CANCEL_ACTION"; instanceId: string }
  | { kind: "ACTION_STATUS"; instanceId: string; status: ActStatus;
      detail: string }
  | { kind: "GOTO_SET"; epoch: number; entries: GotoEntry[]; pathRef: string }
  | { kind: "EVENT"; name: string; args: Value[] }
  | { kind: "SUBMIT_PROGRAM"; source: string; programId: string }
  | { kind: "TASK_STATUS"; programId: string; state: TaskState;
      detail: string }
  | { kind: "CANCEL_TASK"; programId: string };

export type Kind = Body["kind"];

export interface Envelope {
  id: string;
  sender: string;
  ts: number;
  body: Body;
}

export class DecodeError extends Error {
  constructor(reason: string, public raw = "") {
    super(reason);
    this.name = "DecodeError";
  }
}

export function isDuration(v: Value): v is DurationValue {
  return typeof v === "object" && v !== null;
}

// ---------------------------------------------------------------------------
// encoding

const jstr = JSON.stringify;

// integral floats print as "2.0" to match the server's float repr
function fnum(n: number): string {
  return Number.isInteger(n) ? `${n}.0` : jstr(n);
}

function jval(v: Value): string {
  return isDuration(v) ? `{"ms":${v.ms}}` : jstr(v);
}

function jargs(args: Value[]): string {
  return `[${args.map(jval).join(",")}]`;
}

function jcap(c: CapabilityMsg): string {
  let out = `{"action":${jstr(c.action)},"sig":${jstr(c.sig)}`;
  if (c.typicalDurationMs !== undefined) {
    out += `,"typicalDurationMs":${c.typicalDurationMs}`;
  }
  return out + "}";
}

function jprops(p: Record<string, Value>): string {
  const keys = Object.keys(p).sort();
  return `{${keys.map((k) => `${jstr(k)}:${jval(p[k])}`).join(",")}}`;
}

function jpose(p: Pose): string {
  return `{"x":${fnum(p.x)},"y":${fnum(p.y)},"theta":${fnum(p.theta)}}`;
}

function jwp(w: WaypointMsg): string {
  let out = `{"x":${fnum(w.x)},"y":${fnum(w.y)}`;
  if (w.delayMs) out += `,"delayMs":${w.delayMs}`;
  return out + "}";
}

function bodyFields(b: Body): string {
  switch (b.kind) {
    case "ADVERTISE":
      return `"robot":${jstr(b.robot)},"capabilities":[${
        b.capabilities.map(jcap).join(",")}],"properties":${jprops(b.properties)}`;
    case "RETRACT":
      return `"robot":${jstr(b.robot)}` +
        (b.action !== undefined ? `,"action":${jstr(b.action)}` : "");
    case "PROPERTY_UPDATE":
      return `"robot":${jstr(b.robot)},"prop":${jstr(b.prop)},"value":${jval(b.value)}`;
    case "POSE_UPDATE":
      return `"robot":${jstr(b.robot)},"pose":${jpose(b.pose)},"battery":${fnum(b.battery)}`;
    case "START_ACTION":
      return `"instanceId":${jstr(b.instanceId)},"action":${jstr(b.action)}` +
        `,"args":${jargs(b.args)},"robot":${jstr(b.robot)}`;
    case "CANCEL_ACTION":
      return `"instanceId":${jstr(b.instanceId)}`;
    case "ACTION_STATUS":
      return `"instanceId":${jstr(b.instanceId)},"status":${jstr(b.status)}` +
        (b.detail ? `,"detail":${jstr(b.detail)}` : "");
    case "GOTO_SET":
      return `"epoch":${b.epoch},"entries":[${b.entries.map((e) =>
        `{"robot":${jstr(e.robot)},"waypoints":[${e.waypoints.map(jwp).join(",")}]}`
      ).join(",")}],"pathRef":${jstr(b.pathRef)}`;
    case "EVENT":
      return `"name":${jstr(b.name)},"args":${jargs(b.args)}`;
    case "SUBMIT_PROGRAM":
      return `"source":${jstr(b.source)},"programId":${jstr(b.programId)}`;
    case "TASK_STATUS":
      return `"programId":${jstr(b.programId)},"state":${jstr(b.state)}` +
        (b.detail ? `,"detail":${jstr(b.detail)}` : "");
    case "CANCEL_TASK":
      return `"programId":${jstr(b.programId)}`;
  }
}

/** One canonical wire line, newline terminated. */
export function encode(m: Envelope): string {
  return `{"v":${PROTOCOL_VERSION},"id":${jstr(m.id)},"sender":${jstr(m.sender)}` +
    `,"ts":${m.ts},"kind":${jstr(m.body.kind)},${bodyFields(m.body)}}\n`;
}

// ---------------------------------------------------------------------------
// decoding

function req(o: Record<string, unknown>, key: string): unknown {
  if (!(key in o)) throw new DecodeError(`missing field '${key}'`);
  return o[key];
}

function str(v: unknown, what: string): string {
  if (typeof v !== "string") throw new DecodeError(`bad ${what}: ${jstr(v)}`);
  return v;
}

function int(v: unknown, what: string): number {
  if (typeof v !== "number" || !Number.isInteger(v)) {
    throw new DecodeError(`bad ${what}: ${jstr(v)}`);
  }
  return v;
}

function num(v: unknown, what: string): number {
  if (typeof v !== "number") throw new DecodeError(`bad ${what}: ${jstr(v)}`);
  return v;
}

function decValue(v: unknown): Value {
  if (v !== null && typeof v === "object" && !Array.isArray(v)) {
    const o = v as Record<string, unknown>;
    const keys = Object.keys(o);
    if (keys.length === 1 && keys[0] === "ms" && Number.isInteger(o.ms)) {
      return { ms: o.ms as number };
    }
    throw new DecodeError(`bad value object ${jstr(v)}`);
  }
  if (typeof v === "string" || typeof v === "number" || typeof v === "boolean") {
    return v;
  }
  throw new DecodeError(`bad value ${jstr(v)}`);
}

function decValues(v: unknown): Value[] {
  return ((v as unknown[]) ?? []).map(decValue);
}

function decPose(v: unknown): Pose {
  const o = v as Record<string, unknown>;
  return { x: num(o?.x, "pose.x"), y: num(o?.y, "pose.y"),
           theta: num(o?.theta, "pose.theta") };
}

function decCap(v: unknown): CapabilityMsg {
  const o = v as Record<string, unknown>;
  const sig = (req(o, "sig") as unknown[]).map((s) => str(s, "sig entry"));
  const cap: CapabilityMsg = { action: str(req(o, "action"), "action"), sig };
  if (o.typicalDurationMs !== undefined) {
    cap.typicalDurationMs = int(o.typicalDurationMs, "typicalDurationMs");
  }
  return cap;
}

function decWp(v: unknown): WaypointMsg {
  const o = v as Record<string, unknown>;
  const wp: WaypointMsg = { x: num(req(o, "x"), "waypoint.x"),
                            y: num(req(o, "y"), "waypoint.y") };
  if (o.delayMs) wp.delayMs = int(o.delayMs, "delayMs");
  return wp;
}

const ACT_STATUSES: ActStatus[] =
  ["accepted", "running", "succeeded", "failed", "terminated"];
const TASK_STATES: TaskState[] =
  ["accepted", "running", "succeeded", "failed", "cancelled"];

function decBody(kind: string, o: Record<string, unknown>): Body {
  switch (kind) {
    case "ADVERTISE": {
      const props: Record<string, Value> = {};
      for (const [k, v] of Object.entries(
        (o.properties as Record<string, unknown>) ?? {})) {
        props[k] = decValue(v);
      }
      return { kind, robot: str(req(o, "robot"), "robot"),
               capabilities: ((o.capabilities as unknown[]) ?? []).map(decCap),
               properties: props };
    }
    case "RETRACT": {
      const b: { kind: "RETRACT"; robot: string; action?: string } =
        { kind, robot: str(req(o, "robot"), "robot") };
      if (o.action !== undefined && o.action !== null) {
        b.action = str(o.action, "action");
      }
      return b;
    }
    case "PROPERTY_UPDATE":
      return { kind, robot: str(req(o, "robot"), "robot"),
               prop: str(req(o, "prop"), "prop"),
               value: decValue(req(o, "value")) };
    case "POSE_UPDATE":
      return { kind, robot: str(req(o, "robot"), "robot"),
               pose: decPose(req(o, "pose")),
               battery: num(req(o, "battery"), "battery") };
    case "START_ACTION":
      return { kind, instanceId: str(req(o, "instanceId"), "instanceId"),
               action: str(req(o, "action"), "action"),
               args: decValues(o.args),
               robot: typeof o.robot === "string" ? o.robot : "" };
    case "CANCEL_ACTION":
      return { kind, instanceId: str(req(o, "instanceId"), "instanceId") };
    case "ACTION_STATUS": {
      const status = str(req(o, "status"), "status") as ActStatus;
      if (!ACT_STATUSES.includes(status)) {
        throw new DecodeError(`bad status '${status}'`);
      }
      return { kind, instanceId: str(req(o, "instanceId"), "instanceId"),
               status, detail: typeof o.detail === "string" ? o.detail : "" };
    }
    case "GOTO_SET":
      return { kind, epoch: int(req(o, "epoch"), "epoch"),
               entries: ((o.entries as unknown[]) ?? []).map((e) => {
                 const eo = e as Record<string, unknown>;
                 return { robot: str(req(eo, "robot"), "robot"),
                          waypoints: (req(eo, "waypoints") as unknown[]).map(decWp) };
               }),
               pathRef: typeof o.pathRef === "string" ? o.pathRef : "" };
    case "EVENT":
      return { kind, name: str(req(o, "name"), "name"), args: decValues(o.args) };
    case "SUBMIT_PROGRAM":
      return { kind, source: str(req(o, "source"), "source"),
               programId: str(req(o, "programId"), "programId") };
    case "TASK_STATUS": {
      const state = str(req(o, "state"), "state") as TaskState;
      if (!TASK_STATES.includes(state)) {
        throw new DecodeError(`bad state '${state}'`);
      }
      return { kind, programId: str(req(o, "programId"), "programId"), state,
               detail: typeof o.detail === "string" ? o.detail : "" };
    }
    case "CANCEL_TASK":
      return { kind, programId: str(req(o, "programId"), "programId") };
    default:
      throw new DecodeError(`unknown kind '${kind}'`);
  }
}

export function decode(line: string): Envelope {
  const raw = line.replace(/\n$/, "");
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch (e) {
    throw new DecodeError(`bad json: ${(e as Error).message}`, raw);
  }
  if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
    throw new DecodeError("message is not an object", raw);
  }
  const o = obj as Record<string, unknown>;
  if (o.v !== PROTOCOL_VERSION) {
    throw new DecodeError(`unsupported protocol version ${jstr(o.v)}`, raw);
  }
  try {
    return {
      id: String(req(o, "id")),
      sender: String(req(o, "sender")),
      ts: int(req(o, "ts"), "ts"),
      body: decBody(str(req(o, "kind"), "kind"), o),
    };
  } catch (e) {
    if (e instanceof DecodeError) throw new DecodeError(e.message, raw);
    throw e;
  }
}
