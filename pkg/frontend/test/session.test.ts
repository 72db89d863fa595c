import { beforeEach, describe, expect, it } from "vitest";

import { Body, Envelope, decode, encode } from "../src/protocol.js";
import { Session } from "../src/session.js";

let counters: Record<string, number>;

function line(sender: string, ts: number, body: Body): string {
  const n = counters[sender] ?? 0;
  counters[sender] = n + 1;
  const env: Envelope = { id: `${sender}-${n}`, sender, ts, body };
  return encode(env);
}

beforeEach(() => {
  counters = {};
});

describe("pool view", () => {
  it("tracks advertise, pose, property and retract", () => {
    const s = new Session();
    s.handleLine(line("robbie", 0, {
      kind: "ADVERTISE", robot: "robbie",
      capabilities: [{ action: "goto", sig: [] }, { action: "load", sig: [] }],
      properties: { loaded: false },
    }));
    s.handleLine(line("robbie", 0, {
      kind: "POSE_UPDATE", robot: "robbie",
      pose: { x: 2, y: 3, theta: 0 }, battery: 0.9,
    }));
    const r = s.robots.get("robbie")!;
    expect(r.capabilities.map((c) => c.action)).toEqual(["goto", "load"]);
    expect(r.pose).toEqual({ x: 2, y: 3, theta: 0 });
    expect(r.battery).toBe(0.9);

    s.handleLine(line("robbie", 100, {
      kind: "PROPERTY_UPDATE", robot: "robbie", prop: "loaded", value: true,
    }));
    expect(s.robots.get("robbie")!.properties.loaded).toBe(true);

    s.handleLine(line("robbie", 200, {
      kind: "RETRACT", robot: "robbie", action: "load",
    }));
    expect(s.robots.get("robbie")!.capabilities.map((c) => c.action))
      .toEqual(["goto"]);

    s.handleLine(line("robbie", 300, { kind: "RETRACT", robot: "robbie" }));
    expect(s.robots.has("robbie")).toBe(false);
  });

  it("treats re-delivered ids as no-ops", () => {
    const s = new Session();
    const l = line("w", 10, { kind: "EVENT", name: "ping", args: [] });
    s.handleLine(l);
    s.handleLine(l);
    expect(s.events).toHaveLength(1);
  });
});

describe("timeline", () => {
  it("opens spans on start and closes them on terminal status", () => {
    const s = new Session();
    s.handleLine(line("svc", 1000, {
      kind: "START_ACTION", instanceId: "p0/a1#run", action: "load",
      args: [], robot: "robbie",
    }));
    expect(s.spans[0].status).toBe("running");
    expect(s.spans[0].endTs).toBeUndefined();

    // non-terminal progress does not close the span
    s.handleLine(line("robbie", 1100, {
      kind: "ACTION_STATUS", instanceId: "p0/a1#run", status: "running",
      detail: "",
    }));
    expect(s.spans[0].endTs).toBeUndefined();

    s.handleLine(line("robbie", 1800, {
      kind: "ACTION_STATUS", instanceId: "p0/a1#run", status: "succeeded",
      detail: "",
    }));
    expect(s.spans[0]).toMatchObject({
      robot: "robbie", action: "load", startTs: 1000, endTs: 1800,
      status: "succeeded",
    });
  });

  it("groups rows per robot, sorted by name", () => {
    const s = new Session();
    for (const [robot, iid] of [["zoe", "i1"], ["amy", "i2"], ["zoe", "i3"]]) {
      s.handleLine(line("svc", 0, {
        kind: "START_ACTION", instanceId: iid, action: "work",
        args: [], robot,
      }));
    }
    const rows = s.ganttRows();
    expect(rows.map((r) => r.robot)).toEqual(["amy", "zoe"]);
    expect(rows[1].spans).toHaveLength(2);
  });
});

describe("map state", () => {
  it("keeps the latest intended path per robot", () => {
    const s = new Session();
    s.handleLine(line("svc", 0, {
      kind: "GOTO_SET", epoch: 1, pathRef: "epoch1",
      entries: [{ robot: "robbie",
                  waypoints: [{ x: 1, y: 1 }, { x: 2, y: 2 }] }],
    }));
    s.handleLine(line("svc", 500, {
      kind: "GOTO_SET", epoch: 2, pathRef: "epoch2",
      entries: [{ robot: "robbie", waypoints: [{ x: 4, y: 4 }] }],
    }));
    expect(s.robots.get("robbie")!.path).toEqual([{ x: 4, y: 4 }]);
  });
});

describe("trace stream", () => {
  it("rebuilds the trace file from runtime trace events", () => {
    const s = new Session();
    const records = [
      '0\t1\tstatus\t{"state":"running"}',
      '100\t1\tletter\t{"x":[],"y":["a1"]}',
      '900\t1\tstatus\t{"state":"succeeded"}',
    ];
    for (const rec of records) {
      s.handleLine(line("runtime", 0, {
        kind: "EVENT", name: "trace", args: ["job1", rec],
      }));
    }
    expect(s.traceRecords("job1")).toEqual(records);
    expect(s.exportTrace("job1")).toBe(records.join("\n") + "\n");
    expect(s.events).toHaveLength(0);   // not shown as a world event
  });

  it("keeps trace events from non-runtime senders as world events", () => {
    const s = new Session();
    s.handleLine(line("world", 0, {
      kind: "EVENT", name: "trace", args: ["x"],
    }));
    expect(s.events).toHaveLength(1);
  });
});

describe("task handles and outbound control", () => {
  it("tracks task status incl. failure diagnostics", () => {
    const s = new Session();
    s.handleLine(line("runtime", 0, {
      kind: "TASK_STATUS", programId: "job1", state: "failed",
      detail: "line 1: unknown action 'mystery'",
    }));
    expect(s.tasks.get("job1")).toMatchObject({
      state: "failed", detail: expect.stringContaining("mystery"),
    });
  });

  it("emits well-formed control lines for interactions", () => {
    const sent: string[] = [];
    const s = new Session((l) => sent.push(l));
    s.submitProgram("task main() { pause 1s }", "job1");
    s.fireEvent("pickup", ["dock", "ward"]);
    s.setProperty("robbie", "loaded", true);
    s.advertiseRobot("helper", [{ action: "say", sig: [] }]);
    s.retractRobot("helper");
    s.cancelTask("job1");
    const kinds = sent.map((l) => decode(l).body.kind);
    expect(kinds).toEqual(["SUBMIT_PROGRAM", "EVENT", "PROPERTY_UPDATE",
                           "ADVERTISE", "RETRACT", "CANCEL_TASK"]);
    // ids are unique per sender
    expect(new Set(sent.map((l) => decode(l).id)).size).toBe(sent.length);
  });
});

describe("foreign traffic", () => {
  it("ignores undecodable lines instead of crashing", () => {
    const s = new Session();
    s.handleLine("not json at all");
    s.handleLine('{"v":1,"id":"a","sender":"s","ts":1,"kind":"TELEPORT"}');
    s.handleLine("");
    expect(s.robots.size).toBe(0);
  });
});
