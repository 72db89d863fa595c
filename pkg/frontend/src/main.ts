/**
 * Browser entry point. Wires the Session to the bridge's event stream,
 * renders map and timeline at 10 Hz, and hooks up the interaction
 * panels (pool editing, program submission, events, properties).
 */

import { Session } from "./session.js";
import { drawMap, drawTimeline } from "./render.js";
import { MapView, parseMap } from "./worldmap.js";
import { CapabilityMsg, Value } from "./protocol.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const session = new Session((line) => {
  void fetch("/send", { method: "POST", body: line });
});

let map: MapView | null = null;
void fetch("/map").then((r) => r.text()).then((text) => {
  if (text.trim()) map = parseMap(text);
}).catch(() => { /* backdrop is optional */ });

// -- live stream ------------------------------------------------------------

const stream = new EventSource("/stream");
stream.onmessage = (ev) => session.handleLine(ev.data as string);
stream.addEventListener("bridge", (ev) => {
  session.banner = (ev as MessageEvent).data === "connected"
    ? null
    : "server unreachable, retrying";
});
stream.onerror = () => {
  session.banner = "bridge unreachable, retrying";
};

// -- interactions -----------------------------------------------------------

function parseValue(tok: string): Value {
  if (tok === "true") return true;
  if (tok === "false") return false;
  const n = Number(tok);
  return Number.isFinite(n) && tok.trim() !== "" ? n : tok;
}

let programN = 0;

($("submit") as HTMLButtonElement).onclick = () => {
  const source = ($("program") as HTMLTextAreaElement).value;
  const idBox = $("program-id") as HTMLInputElement;
  const pid = idBox.value.trim() || `ui-task-${programN++}`;
  idBox.value = "";
  session.submitProgram(source, pid);
};

($("cancel") as HTMLButtonElement).onclick = () => {
  const pid = ($("cancel-id") as HTMLInputElement).value.trim();
  if (pid) session.cancelTask(pid);
};

($("fire-event") as HTMLButtonElement).onclick = () => {
  const name = ($("event-name") as HTMLInputElement).value.trim();
  const args = ($("event-args") as HTMLInputElement).value
    .split(/\s+/).filter(Boolean).map(parseValue);
  if (name) session.fireEvent(name, args);
};

($("set-prop") as HTMLButtonElement).onclick = () => {
  const robot = ($("prop-robot") as HTMLInputElement).value.trim();
  const prop = ($("prop-name") as HTMLInputElement).value.trim();
  const value = parseValue(($("prop-value") as HTMLInputElement).value.trim());
  if (robot && prop) session.setProperty(robot, prop, value);
};

($("advertise") as HTMLButtonElement).onclick = () => {
  const name = ($("pool-name") as HTMLInputElement).value.trim();
  if (!name) return;
  // comma-separated action names; signatures stay empty for mock bots
  const caps: CapabilityMsg[] = ($("pool-caps") as HTMLInputElement).value
    .split(",").map((s) => s.trim()).filter(Boolean)
    .map((action) => ({ action, sig: [] }));
  session.advertiseRobot(name, caps);
};

($("retract") as HTMLButtonElement).onclick = () => {
  const name = ($("pool-name") as HTMLInputElement).value.trim();
  const action = ($("pool-caps") as HTMLInputElement).value.trim();
  if (name) session.retractRobot(name, action || undefined);
};

($("export") as HTMLButtonElement).onclick = () => {
  const pid = ($("export-id") as HTMLInputElement).value.trim();
  if (!pid) return;
  const blob = new Blob([session.exportTrace(pid)], { type: "text/plain" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `${pid}.trace`;
  a.click();
  URL.revokeObjectURL(a.href);
};

// -- render loop, 10 Hz ------------------------------------------------------

function renderTasks(): void {
  const rows = [...session.tasks.values()].map((t) =>
    `<tr><td>${t.programId}</td><td class="st-${t.state}">${t.state}</td>` +
    `<td>${t.detail}</td></tr>`).join("");
  $("tasks").innerHTML =
    `<tr><th>program</th><th>state</th><th>detail</th></tr>${rows}`;
}

function renderPool(): void {
  const rows = [...session.robots.values()].map((r) => {
    const caps = r.capabilities.map((c) => c.action).join(", ");
    const props = Object.entries(r.properties)
      .map(([k, v]) => `${k}=${JSON.stringify(v)}`).join(" ");
    const pose = r.pose
      ? `(${r.pose.x.toFixed(2)}, ${r.pose.y.toFixed(2)})` : "?";
    return `<tr><td>${r.name}</td><td>${caps}</td><td>${props}</td>` +
      `<td>${pose}</td></tr>`;
  }).join("");
  $("pool").innerHTML =
    `<tr><th>robot</th><th>capabilities</th><th>properties</th>` +
    `<th>pose</th></tr>${rows}`;
}

setInterval(() => {
  const banner = $("banner");
  banner.textContent = session.banner ?? "";
  banner.style.display = session.banner ? "block" : "none";
  drawMap($("map") as HTMLCanvasElement, session, map);
  drawTimeline($("timeline") as HTMLCanvasElement, session);
  renderTasks();
  renderPool();
  $("clock").textContent = `t = ${(session.clockMs / 1000).toFixed(1)} s`;
}, 100);
