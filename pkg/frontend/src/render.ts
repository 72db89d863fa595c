/**
 * Canvas rendering: 2D top-down map with robot markers, intended-path
 * polylines and named-location labels, plus a per-robot Gantt timeline
 * with status colors. Pure drawing; all state lives in the Session.
 */

import { Session, SpanStatus } from "./session.js";
import { MapView } from "./worldmap.js";

const ROBOT_COLORS = ["#3a86ff", "#2ec4b6", "#e76f51", "#ffbe0b",
                      "#b5179e", "#80ed99"];

const STATUS_COLORS: Record<SpanStatus, string> = {
  running: "#3a86ff",
  succeeded: "#2ec4b6",
  failed: "#e63946",
  terminated: "#8d99ae",
};

export function robotColor(index: number): string {
  return ROBOT_COLORS[index % ROBOT_COLORS.length];
}

export function drawMap(canvas: HTMLCanvasElement, session: Session,
                        map: MapView | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#0f141d";
  ctx.fillRect(0, 0, w, h);

  const worldW = map ? map.width * map.resolution : 10;
  const worldH = map ? map.height * map.resolution : 10;
  const scale = Math.min(w / worldW, h / worldH);
  const tx = (x: number) => x * scale;
  const ty = (y: number) => h - y * scale;     // world y is up

  if (map) {
    // walls
    ctx.fillStyle = "#343c4d";
    for (let cy = 0; cy < map.height; cy++) {
      for (let cx = 0; cx < map.width; cx++) {
        if (!map.occupied[cy][cx]) continue;
        ctx.fillRect(tx(cx * map.resolution),
                     ty((cy + 1) * map.resolution),
                     map.resolution * scale, map.resolution * scale);
      }
    }
    // named locations
    ctx.font = "12px sans-serif";
    for (const [name, loc] of Object.entries(map.locations)) {
      ctx.fillStyle = "#ffbe0b";
      ctx.beginPath();
      ctx.arc(tx(loc.x), ty(loc.y), 4, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = "#e8edf4";
      ctx.fillText(name, tx(loc.x) + 7, ty(loc.y) - 5);
    }
  }

  // grid every meter
  ctx.strokeStyle = "rgba(255,255,255,0.06)";
  ctx.lineWidth = 1;
  for (let gx = 0; gx <= worldW; gx++) {
    ctx.beginPath();
    ctx.moveTo(tx(gx), 0);
    ctx.lineTo(tx(gx), h);
    ctx.stroke();
  }
  for (let gy = 0; gy <= worldH; gy++) {
    ctx.beginPath();
    ctx.moveTo(0, ty(gy));
    ctx.lineTo(w, ty(gy));
    ctx.stroke();
  }

  let i = 0;
  for (const robot of session.robots.values()) {
    const color = robotColor(i++);
    // intended path polyline
    if (robot.pose && robot.path.length > 0) {
      ctx.strokeStyle = color;
      ctx.globalAlpha = 0.5;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(tx(robot.pose.x), ty(robot.pose.y));
      for (const wp of robot.path) ctx.lineTo(tx(wp.x), ty(wp.y));
      ctx.stroke();
      ctx.globalAlpha = 1;
    }
    // marker with heading tick
    if (robot.pose) {
      const { x, y, theta } = robot.pose;
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(tx(x), ty(y), 6, 0, Math.PI * 2);
      ctx.fill();
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(tx(x), ty(y));
      ctx.lineTo(tx(x + 0.35 * Math.cos(theta)),
                 ty(y + 0.35 * Math.sin(theta)));
      ctx.stroke();
      ctx.fillStyle = "#e8edf4";
      ctx.font = "12px sans-serif";
      ctx.fillText(robot.name, tx(x) + 8, ty(y) + 4);
    }
  }
}

export function drawTimeline(canvas: HTMLCanvasElement,
                             session: Session): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#0f141d";
  ctx.fillRect(0, 0, w, h);

  const rows = session.ganttRows();
  if (rows.length === 0) return;
  const t1 = Math.max(session.clockMs, 1);
  const labelW = 90;
  const rowH = Math.min(34, h / rows.length);
  const tx = (ts: number) => labelW + (ts / t1) * (w - labelW - 10);

  ctx.font = "12px sans-serif";
  rows.forEach((row, ri) => {
    const y = ri * rowH;
    ctx.fillStyle = "#9aa4b2";
    ctx.fillText(row.robot, 6, y + rowH / 2 + 4);
    ctx.strokeStyle = "rgba(255,255,255,0.08)";
    ctx.beginPath();
    ctx.moveTo(labelW, y + rowH);
    ctx.lineTo(w, y + rowH);
    ctx.stroke();
    for (const span of row.spans) {
      const x0 = tx(span.startTs);
      const x1 = tx(span.endTs ?? t1);
      ctx.fillStyle = STATUS_COLORS[span.status];
      ctx.fillRect(x0, y + 5, Math.max(x1 - x0, 2), rowH - 10);
      if (x1 - x0 > 40) {
        ctx.fillStyle = "#0f141d";
        ctx.fillText(span.action, x0 + 4, y + rowH / 2 + 4);
      }
    }
  });
}
