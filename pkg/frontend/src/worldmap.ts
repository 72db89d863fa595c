/**
 * Display-side parser for the map file format: a header line
 * "width height resolution", then height rows of '.'/'#' (top row
 * first), then optional "name x y theta" location lines. Used only to
 * draw the backdrop; all motion shown on it comes from the server.
 */

export interface MapView {
  width: number;
  height: number;
  resolution: number;
  occupied: boolean[][];        // [y][x], y up
  locations: Record<string, { x: number; y: number; theta: number }>;
}

export function parseMap(text: string): MapView {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0) throw new Error("empty map");
  const [w, h, res] = lines[0].trim().split(/\s+/).map(Number);
  if (!Number.isInteger(w) || !Number.isInteger(h) || !(res > 0)) {
    throw new Error(`bad map header: ${lines[0]}`);
  }
  if (lines.length < 1 + h) throw new Error("map rows missing");
  const occupied: boolean[][] = [];
  for (let y = 0; y < h; y++) {
    // row 0 of the text is the top of the map
    const row = lines[1 + (h - 1 - y)].trim();
    if (row.length !== w) throw new Error(`map row has width ${row.length}`);
    occupied.push([...row].map((c) => c === "#"));
  }
  const locations: MapView["locations"] = {};
  for (const line of lines.slice(1 + h)) {
    const parts = line.trim().split(/\s+/);
    if (parts.length < 3) throw new Error(`bad location line: ${line}`);
    locations[parts[0]] = {
      x: Number(parts[1]), y: Number(parts[2]), theta: Number(parts[3] ?? 0),
    };
  }
  return { width: w, height: h, resolution: res, occupied, locations };
}
