import { describe, expect, it } from "vitest";

import { parseMap } from "../src/worldmap.js";

const TEXT = [
  "4 3 0.5",
  "....",
  ".##.",
  "....",
  "dock 0.25 0.25 0",
  "ward 1.75 1.25 1.57",
].join("\n");

describe("map parsing for display", () => {
  it("reads header, grid and locations", () => {
    const m = parseMap(TEXT);
    expect([m.width, m.height, m.resolution]).toEqual([4, 3, 0.5]);
    // text row 1 is the middle row; world y counts up from the bottom
    expect(m.occupied[1]).toEqual([false, true, true, false]);
    expect(m.occupied[0]).toEqual([false, false, false, false]);
    expect(m.locations.ward).toEqual({ x: 1.75, y: 1.25, theta: 1.57 });
  });

  it("rejects malformed maps", () => {
    expect(() => parseMap("")).toThrow();
    expect(() => parseMap("nonsense")).toThrow();
    expect(() => parseMap("4 3 0.5\n..\n")).toThrow();
  });
});
