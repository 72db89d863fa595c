"""Occupancy-grid world maps with named locations.

File format, one map per file:

    width height resolution
    <height rows of '.' (free) / '#' (occupied), width chars each>
    name x y theta        (zero or more named locations)

Row 0 of the text is the top of the map; world coordinates put y=0 at
the bottom, so row r maps to cell_y = height-1-r. A cell's world
position is its center.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from ..errors import ReshError

Cell = Tuple[int, int]


@dataclass
class WorldMap:
    width: int
    height: int
    resolution: float                      # meters per cell
    occupied: List[List[bool]]             # [y][x], y up
    locations: Dict[str, Tuple[float, float, float]] = field(default_factory=dict)

    # -- geometry -----------------------------------------------------------

    def in_bounds(self, c: Cell) -> bool:
        x, y = c
        return 0 <= x < self.width and 0 <= y < self.height

    def free(self, c: Cell) -> bool:
        return self.in_bounds(c) and not self.occupied[c[1]][c[0]]

    def cell_of(self, x: float, y: float) -> Cell:
        return (int(x / self.resolution), int(y / self.resolution))

    def center(self, c: Cell) -> Tuple[float, float]:
        return ((c[0] + 0.5) * self.resolution, (c[1] + 0.5) * self.resolution)

    def line_of_sight(self, a: Cell, b: Cell) -> bool:
        """True when the segment between cell centers crosses only free cells."""
        for c in supercover(a, b):
            if not self.free(c):
                return False
        return True

    def location(self, name: str) -> Tuple[float, float, float]:
        if name not in self.locations:
            raise ReshError(f"unknown location {name!r}")
        return self.locations[name]

    # -- serialization ------------------------------------------------------

    def dump(self) -> str:
        lines = [f"{self.width} {self.height} {self.resolution:g}"]
        for r in range(self.height):
            y = self.height - 1 - r
            lines.append("".join("#" if self.occupied[y][x] else "."
                                 for x in range(self.width)))
        for name in sorted(self.locations):
            x, y, th = self.locations[name]
            lines.append(f"{name} {x:g} {y:g} {th:g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "WorldMap":
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines:
            raise ReshError("empty map file")
        try:
            w, h, res = lines[0].split()
            w, h, res = int(w), int(h), float(res)
        except ValueError:
            raise ReshError(f"bad map header {lines[0]!r}")
        if w < 1 or h < 1 or len(lines) < 1 + h:
            raise ReshError("map smaller than header claims")
        occupied = [[False] * w for _ in range(h)]
        for r in range(h):
            row = lines[1 + r]
            if len(row) != w:
                raise ReshError(f"map row {r} has length {len(row)}, want {w}")
            y = h - 1 - r
            for x, ch in enumerate(row):
                if ch == "#":
                    occupied[y][x] = True
                elif ch != ".":
                    raise ReshError(f"bad map cell {ch!r}")
        locations: Dict[str, Tuple[float, float, float]] = {}
        m = cls(w, h, res, occupied, locations)
        for line in lines[1 + h:]:
            parts = line.split()
            if len(parts) != 4:
                raise ReshError(f"bad location line {line!r}")
            name, x, y, th = parts[0], float(parts[1]), float(parts[2]), float(parts[3])
            if not m.free(m.cell_of(x, y)):
                raise ReshError(f"location {name!r} is not in a free cell")
            locations[name] = (x, y, th)
        return m

    @classmethod
    def load(cls, path) -> "WorldMap":
        with open(path) as f:
            return cls.parse(f.read())

    @classmethod
    def empty(cls, width: int, height: int, resolution: float = 0.25) -> "WorldMap":
        return cls(width, height, resolution,
                   [[False] * width for _ in range(height)])


def supercover(a: Cell, b: Cell):
    """Cells the segment between the centers of a and b passes through.

    Dense sampling at a tenth of a cell; slightly conservative at exact
    corner clips, which is the safe direction for line-of-sight checks.
    """
    (x0, y0), (x1, y1) = a, b
    steps = max(abs(x1 - x0), abs(y1 - y0)) * 10
    seen = set()
    for i in range(steps + 1):
        t = i / steps if steps else 0.0
        cx = int(x0 + 0.5 + (x1 - x0) * t)
        cy = int(y0 + 0.5 + (y1 - y0) * t)
        if (cx, cy) not in seen:
            seen.add((cx, cy))
            yield (cx, cy)


def random_map(seed: int, width: int = 20, height: int = 20,
               resolution: float = 0.25, fill: float = 0.15) -> WorldMap:
    """Random obstacle map whose free cells form one connected region."""
    rng = random.Random(seed)
    m = WorldMap.empty(width, height, resolution)
    for y in range(height):
        for x in range(width):
            if rng.random() < fill:
                m.occupied[y][x] = True
    # keep the largest connected free component, fill in the rest
    best: set = set()
    seen: set = set()
    for y in range(height):
        for x in range(width):
            if m.occupied[y][x] or (x, y) in seen:
                continue
            comp = {(x, y)}
            frontier = [(x, y)]
            while frontier:
                cx, cy = frontier.pop()
                for nx, ny in ((cx+1, cy), (cx-1, cy), (cx, cy+1), (cx, cy-1)):
                    if m.free((nx, ny)) and (nx, ny) not in comp:
                        comp.add((nx, ny))
                        frontier.append((nx, ny))
            seen |= comp
            if len(comp) > len(best):
                best = comp
    for y in range(height):
        for x in range(width):
            if not m.occupied[y][x] and (x, y) not in best:
                m.occupied[y][x] = True
    return m
