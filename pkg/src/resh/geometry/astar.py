"""8-connected grid A* with an octile heuristic."""

from __future__ import annotations

import heapq
import math
from typing import Dict, List, Optional, Tuple

from ..errors import NoPath
from .worldmap import Cell, WorldMap

SQRT2 = math.sqrt(2.0)

NEIGHBORS = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2))


def octile(a: Cell, b: Cell) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def moves(m: WorldMap, c: Cell):
    """Legal 8-connected moves; diagonals may not cut blocked corners."""
    x, y = c
    for dx, dy, cost in NEIGHBORS:
        n = (x + dx, y + dy)
        if not m.free(n):
            continue
        if dx and dy and not (m.free((x + dx, y)) and m.free((x, y + dy))):
            continue
        yield n, cost


def astar(m: WorldMap, start: Cell, goal: Cell, robot: str = "?") -> List[Cell]:
    """Shortest cell path from start to goal, inclusive; raises NoPath."""
    if not m.free(start) or not m.free(goal):
        raise NoPath(robot)
    if start == goal:
        return [start]
    open_q: List[Tuple[float, float, Cell]] = [(octile(start, goal), 0.0, start)]
    g: Dict[Cell, float] = {start: 0.0}
    came: Dict[Cell, Cell] = {}
    closed = set()
    while open_q:
        _, gc, c = heapq.heappop(open_q)
        if c in closed:
            continue
        if c == goal:
            path = [c]
            while c in came:
                c = came[c]
                path.append(c)
            path.reverse()
            return path
        closed.add(c)
        for n, cost in moves(m, c):
            ng = gc + cost
            if ng < g.get(n, math.inf):
                g[n] = ng
                came[n] = c
                heapq.heappush(open_q, (ng + octile(n, goal), ng, n))
    raise NoPath(robot)


def path_length(m: WorldMap, path: List[Cell]) -> float:
    """Length of a cell path in meters."""
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return total * m.resolution


def shortest_length(m: WorldMap, start: Cell, goal: Cell, robot: str = "?") -> float:
    return path_length(m, astar(m, start, goal, robot))
