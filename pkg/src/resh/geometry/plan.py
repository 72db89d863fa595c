"""Multi-robot path planning: sparse waypoints with inserted delays.

Prioritized planning: robots are ordered by descending single-robot
shortest-path length (long movers get right-of-way) and planned one at a
time with a space-time A* that treats already-planned trajectories as
moving obstacles. Wait steps become hold delays at waypoints; runs of
cells are simplified to sparse line-of-sight waypoints. The final
continuous-motion trajectories are validated for pairwise separation and
repaired with extra delays when quantization let a conflict slip in.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import NoPath
from .astar import SQRT2, astar, moves, octile, path_length
from .worldmap import Cell, WorldMap

DT = 0.5                 # space-time discretization, seconds
MARGIN = 0.1             # added to summed radii for minimum separation, meters
STRETCH = 1.5            # per-robot path length bound vs its own shortest path


@dataclass(frozen=True)
class RobotSpec:
    name: str
    start: Tuple[float, float]
    goal: Tuple[float, float]
    radius: float = 0.15
    speed: float = 1.0           # m/s


@dataclass(frozen=True)
class PlannedPath:
    robot: str
    waypoints: Tuple[Tuple[float, float, float], ...]   # (x, y, holdSeconds)
    total_estimate: float                               # finish time, seconds

    def position(self, t: float) -> Tuple[float, float]:
        return sample_position(self.waypoints, self.speed_hint, t)

    # speed used for sampling; set by the planner
    speed_hint: float = 1.0


@dataclass
class MultipathSolution:
    paths: Dict[str, PlannedPath] = field(default_factory=dict)

    def finish_time(self) -> float:
        return max((p.total_estimate for p in self.paths.values()), default=0.0)


def sample_position(waypoints: Sequence[Tuple[float, float, float]],
                    speed: float, t: float) -> Tuple[float, float]:
    """Nominal position at time t: hold each waypoint's delay, then move."""
    if not waypoints:
        return (0.0, 0.0)
    clock = 0.0
    x, y, _ = waypoints[0]
    for i, (wx, wy, hold) in enumerate(waypoints):
        clock += hold
        if t <= clock:
            return (wx, wy)
        if i + 1 == len(waypoints):
            return (wx, wy)
        nx, ny, _ = waypoints[i + 1]
        dist = math.hypot(nx - wx, ny - wy)
        dur = dist / speed if speed > 0 else 0.0
        if t <= clock + dur:
            f = (t - clock) / dur if dur else 1.0
            return (wx + (nx - wx) * f, wy + (ny - wy) * f)
        clock += dur
    return (waypoints[-1][0], waypoints[-1][1])


def finish_time_of(waypoints: Sequence[Tuple[float, float, float]], speed: float) -> float:
    clock = 0.0
    for i, (wx, wy, hold) in enumerate(waypoints):
        clock += hold
        if i + 1 < len(waypoints):
            nx, ny, _ = waypoints[i + 1]
            clock += math.hypot(nx - wx, ny - wy) / speed
    return clock


def min_separation(a: PlannedPath, b: PlannedPath, horizon: float,
                   step: float = DT / 2) -> float:
    """Smallest sampled distance between two planned trajectories."""
    best = math.inf
    t = 0.0
    while t <= horizon + step:
        ax, ay = a.position(t)
        bx, by = b.position(t)
        best = min(best, math.hypot(ax - bx, ay - by))
        t += step
    return best


# ---------------------------------------------------------------------------

class _Reservations:
    """Sampled positions of already-planned robots."""

    def __init__(self):
        self.entries: List[Tuple[PlannedPath, float]] = []   # (path, radius)

    def add(self, path: PlannedPath, radius: float):
        self.entries.append((path, radius))

    def clear_at(self, x: float, y: float, t: float, radius: float) -> bool:
        for path, r in self.entries:
            px, py = path.position(t)
            if math.hypot(px - x, py - y) < radius + r + MARGIN:
                return False
        return True

    def move_clear(self, m: WorldMap, c1: Cell, c2: Cell, t1: float, t2: float,
                   radius: float) -> bool:
        x1, y1 = m.center(c1)
        x2, y2 = m.center(c2)
        steps = max(1, int(math.ceil((t2 - t1) / (DT / 2))))
        for i in range(steps + 1):
            f = i / steps
            t = t1 + (t2 - t1) * f
            if not self.clear_at(x1 + (x2 - x1) * f, y1 + (y2 - y1) * f, t, radius):
                return False
        return True


def _space_time_path(m: WorldMap, spec: RobotSpec, res: _Reservations,
                     horizon: float, delay_buckets: int = 0) -> List[Tuple[Cell, float]]:
    """Timed cell path (cell, departure-aligned time) honoring reservations.

    delay_buckets forces the robot to sit at its start that long before
    moving; the caller uses it to let a higher-priority robot yield when a
    later one cannot find any path otherwise.
    """
    start = m.cell_of(*spec.start)
    goal = m.cell_of(*spec.goal)
    base = astar(m, start, goal, spec.name)         # also validates reachability
    limit = STRETCH * path_length(m, base) + 1e-9

    # state: (cell, time bucket); time = bucket * DT
    start_state = (start, delay_buckets)
    gshort: Dict[Tuple[Cell, int], float] = {start_state: 0.0}
    came: Dict[Tuple[Cell, int], Tuple[Cell, int]] = {}
    hscale = 1.0 / spec.speed
    open_q = [(delay_buckets * DT + octile(start, goal) * m.resolution * hscale,
               0, start_state)]
    max_bucket = int(horizon / DT) + 2
    counter = 0
    closed = set()
    while open_q:
        _, _, state = heapq.heappop(open_q)
        if state in closed:
            continue
        closed.add(state)
        cell, k = state
        t = k * DT
        if cell == goal and _parkable(m, res, cell, t, spec.radius, horizon):
            out = [state]
            while state in came:
                state = came[state]
                out.append(state)
            out.reverse()
            # forced start delay shows up as wait steps so it becomes dwell
            prefix = [(start, kk) for kk in range(delay_buckets)]
            return [(c, kk * DT) for c, kk in prefix + out]
        if k >= max_bucket:
            continue
        length = gshort[state]
        # wait in place one bucket
        wstate = (cell, k + 1)
        x, y = m.center(cell)
        if res.clear_at(x, y, (k + 1) * DT, spec.radius) and \
                length < gshort.get(wstate, math.inf) - 1e-12:
            gshort[wstate] = length
            came[wstate] = state
            counter += 1
            prio = (k + 1) * DT + octile(cell, goal) * m.resolution * hscale
            heapq.heappush(open_q, (prio, counter, wstate))
        # move to a neighbor; motion rounded up to whole buckets
        for n, cost in moves(m, cell):
            dlen = cost * m.resolution
            if length + dlen > limit:
                continue
            dur = dlen / spec.speed
            k2 = k + max(1, int(math.ceil(dur / DT - 1e-9)))
            nstate = (n, k2)
            if length + dlen >= gshort.get(nstate, math.inf) - 1e-12:
                continue
            if not res.move_clear(m, cell, n, t, k2 * DT, spec.radius):
                continue
            gshort[nstate] = length + dlen
            came[nstate] = state
            counter += 1
            prio = k2 * DT + octile(n, goal) * m.resolution * hscale
            heapq.heappush(open_q, (prio, counter, nstate))
    raise NoPath(spec.name)


def _parkable(m: WorldMap, res: _Reservations, cell: Cell, t: float,
              radius: float, horizon: float) -> bool:
    x, y = m.center(cell)
    tt = t
    while tt <= horizon + DT:
        if not res.clear_at(x, y, tt, radius):
            return False
        tt += DT
    return True


def _to_waypoints(m: WorldMap, spec: RobotSpec,
                  timed: List[Tuple[Cell, float]]) -> List[Tuple[float, float, float]]:
    """Collapse a timed cell path into waypoints with hold delays.

    Only explicit wait steps become dwell time; the slack that bucket
    rounding added to plain moves is discarded (the separation check on
    the continuous trajectories runs afterwards and re-adds delay where
    it is actually needed).
    """
    pts: List[Tuple[float, float, float]] = []   # (x, y, dwellSeconds)
    i = 0
    while i < len(timed):
        cell, _ = timed[i]
        j = i
        while j + 1 < len(timed) and timed[j + 1][0] == cell:
            j += 1
        pts.append((*m.center(cell), DT * (j - i)))
        i = j + 1
    # merge collinear interior points with no dwell
    out = [pts[0]]
    for k in range(1, len(pts) - 1):
        px, py, _ = out[-1]
        cx, cy, dwell = pts[k]
        nx, ny, _ = pts[k + 1]
        collinear = abs((cx - px) * (ny - py) - (cy - py) * (nx - px)) < 1e-9
        if collinear and dwell == 0.0 and m.line_of_sight(m.cell_of(px, py),
                                                          m.cell_of(nx, ny)):
            continue
        out.append(pts[k])
    if len(pts) > 1:
        x, y, _ = pts[-1]
        out.append((x, y, 0.0))
    return out


def _try_thin(m: WorldMap, spec: RobotSpec, wps: List[Tuple[float, float, float]],
              keep_valid) -> List[Tuple[float, float, float]]:
    """Opportunistically drop interior waypoints while plans stay valid."""
    k = 1
    while k < len(wps) - 1:
        if wps[k][2] > 1e-9:
            k += 1
            continue
        cand = wps[:k] + wps[k + 1:]
        a = m.cell_of(wps[k - 1][0], wps[k - 1][1])
        b = m.cell_of(wps[k + 1][0], wps[k + 1][1])
        if m.line_of_sight(a, b) and keep_valid(cand):
            wps = cand
        else:
            k += 1
    return wps


def plan(m: WorldMap, specs: Sequence[RobotSpec]) -> MultipathSolution:
    """Plan all robots jointly; raises NoPath naming the robot that failed."""
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate robot in path problem")
    base_len: Dict[str, float] = {}
    for s in specs:
        base_len[s.name] = path_length(
            m, astar(m, m.cell_of(*s.start), m.cell_of(*s.goal), s.name))
    order = sorted(specs, key=lambda s: (-base_len[s.name], s.name))
    horizon = sum(STRETCH * base_len[s.name] / s.speed for s in specs) + \
        10.0 + DT * 4 * len(specs)

    # Prioritized planning can paint itself into a corner: a robot planned
    # early takes its solo-optimal line and leaves no room for a later one.
    # On failure, force a start delay on the robots planned before the
    # failed one (round-robin, growing) and replan from scratch.
    delays = {s.name: 0 for s in specs}
    bump_at = 0
    for _ in range(40):
        try:
            return _plan_once(m, order, horizon, delays)
        except NoPath as e:
            failed = next(i for i, s in enumerate(order) if s.name == e.robot)
            if failed == 0:
                raise
            victim = order[bump_at % failed]
            delays[victim.name] += 4          # two seconds of patience
            bump_at += 1
            horizon += 4 * DT
    raise NoPath(order[-1].name)


def _plan_once(m: WorldMap, order: Sequence[RobotSpec], horizon: float,
               delays: Dict[str, int]) -> MultipathSolution:
    res = _Reservations()
    sol = MultipathSolution()
    for spec in order:
        timed = _space_time_path(m, spec, res, horizon, delays[spec.name])
        wps = _to_waypoints(m, spec, timed)

        def valid(candidate, spec=spec):
            pp = PlannedPath(spec.name, tuple(candidate),
                             finish_time_of(candidate, spec.speed), spec.speed)
            for other, r in res.entries:
                if min_separation(pp, other, horizon) < spec.radius + r + MARGIN:
                    return False
            return True

        wps = _try_thin(m, spec, wps, valid)
        # quantization insurance: if the continuous path still grazes a
        # higher-priority robot, shift the start later until it clears
        for _ in range(200):
            if valid(wps):
                break
            x, y, hold = wps[0]
            wps = [(x, y, hold + DT)] + wps[1:]
        else:
            raise NoPath(spec.name)
        path = PlannedPath(spec.name, tuple(wps),
                           finish_time_of(wps, spec.speed), spec.speed)
        sol.paths[spec.name] = path
        res.add(path, spec.radius)
    return sol


def estimate(m: WorldMap, start: Tuple[float, float], goal: Tuple[float, float],
             speed: float = 1.0, robot: str = "?") -> float:
    """Single-robot travel time estimate in seconds, ignoring other robots."""
    return path_length(m, astar(m, m.cell_of(*start), m.cell_of(*goal), robot)) / speed
