"""Conformance tracking of actual robot poses against intended polylines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

DEFAULT_TOLERANCE = 0.5   # meters of allowed lateral deviation


def point_segment_distance(px: float, py: float,
                           ax: float, ay: float, bx: float, by: float) -> float:
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


@dataclass
class _Tracked:
    polyline: List[Tuple[float, float]]
    tolerance: float
    progress: int = 0          # index of the segment the robot is on


class ConformanceTracker:
    """Watches pose updates of moving robots; flags divergent movements.

    Progress along the polyline is monotone: the robot is matched against
    its current segment and any later one, never an earlier one, so
    doubling back past a corner still counts as deviation.
    """

    def __init__(self, tolerance: float = DEFAULT_TOLERANCE):
        self.tolerance = tolerance
        self._active: Dict[str, _Tracked] = {}

    def begin(self, robot: str, polyline: Sequence[Tuple[float, float]],
              tolerance: Optional[float] = None):
        if tolerance is not None and tolerance <= 0:
            raise ValueError("tolerance must be positive")
        pl = [(float(x), float(y)) for x, y in polyline]
        if len(pl) < 2:
            pl = pl + pl[:1]
        self._active[robot] = _Tracked(pl, tolerance or self.tolerance)

    def end(self, robot: str):
        self._active.pop(robot, None)

    def tracking(self, robot: str) -> bool:
        return robot in self._active

    def update(self, robot: str, x: float, y: float) -> bool:
        """Feed a pose; returns True while conformant, False on divergence.

        A divergent robot is dropped from tracking; the caller aborts the
        movement and replans.
        """
        tr = self._active.get(robot)
        if tr is None:
            return True
        best = math.inf
        best_seg = tr.progress
        pl = tr.polyline
        for seg in range(tr.progress, len(pl) - 1):
            d = point_segment_distance(x, y, *pl[seg], *pl[seg + 1])
            if d < best:
                best = d
                best_seg = seg
        if len(pl) == 2 and pl[0] == pl[1]:
            best = math.hypot(x - pl[0][0], y - pl[0][1])
        if best > tr.tolerance:
            del self._active[robot]
            return False
        tr.progress = best_seg
        return True
