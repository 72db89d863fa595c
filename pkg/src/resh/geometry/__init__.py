from .worldmap import Cell, WorldMap, random_map, supercover  # noqa: F401
from .astar import astar, octile, path_length, shortest_length  # noqa: F401
from .plan import (  # noqa: F401
    DT, MARGIN, STRETCH, MultipathSolution, PlannedPath, RobotSpec, estimate,
    finish_time_of, min_separation, plan, sample_position,
)
from .track import ConformanceTracker, point_segment_distance  # noqa: F401
