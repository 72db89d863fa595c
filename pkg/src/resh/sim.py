"""Simulated world: mock robots that advertise, act, move, and drain.

Each mock robot is an agent reachable only through protocol messages. A
single stepped clock owns time; ``World.step`` advances every robot
deterministically (insertion order, fixed tie-breaks), so identical
inputs produce identical message streams.

Movement model: a goto command names one waypoint; the robot drives
straight toward it at its nominal speed (the path engine only hands out
line-of-sight legs). ``twist`` rotates in place at a fixed angular rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

from .errors import DuplicateName, PoseOccupied, ReshError
from .geometry.worldmap import WorldMap
from .protocol import (
    ActionStatus, ActStatus, Advertise, Body, CancelAction, Capability,
    Envelope, Event, Pose, PoseUpdate, PropertyUpdate, Retract, StartAction,
    Value,
)

TWIST_RATE = 1.0          # rad/s, fixed for all mock robots
DEFAULT_DURATION_MS = 1000


@dataclass(frozen=True)
class ActionScript:
    """How a mock robot plays one action name.

    Exactly one behavior applies: succeed after duration_ms, fail after
    fail_after_ms, or run until a CANCEL_ACTION arrives.
    """

    duration_ms: Optional[int] = None
    fail_after_ms: Optional[int] = None
    hold_until_cancelled: bool = False


@dataclass(frozen=True)
class MockRobotConfig:
    name: str
    capabilities: Tuple[Capability, ...] = ()
    properties: Tuple[Tuple[str, Value], ...] = ()
    pose: Pose = Pose(0.0, 0.0, 0.0)
    speed: float = 1.0                 # m/s, must be positive
    battery: float = 1.0
    drain_per_meter: float = 0.0
    script: Tuple[Tuple[str, ActionScript], ...] = ()

    def script_for(self, action: str) -> Optional[ActionScript]:
        for name, s in self.script:
            if name == action:
                return s
        return None


class SimClock:
    """Stepped simulation clock, milliseconds."""

    def __init__(self, now_ms: int = 0):
        self.now_ms = now_ms

    def advance(self, dt_ms: int):
        if dt_ms < 0:
            raise ValueError("clock cannot run backwards")
        self.now_ms += dt_ms

    @property
    def seconds(self) -> float:
        return self.now_ms / 1000.0


@dataclass
class _Running:
    instance_id: str
    action: str
    ends_ms: Optional[int]      # None while driving or holding
    fails: bool = False


class MockRobot:
    """One simulated pool member; all state owned by the world stepper."""

    def __init__(self, config: MockRobotConfig, clock: SimClock):
        if config.speed <= 0:
            raise ReshError(f"robot {config.name}: speed must be positive")
        self.config = config
        self.clock = clock
        self.name = config.name
        self.pose = config.pose
        self.battery = config.battery
        self.properties: Dict[str, Value] = dict(config.properties)
        self.capabilities: List[Capability] = list(config.capabilities)
        self.running: Dict[str, _Running] = {}
        self.drive_target: Optional[Tuple[float, float, str]] = None
        self.twist_left: Optional[Tuple[float, str]] = None   # radians, id
        self.removed = False

    def advertises(self, action: str) -> Optional[Capability]:
        for c in self.capabilities:
            if c.action == action:
                return c
        return None

    def start(self, cmd: StartAction, out: List[Body]):
        if cmd.action == "goto":
            x, y = float(cmd.args[0]), float(cmd.args[1])
            self.drive_target = (x, y, cmd.instance_id)
            self.running[cmd.instance_id] = _Running(cmd.instance_id, "goto", None)
            out.append(ActionStatus(cmd.instance_id, ActStatus.RUNNING))
            return
        if cmd.action == "twist":
            dtheta = float(cmd.args[0]) if cmd.args else math.pi
            self.twist_left = (dtheta, cmd.instance_id)
            self.running[cmd.instance_id] = _Running(cmd.instance_id, "twist", None)
            out.append(ActionStatus(cmd.instance_id, ActStatus.RUNNING))
            return
        script = self.config.script_for(cmd.action)
        cap = self.advertises(cmd.action)
        if script is None:
            dur = cap.typical_duration_ms if cap and cap.typical_duration_ms \
                else DEFAULT_DURATION_MS
            run = _Running(cmd.instance_id, cmd.action, self.clock.now_ms + dur)
        elif script.hold_until_cancelled:
            run = _Running(cmd.instance_id, cmd.action, None)
        elif script.fail_after_ms is not None:
            run = _Running(cmd.instance_id, cmd.action,
                           self.clock.now_ms + script.fail_after_ms, fails=True)
        else:
            dur = script.duration_ms if script.duration_ms is not None \
                else DEFAULT_DURATION_MS
            run = _Running(cmd.instance_id, cmd.action, self.clock.now_ms + dur)
        self.running[cmd.instance_id] = run
        out.append(ActionStatus(cmd.instance_id, ActStatus.RUNNING))

    def cancel(self, instance_id: str, out: List[Body]):
        run = self.running.pop(instance_id, None)
        if run is None:
            return                      # stale cancel, ignore
        if self.drive_target and self.drive_target[2] == instance_id:
            self.drive_target = None
        if self.twist_left and self.twist_left[1] == instance_id:
            self.twist_left = None
        out.append(ActionStatus(instance_id, ActStatus.TERMINATED))

    def step(self, dt_ms: int, out: List[Body]):
        dt = dt_ms / 1000.0
        if dt <= 0:
            return
        if self.drive_target is not None:
            tx, ty, iid = self.drive_target
            dx, dy = tx - self.pose.x, ty - self.pose.y
            dist = math.hypot(dx, dy)
            reach = self.config.speed * dt
            if dist <= reach + 1e-12:
                moved = dist
                theta = math.atan2(dy, dx) if dist > 1e-12 else self.pose.theta
                self.pose = Pose(tx, ty, theta)
                self.drive_target = None
                self.running.pop(iid, None)
                out.append(ActionStatus(iid, ActStatus.SUCCEEDED))
            else:
                moved = reach
                f = reach / dist
                self.pose = Pose(self.pose.x + dx * f, self.pose.y + dy * f,
                                 math.atan2(dy, dx))
            self.battery = max(0.0, self.battery
                               - self.config.drain_per_meter * moved)
        if self.twist_left is not None:
            left, iid = self.twist_left
            spin = math.copysign(min(abs(left), TWIST_RATE * dt), left)
            self.pose = replace(self.pose, theta=self.pose.theta + spin)
            left -= spin
            if abs(left) < 1e-9:
                self.twist_left = None
                self.running.pop(iid, None)
                out.append(ActionStatus(iid, ActStatus.SUCCEEDED))
            else:
                self.twist_left = (left, iid)
        # scripted completions, deterministic order
        due = sorted((r for r in self.running.values()
                      if r.ends_ms is not None and r.ends_ms <= self.clock.now_ms),
                     key=lambda r: (r.ends_ms, r.instance_id))
        for r in due:
            del self.running[r.instance_id]
            status = ActStatus.FAILED if r.fails else ActStatus.SUCCEEDED
            out.append(ActionStatus(r.instance_id, status))


class World:
    """Owns the map, the clock, and every mock agent.

    Outbound protocol traffic is appended to ``outbox`` and optionally
    pushed to ``sink``; tests and the runtime drain the outbox.
    """

    def __init__(self, worldmap: WorldMap, clock: Optional[SimClock] = None,
                 sink: Optional[Callable[[Envelope], None]] = None):
        self.map = worldmap
        self.clock = clock or SimClock()
        self.sink = sink
        self.robots: Dict[str, MockRobot] = {}
        self.outbox: List[Envelope] = []
        self._counters: Dict[str, int] = {}

    # -- plumbing ----------------------------------------------------------

    def _emit(self, sender: str, body: Body):
        n = self._counters.get(sender, 0)
        self._counters[sender] = n + 1
        env = Envelope(f"{sender}-{n}", sender, self.clock.now_ms, body)
        self.outbox.append(env)
        if self.sink:
            self.sink(env)

    def drain(self) -> List[Envelope]:
        out, self.outbox = self.outbox, []
        return out

    # -- lifecycle ---------------------------------------------------------

    def spawn(self, config: MockRobotConfig) -> MockRobot:
        if config.name in self.robots:
            raise DuplicateName(f"robot {config.name!r} already in pool")
        cell = self.map.cell_of(config.pose.x, config.pose.y)
        if not self.map.free(cell):
            raise PoseOccupied(f"robot {config.name!r} spawns inside a wall")
        robot = MockRobot(config, self.clock)
        self.robots[config.name] = robot
        self._emit(config.name, Advertise(
            config.name, tuple(robot.capabilities),
            tuple(sorted(robot.properties.items()))))
        self._emit(config.name, PoseUpdate(config.name, robot.pose, robot.battery))
        return robot

    def spawn_pool(self, configs) -> List[MockRobot]:
        names = [c.name for c in configs]
        if len(set(names)) != len(names):
            raise DuplicateName("duplicate robot name in pool config")
        return [self.spawn(c) for c in configs]

    def remove(self, name: str):
        robot = self.robots.pop(name, None)
        if robot is None:
            raise ReshError(f"unknown robot {name!r}")
        robot.removed = True
        self._emit(name, Retract(name, None))

    # -- commands from the runtime ----------------------------------------

    def deliver(self, body: Body):
        """Route one runtime command to its agent."""
        if isinstance(body, StartAction):
            robot = self.robots.get(body.robot)
            if robot is None:
                self._emit("world", ActionStatus(
                    body.instance_id, ActStatus.FAILED, "robot not in pool"))
                return
            out: List[Body] = []
            robot.start(body, out)
            for b in out:
                self._emit(robot.name, b)
        elif isinstance(body, CancelAction):
            for robot in self.robots.values():
                if body.instance_id in robot.running:
                    out = []
                    robot.cancel(body.instance_id, out)
                    for b in out:
                        self._emit(robot.name, b)
                    return
        else:
            raise ReshError(f"world cannot deliver {type(body).__name__}")

    # -- mutation injection ------------------------------------------------

    def set_property(self, robot: str, prop: str, value: Value):
        r = self.robots[robot]
        r.properties[prop] = value
        self._emit(robot, PropertyUpdate(robot, prop, value))

    def fire_event(self, name: str, args: Tuple[Value, ...] = ()):
        self._emit("world", Event(name, tuple(args)))

    def update_offering(self, name: str, capabilities, properties):
        """Replace a live robot's advertised capabilities and merge
        property values; re-advertises so observers stay in sync."""
        r = self.robots[name]
        r.capabilities = list(capabilities)
        for k, v in properties:
            r.properties[k] = v
        self._emit(name, Advertise(name, tuple(r.capabilities),
                                   tuple(sorted(r.properties.items()))))

    def retract_capability(self, robot: str, action: str):
        r = self.robots[robot]
        r.capabilities = [c for c in r.capabilities if c.action != action]
        self._emit(robot, Retract(robot, action))

    # -- time --------------------------------------------------------------

    def step(self, dt_ms: int):
        """Advance simulated time; robots move, act, and report."""
        if dt_ms == 0:
            return
        self.clock.advance(dt_ms)
        for robot in self.robots.values():
            out: List[Body] = []
            robot.step(dt_ms, out)
            for b in out:
                self._emit(robot.name, b)
            self._emit(robot.name, PoseUpdate(robot.name, robot.pose,
                                              robot.battery))
