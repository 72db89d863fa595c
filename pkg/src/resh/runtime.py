"""Runtime service: program lifecycle, injected mutations, trace files.

The runtime owns one world and one engine and steps them together under
the stepped clock. Pool descriptions load from YAML, worlds from map
text, and scripted mutations from "AT <ms> ..." inject lines, so a
whole scenario is reproducible from files alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import yaml

from .engine import Engine
from .errors import ReshError, UnknownProgram
from .geometry.worldmap import WorldMap
from .protocol import (
    Body, Capability, Envelope, Event, Pose, TaskState, TaskStatus, Value,
)
from .sim import ActionScript, MockRobotConfig, World
from .syntax.ast import ParamType

# engine scheduling cadence, simulated milliseconds
DEFAULT_STEP_MS = 100

# handle states exposed to clients
_HANDLE_STATE = {
    TaskState.RUNNING: "running",
    TaskState.SUCCEEDED: "succeeded",
    TaskState.FAILED: "aborted",
    TaskState.CANCELLED: "cancelled",
}


@dataclass(frozen=True)
class TaskHandle:
    program_id: str
    state: str                      # queued|running|succeeded|aborted|cancelled
    submitted_at: int               # simulated ms
    detail: str = ""
    trace: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Injection:
    """One scheduled world mutation."""

    at_ms: int
    apply: Callable[[World], None]
    text: str = ""


# ---------------------------------------------------------------------------
# config loading

def _parse_signature(items) -> Tuple[ParamType, ...]:
    return tuple(ParamType(s) for s in (items or ()))


def load_pool(text: str) -> List[MockRobotConfig]:
    """Pool config from YAML; see tests for the accepted shape."""
    doc = yaml.safe_load(text) or {}
    robots = doc.get("robots", doc if isinstance(doc, list) else [])
    configs: List[MockRobotConfig] = []
    for r in robots:
        caps = []
        for c in r.get("capabilities", ()):
            if isinstance(c, str):
                caps.append(Capability(c))
            else:
                caps.append(Capability(
                    c["action"], _parse_signature(c.get("signature")),
                    c.get("typical_duration_ms")))
        script = tuple(
            (name, ActionScript(
                duration_ms=s.get("duration_ms"),
                fail_after_ms=s.get("fail_after_ms"),
                hold_until_cancelled=bool(s.get("hold_until_cancelled"))))
            for name, s in sorted((r.get("script") or {}).items()))
        pose = r.get("pose", [0.0, 0.0, 0.0])
        configs.append(MockRobotConfig(
            name=r["name"],
            capabilities=tuple(caps),
            properties=tuple(sorted((r.get("properties") or {}).items())),
            pose=Pose(float(pose[0]), float(pose[1]),
                      float(pose[2]) if len(pose) > 2 else 0.0),
            speed=float(r.get("speed", 1.0)),
            battery=float(r.get("battery", 1.0)),
            drain_per_meter=float(r.get("drain_per_meter", 0.0)),
            script=script,
        ))
    return configs


def _parse_value(tok: str) -> Value:
    if tok == "true":
        return True
    if tok == "false":
        return False
    try:
        return int(tok)
    except ValueError:
        return tok


def parse_inject(text: str) -> List[Injection]:
    """Inject script: time-stamped mutations, one per line.

    AT <ms> set <robot> <prop> <value>
    AT <ms> event <name> [args...]
    AT <ms> remove <robot>
    AT <ms> retract <robot> <action>
    """
    out: List[Injection] = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3 or parts[0] != "AT":
            raise ReshError(f"inject line {ln}: expected 'AT <ms> <mutation>'")
        try:
            at = int(parts[1])
        except ValueError:
            raise ReshError(f"inject line {ln}: bad timestamp {parts[1]!r}")
        op, rest = parts[2], parts[3:]
        if op == "set" and len(rest) == 3:
            robot, prop, val = rest[0], rest[1], _parse_value(rest[2])
            fn = lambda w, r=robot, p=prop, v=val: w.set_property(r, p, v)
        elif op == "event" and len(rest) >= 1:
            name = rest[0]
            args = tuple(_parse_value(t) for t in rest[1:])
            fn = lambda w, n=name, a=args: w.fire_event(n, a)
        elif op == "remove" and len(rest) == 1:
            fn = lambda w, r=rest[0]: w.remove(r)
        elif op == "retract" and len(rest) == 2:
            fn = lambda w, r=rest[0], a=rest[1]: w.retract_capability(r, a)
        else:
            raise ReshError(f"inject line {ln}: cannot parse {line!r}")
        out.append(Injection(at, fn, line))
    out.sort(key=lambda i: i.at_ms)
    return out


# ---------------------------------------------------------------------------
# the service

class Runtime:
    """One pool, one engine, many programs."""

    def __init__(self, world: World, step_ms: int = DEFAULT_STEP_MS,
                 sink: Optional[Callable[[Envelope], None]] = None):
        self.world = world
        self.engine = Engine(world)
        self.step_ms = step_ms
        self.sink = sink
        self._submitted_at: Dict[str, int] = {}
        self._pending: List[Injection] = []
        self._sent_seen = 0
        self._status_seen: Dict[str, TaskState] = {}
        self._trace_seen: Dict[str, int] = {}
        self._out_n = 0
        if sink is not None:
            world.sink = sink

    # -- programs ----------------------------------------------------------

    def submit(self, source: str, program_id: Optional[str] = None) -> str:
        pid = self.engine.submit(source, program_id)
        self._submitted_at[pid] = self.world.clock.now_ms
        return pid

    def cancel(self, program_id: str):
        self.engine.cancel_task(program_id)

    def handle(self, program_id: str) -> TaskHandle:
        run = self.engine.runs.get(program_id)
        if run is None:
            raise UnknownProgram(program_id)
        return TaskHandle(
            program_id=program_id,
            state=_HANDLE_STATE[run.task_state],
            submitted_at=self._submitted_at[program_id],
            detail=run.detail,
            trace=tuple(r.line() for r in run.trace),
        )

    def trace_text(self, program_id: str) -> str:
        return "".join(l + "\n" for l in self.handle(program_id).trace)

    # -- injections --------------------------------------------------------

    def schedule(self, injections) -> None:
        self._pending.extend(injections)
        self._pending.sort(key=lambda i: i.at_ms)

    def _apply_due(self):
        now = self.world.clock.now_ms
        while self._pending and self._pending[0].at_ms <= now:
            self._pending.pop(0).apply(self.world)

    # -- stepping ----------------------------------------------------------

    def _emit_runtime_traffic(self):
        """Mirror engine output and task-state changes to the sink."""
        if self.sink is None:
            self._sent_seen = len(self.engine.sent)
            return
        now = self.world.clock.now_ms
        for body in self.engine.sent[self._sent_seen:]:
            self._emit(body, now)
        self._sent_seen = len(self.engine.sent)
        for pid, run in self.engine.runs.items():
            # trace records go out as informational "trace" events so a
            # protocol client can rebuild the trace file byte for byte
            seen = self._trace_seen.get(pid, 0)
            for rec in run.trace[seen:]:
                self._emit(Event("trace", (pid, rec.line())), now)
            self._trace_seen[pid] = len(run.trace)
            if self._status_seen.get(pid) is not run.task_state:
                self._status_seen[pid] = run.task_state
                self._emit(TaskStatus(pid, run.task_state, run.detail), now)

    def _emit(self, body: Body, now: int):
        env = Envelope(f"runtime-{self._out_n}", "runtime", now, body)
        self._out_n += 1
        self.sink(env)

    def tick(self):
        self._apply_due()
        self.engine.tick()
        self._emit_runtime_traffic()

    def step(self, dt_ms: Optional[int] = None):
        self.world.step(dt_ms if dt_ms is not None else self.step_ms)
        self.tick()

    def run_until_done(self, limit_ms: int = 120_000) -> int:
        """Advance simulated time until every program reaches a terminal
        state; returns elapsed simulated ms."""
        start = self.world.clock.now_ms
        self.tick()
        while not self.engine.done():
            if self.world.clock.now_ms - start >= limit_ms:
                raise ReshError("simulation time limit exceeded")
            self.step()
        return self.world.clock.now_ms - start


def build_runtime(map_text: str, pool_text: str = "",
                  inject_text: str = "", step_ms: int = DEFAULT_STEP_MS,
                  sink: Optional[Callable[[Envelope], None]] = None) -> Runtime:
    world = World(WorldMap.parse(map_text))
    rt = Runtime(world, step_ms=step_ms, sink=sink)
    if pool_text:
        world.spawn_pool(load_pool(pool_text))
    if inject_text:
        rt.schedule(parse_inject(inject_text))
    return rt
