"""Execution engine: the event loop that runs submitted programs.

The engine watches runtime traffic from the simulated world, keeps one
execution state per submitted program, and every epoch formulates an
assignment problem over the currently eligible start groups. Solver
output becomes letters: terminations observed since the last epoch form
an X letter, launched initiations form a Y letter. Internal atoms
(waits, pauses, loop decisions) resolve silently between letters.

Located actions ride a two-stage pipeline: the engine plans paths for
all movements of the epoch jointly, dispatches the legs one waypoint at
a time (honoring planner-inserted hold delays), and sends the payload
action only after arrival.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .check import TypedProgram, check
from .errors import IllegalLetter, NoPath, ReshError, UnknownProgram
from .geometry.astar import shortest_length
from .geometry.plan import RobotSpec, plan
from .optimize import (
    ActionRequest, OptimizationProblem, RobotDescriptor, Solution, StartGroup,
    solve_or_fallback,
)
from .protocol import (
    ActionStatus, ActStatus, Advertise, Body, CancelAction, Duration,
    Envelope, Event, GotoSet, PoseUpdate, PropertyUpdate, Retract,
    StartAction, TaskState, Value, Waypoint,
)
from .syntax.ast import (
    BoolLit, DurationLit, IntLit, ParamType, PropSpec, StringLit, Target,
    TargetKind, VarRef,
)
from .syntax.parser import parse
from .temporal.state import ExecState, Letter, Status, initial_state
from .temporal.term import AtomKind, Lowered, lower

DEFAULT_RADIUS = 0.1
DEFAULT_SPEED = 1.0


def _canon(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class TraceRecord:
    sim_ms: int
    epoch: int
    kind: str
    payload: dict

    def line(self) -> str:
        return f"{self.sim_ms}\t{self.epoch}\t{self.kind}\t{_canon(self.payload)}"


@dataclass
class _PoolBot:
    """Engine-side mirror of one advertised robot."""

    name: str
    capabilities: Set[Tuple[str, Tuple[ParamType, ...]]] = field(default_factory=set)
    properties: Dict[str, Value] = field(default_factory=dict)
    pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    battery: float = 1.0
    busy: Optional[str] = None          # run-qualified uid it is executing
    reserved: Optional[str] = None      # owner key holding an exclusive claim
    goal: Optional[Tuple[float, float]] = None


@dataclass
class _Active:
    """One launched action instance, possibly in its movement stage."""

    run_id: str
    uid: str
    robot: str
    action: str
    args: Tuple[Value, ...]
    legs: Tuple[Waypoint, ...] = ()
    leg_index: int = 1                  # legs[0] is the start pose
    leg_due_ms: int = 0
    instance: Optional[str] = None      # physical id outstanding at the agent
    movement_only: bool = False         # plain goto: done on arrival
    arrived: bool = False
    scope: Optional[str] = None

    @property
    def iid(self) -> str:
        return f"{self.run_id}/{self.uid}"


class TaskRun:
    """One submitted program and its execution state."""

    def __init__(self, program_id: str, typed: TypedProgram, lowered: Lowered):
        self.program_id = program_id
        self.typed = typed
        self.lowered = lowered
        self.state: ExecState = initial_state(lowered.root)
        self.bindings: Dict[str, str] = {}     # owner key -> robot name
        self.locals: Dict[str, Value] = {}     # event-bound parameters
        self.trace: List[TraceRecord] = []
        self.task_state = TaskState.RUNNING
        self.detail = ""
        self.pause_due: Dict[str, int] = {}
        self.pending_x: List[Tuple[str, Status]] = []

    @property
    def active(self) -> bool:
        return self.task_state is TaskState.RUNNING

    def owner_key(self, uid: str) -> str:
        """Owner key for the assignment problem; var keys are per-run."""
        info = self.lowered.info[uid]
        if info.assign is None:
            return f"var:{self.program_id}/!{uid}"
        if info.assign.kind is TargetKind.VAR:
            return f"var:{self.program_id}/{info.assign.value}"
        return f"robot:{info.assign.value}"

    def var_key(self, name: str) -> str:
        return f"var:{self.program_id}/{name}"


class Engine:
    """Single event loop over one robot pool."""

    def __init__(self, world, estimator=None):
        self.world = world
        self.map = world.map
        self.clock = world.clock
        self.pool: Dict[str, _PoolBot] = {}
        self.runs: Dict[str, TaskRun] = {}
        self.epoch = 0
        self.active: Dict[str, _Active] = {}       # keyed by run-qualified uid
        self.sent: List[Body] = []                 # runtime-originated traffic
        self.estimator = estimator or self._map_estimator()
        self._reoptimize = True
        self._cancelled_sent: Set[str] = set()

    # -- submission --------------------------------------------------------

    def submit(self, source: str, program_id: Optional[str] = None) -> str:
        pid = program_id or f"task{len(self.runs)}"
        if pid in self.runs:
            raise ReshError(f"duplicate program id {pid!r}")
        typed = check(parse(source))
        run = TaskRun(pid, typed, lower(typed.entry_body))
        self.runs[pid] = run
        self._trace(run, "status", {"state": "running"})
        self._reoptimize = True
        return pid

    def cancel_task(self, program_id: str):
        run = self.runs.get(program_id)
        if run is None:
            raise UnknownProgram(program_id)
        if run.active:
            self._abort(run, TaskState.CANCELLED, "cancelled by request")

    def run_state(self, program_id: str) -> TaskState:
        run = self.runs.get(program_id)
        if run is None:
            raise UnknownProgram(program_id)
        return run.task_state

    def done(self) -> bool:
        return all(not r.active for r in self.runs.values())

    # -- tracing -----------------------------------------------------------

    def _trace(self, run: TaskRun, kind: str, payload: dict):
        run.trace.append(TraceRecord(self.clock.now_ms, self.epoch, kind, payload))

    def trace_lines(self, program_id: str) -> List[str]:
        return [r.line() for r in self.runs[program_id].trace]

    # -- message intake ----------------------------------------------------

    def on_envelope(self, env: Envelope):
        body = env.body
        if isinstance(body, Advertise):
            bot = self.pool.setdefault(body.robot, _PoolBot(body.robot))
            for c in body.capabilities:
                bot.capabilities.add((c.action, c.signature))
            bot.properties.update(dict(body.properties))
            self._reoptimize = True
        elif isinstance(body, Retract):
            if body.action is None:
                self._robot_removed(body.robot)
            else:
                bot = self.pool.get(body.robot)
                if bot:
                    bot.capabilities = {c for c in bot.capabilities
                                        if c[0] != body.action}
                self._reoptimize = True
        elif isinstance(body, PropertyUpdate):
            bot = self.pool.get(body.robot)
            if bot:
                bot.properties[body.prop] = body.value
            self._reoptimize = True
        elif isinstance(body, PoseUpdate):
            bot = self.pool.get(body.robot)
            if bot:
                bot.pose = (body.pose.x, body.pose.y, body.pose.theta)
                bot.battery = body.battery
        elif isinstance(body, ActionStatus):
            self._on_action_status(body)
        elif isinstance(body, Event):
            self._on_event(body)

    def _on_event(self, ev: Event):
        for run in self.runs.values():
            if not run.active:
                continue
            for uid in sorted(run.state.armed_internals()):
                info = run.lowered.info[uid]
                if info.kind is AtomKind.WAIT_EVENT and info.event == ev.name \
                        and len(info.event_params) == len(ev.args):
                    for (pname, _), val in zip(info.event_params, ev.args):
                        run.locals[pname] = val
                    run.state = run.state.resolve_internal(uid)
                    self._trace(run, "wait", {"uid": uid, "event": ev.name,
                                              "args": list(ev.args)})
                    self._reoptimize = True
        # events nobody waits for are dropped

    def _on_action_status(self, st: ActionStatus):
        act = next((a for a in self.active.values()
                    if a.instance == st.instance_id), None)
        if act is None or st.status is ActStatus.RUNNING:
            return
        act.instance = None
        if st.status is ActStatus.SUCCEEDED:
            if act.legs and not act.arrived:
                act.leg_index += 1
                self._advance_leg(act)
            else:
                self._finish(act, Status.SUCCEEDED)
        elif st.status is ActStatus.FAILED:
            self._finish(act, Status.FAILED)
        else:
            self._finish(act, Status.TERMINATED)

    def _finish(self, act: _Active, status: Status):
        run = self.runs[act.run_id]
        self.active.pop(act.iid, None)
        self._cancelled_sent.discard(act.iid)
        bot = self.pool.get(act.robot)
        if bot and bot.busy == act.iid:
            bot.busy = None
            bot.goal = None
        run.pending_x.append((act.uid, status))
        self._reoptimize = True

    def _robot_removed(self, name: str):
        self.pool.pop(name, None)
        # in-flight work on that robot fails; the containing task aborts
        for act in [a for a in self.active.values() if a.robot == name]:
            self.active.pop(act.iid, None)
            self.runs[act.run_id].pending_x.append((act.uid, Status.FAILED))
        self._reoptimize = True

    # -- property evaluation ----------------------------------------------

    def _prop_value(self, run: TaskRun, spec: PropSpec) -> Optional[bool]:
        """Current truth of a property spec; None when not yet evaluable."""
        if spec.owner is not None:
            robot = run.bindings.get(run.var_key(spec.owner))
            if robot is None or robot not in self.pool:
                return None
            val = bool(self.pool[robot].properties.get(spec.prop, False))
        else:
            val = any(bool(b.properties.get(spec.prop, False))
                      for b in self.pool.values())
        return (not val) if spec.negated else val

    # -- the engine step ---------------------------------------------------

    def tick(self):
        """One scheduling turn: intake, letters, waits, epoch, dispatch."""
        for env in self.world.drain():
            self.on_envelope(env)
        for run in list(self.runs.values()):
            if run.active:
                self._apply_pending_x(run)
                self._settle_internals(run)
                self._check_terminal(run)
        if self._reoptimize and not self.done():
            self._reoptimize = False
            self.epoch += 1
            self._formulate_and_apply()
            for run in self.runs.values():
                if run.active:
                    self._check_terminal(run)
        self._pump_legs()

    def _apply_pending_x(self, run: TaskRun):
        while run.pending_x:
            xs, run.pending_x = run.pending_x, []
            letter = Letter(x=frozenset(xs))
            run.state = run.state.apply_letter(letter, strict=False)
            self._trace(run, "letter", {
                "x": sorted([u, s.value] for u, s in letter.x), "y": []})
            self._issue_cancels(run)

    def _settle_internals(self, run: TaskRun):
        progressed = True
        while progressed and run.active:
            progressed = False
            for uid in sorted(run.state.armed_internals()):
                info = run.lowered.info[uid]
                if info.kind is AtomKind.PAUSE:
                    due = run.pause_due.get(uid)
                    if due is None:
                        run.pause_due[uid] = self.clock.now_ms + info.pause_ms
                    elif self.clock.now_ms >= due:
                        del run.pause_due[uid]
                        run.state = run.state.resolve_internal(uid)
                        self._trace(run, "wait",
                                    {"uid": uid, "pause": info.pause_ms})
                        progressed = True
                elif info.kind is AtomKind.WAIT_PROP:
                    if self._prop_value(run, info.prop):
                        run.state = run.state.resolve_internal(uid)
                        self._trace(run, "wait",
                                    {"uid": uid, "prop": str(info.prop)})
                        progressed = True
            for uid in sorted(run.state.pending_loops()):
                until = run.lowered.info[uid].loop_until
                if self._prop_value(run, until):
                    run.state = run.state.loop_exit(uid)
                    self._trace(run, "loop", {"uid": uid, "exit": True})
                else:
                    run.state = run.state.loop_enter(uid)
                    self._trace(run, "loop", {"uid": uid, "exit": False})
                progressed = True
            if progressed:
                self._reoptimize = True
                self._issue_cancels(run)
        self._issue_cancels(run)
        self._apply_pending_x(run)

    def _issue_cancels(self, run: TaskRun):
        for uid in sorted(run.state.cancel_obligations()):
            iid = f"{run.program_id}/{uid}"
            if iid in self._cancelled_sent:
                continue
            act = self.active.get(iid)
            if act is None:
                # launched but nothing outstanding at any agent: ack locally
                run.pending_x.append((uid, Status.TERMINATED))
                continue
            self._cancelled_sent.add(iid)
            if act.instance is not None:
                self._send(CancelAction(act.instance))
            else:
                # between legs or holding: nothing at the agent yet
                self._finish(act, Status.TERMINATED)

    def _check_terminal(self, run: TaskRun):
        if not run.active:
            return
        if run.state.failed():
            self._abort(run, TaskState.FAILED, "an action failed")
        elif run.state.finished():
            self._release_reservations(run)
            run.task_state = TaskState.SUCCEEDED
            self._trace(run, "status", {"state": "succeeded"})

    def _abort(self, run: TaskRun, state: TaskState, detail: str):
        for act in [a for a in self.active.values()
                    if a.run_id == run.program_id]:
            if act.instance is not None:
                self._send(CancelAction(act.instance))
            self.active.pop(act.iid, None)
            bot = self.pool.get(act.robot)
            if bot and bot.busy == act.iid:
                bot.busy = None
                bot.goal = None
        self._release_reservations(run)
        run.task_state = state
        run.detail = detail
        self._trace(run, "status", {"state": state.value, "detail": detail})

    def _release_reservations(self, run: TaskRun):
        prefix = f"var:{run.program_id}/"
        for bot in self.pool.values():
            if bot.reserved and bot.reserved.startswith(prefix):
                bot.reserved = None

    # -- problem formulation ----------------------------------------------

    def _descriptor(self, bot: _PoolBot) -> RobotDescriptor:
        return RobotDescriptor(
            name=bot.name,
            capabilities=frozenset(bot.capabilities),
            properties=tuple(sorted(bot.properties.items())),
            pose=bot.pose,
            battery=bot.battery,
            busy=bot.busy,
            reserved=bot.reserved,
            goal=bot.goal,
        )

    def _resolve_location(self, run: TaskRun, target: Target) -> Tuple[float, float]:
        if target.kind is TargetKind.NAME:
            name = target.value
        else:
            val = run.locals.get(target.value)
            if val is None:
                raise ReshError(
                    f"location variable {target.value!r} is unbound")
            name = str(val)
        loc = self.map.locations.get(name)
        if loc is None:
            raise ReshError(f"unknown location {name!r}")
        return (loc[0], loc[1])

    def _target_of(self, run: TaskRun, uid: str) -> Optional[Tuple[float, float]]:
        info = run.lowered.info[uid]
        if info.location is not None:
            return self._resolve_location(run, info.location)
        if info.action == "goto" and info.args:
            return self._resolve_location(run, _goto_arg_target(info.args[0]))
        return None

    def _request_for(self, run: TaskRun, uid: str) -> ActionRequest:
        info = run.lowered.info[uid]
        owner = run.owner_key(uid)
        with_spec: Tuple[PropSpec, ...] = ()
        if info.assign is not None and info.assign.kind is TargetKind.VAR:
            decl = run.typed.var_table.get(info.assign.value)
            if decl:
                with_spec = decl[1]
        # plain movement is matched against the bare "goto" capability;
        # the engine consumes the location argument itself
        sig = () if info.action == "goto" \
            else tuple(run.typed.action_table.get(info.action, ()))
        return ActionRequest(
            instance_id=f"{run.program_id}/{uid}",
            action=info.action,
            signature=sig,
            owner=owner,
            target=self._target_of(run, uid),
            exclusive=info.exclusive_scope is not None,
            with_spec=with_spec,
        )

    def _formulate_and_apply(self):
        groups: List[StartGroup] = []
        meta: Dict[str, Tuple[TaskRun, frozenset]] = {}
        for run in list(self.runs.values()):
            if not run.active:
                continue
            for i, g in enumerate(sorted(run.state.eligible(),
                                         key=lambda s: sorted(s))):
                gid = f"{run.program_id}/{i}"
                try:
                    reqs = tuple(self._request_for(run, u) for u in sorted(g))
                except ReshError as e:
                    self._abort(run, TaskState.FAILED, str(e))
                    break
                groups.append(StartGroup(gid, reqs, task=run.program_id))
                meta[gid] = (run, frozenset(g))
        if not groups:
            return
        conflicts = set()
        for g1 in groups:
            for g2 in groups:
                if g1.gid >= g2.gid:
                    continue
                r1, u1 = meta[g1.gid]
                r2, u2 = meta[g2.gid]
                if r1 is r2 and (u1 | u2) not in r1.state.start_options():
                    conflicts.add(frozenset({g1.gid, g2.gid}))
        bindings: Set[Tuple[str, str]] = set()
        for run in self.runs.values():
            if run.active:
                bindings.update(run.bindings.items())
        problem = OptimizationProblem(
            epoch=self.epoch,
            groups=tuple(groups),
            pool=tuple(self._descriptor(b)
                       for _, b in sorted(self.pool.items())),
            bindings=tuple(sorted(bindings)),
            conflicts=frozenset(conflicts),
        )
        solution = solve_or_fallback(problem, self.estimator)
        if solution.selected:
            self._apply_solution(solution, meta)

    def _map_estimator(self):
        m = self.map

        def est(robot: RobotDescriptor, target: Tuple[float, float]) -> float:
            ox, oy = robot.travel_origin()
            return shortest_length(m, m.cell_of(ox, oy),
                                   m.cell_of(*target), robot.name) \
                / DEFAULT_SPEED

        return est

    # -- solution application ---------------------------------------------

    def _apply_solution(self, sol: Solution, meta):
        per_run: Dict[str, Set[str]] = {}
        for gid in sol.selected:
            run, uids = meta[gid]
            per_run.setdefault(run.program_id, set()).update(uids)
        assigns = dict(sol.assignments)
        launched: List[Tuple[TaskRun, str, str]] = []   # (run, uid, robot)
        for pid in sorted(per_run):
            run = self.runs[pid]
            union = frozenset(per_run[pid])
            if union in run.state.start_options():
                run.state = run.state.apply_letter(Letter(y=union))
                self._trace(run, "letter", {"x": [], "y": sorted(union)})
                launched += [(run, u, assigns[f"{pid}/{u}"])
                             for u in sorted(union)]
                continue
            # selected groups cannot combine into one letter; launch them
            # one letter at a time, skipping any that became illegal
            for gid in sorted(sol.selected):
                r, g = meta[gid]
                if r is not run:
                    continue
                try:
                    run.state = run.state.apply_letter(Letter(y=g))
                except IllegalLetter:
                    continue
                self._trace(run, "letter", {"x": [], "y": sorted(g)})
                launched += [(run, u, assigns[f"{pid}/{u}"])
                             for u in sorted(g)]

        # joint movement planning for every located launch of this epoch
        specs: List[RobotSpec] = []
        targets: Dict[str, Tuple[float, float]] = {}
        for run, uid, robot in launched:
            tgt = self._target_of(run, uid)
            if tgt is not None:
                bot = self.pool[robot]
                specs.append(RobotSpec(robot, (bot.pose[0], bot.pose[1]),
                                       tgt, DEFAULT_RADIUS, DEFAULT_SPEED))
                targets[f"{run.program_id}/{uid}"] = tgt
        paths = None
        unreachable: Set[str] = set()
        if specs:
            try:
                paths = plan(self.map, specs)
                entries = tuple(
                    (p.robot, tuple(Waypoint(x, y, int(h * 1000))
                                    for x, y, h in p.waypoints))
                    for p in sorted(paths.paths.values(),
                                    key=lambda p: p.robot))
                self._send(GotoSet(self.epoch, entries,
                                   path_ref=f"e{self.epoch}"))
            except NoPath:
                # despite the estimate no joint plan exists; every movement
                # of this epoch fails rather than silently stalling
                unreachable = set(targets)

        for run, uid, robot in launched:
            iid = f"{run.program_id}/{uid}"
            info = run.lowered.info[uid]
            owner = run.owner_key(uid)
            if owner not in run.bindings:
                run.bindings[owner] = robot
                self._trace(run, "bind", {"owner": owner, "robot": robot})
            if info.exclusive_scope is not None:
                self.pool[robot].reserved = owner
            self._trace(run, "assign",
                        {"uid": uid, "robot": robot, "action": info.action})
            if iid in unreachable:
                run.pending_x.append((uid, Status.FAILED))
                continue
            bot = self.pool[robot]
            bot.busy = iid
            args = tuple(self._arg_value(run, a) for a in info.args)
            act = _Active(run.program_id, uid, robot, info.action, args,
                          scope=info.exclusive_scope)
            self.active[iid] = act
            if iid in targets:
                bot.goal = targets[iid]
                act.legs = tuple(Waypoint(x, y, int(h * 1000))
                                 for x, y, h in paths.paths[robot].waypoints)
                act.movement_only = info.action == "goto" \
                    and info.location is None
                act.leg_index = 1
                self._advance_leg(act)
            else:
                self._start_instance(act)

    def _arg_value(self, run: TaskRun, expr) -> Value:
        if isinstance(expr, StringLit):
            return expr.value
        if isinstance(expr, IntLit):
            return expr.value
        if isinstance(expr, BoolLit):
            return expr.value
        if isinstance(expr, DurationLit):
            return Duration(expr.millis)
        if isinstance(expr, VarRef):
            if expr.name in run.locals:
                return run.locals[expr.name]
            bound = run.bindings.get(run.var_key(expr.name))
            return bound if bound is not None else expr.name
        raise ReshError(f"cannot evaluate argument {expr!r}")

    # -- movement leg dispatch ---------------------------------------------

    def _advance_leg(self, act: _Active):
        """Arm the next waypoint, or transition to arrival."""
        if act.leg_index >= len(act.legs):
            act.arrived = True
            if act.movement_only:
                self._finish(act, Status.SUCCEEDED)
            else:
                self._start_instance(act)
            return
        # the hold recorded on the waypoint we are leaving delays departure
        prev = act.legs[act.leg_index - 1]
        act.leg_due_ms = self.clock.now_ms + prev.delay_ms
        act.instance = None

    def _pump_legs(self):
        for act in sorted(self.active.values(), key=lambda a: a.iid):
            if act.instance is not None or act.arrived or not act.legs:
                continue
            if act.iid in self._cancelled_sent:
                continue
            if self.clock.now_ms >= act.leg_due_ms:
                wp = act.legs[act.leg_index]
                act.instance = f"{act.iid}#g{act.leg_index}"
                self._send(StartAction(act.instance, "goto",
                                       (wp.x, wp.y), act.robot))

    def _start_instance(self, act: _Active):
        act.instance = f"{act.iid}#run"
        self._send(StartAction(act.instance, act.action, act.args, act.robot))

    # -- outbound ----------------------------------------------------------

    def _send(self, body: Body):
        self.sent.append(body)
        if isinstance(body, (StartAction, CancelAction)):
            self.world.deliver(body)


def _goto_arg_target(expr) -> Target:
    if isinstance(expr, StringLit):
        return Target(TargetKind.NAME, expr.value)
    if isinstance(expr, VarRef):
        return Target(TargetKind.VAR, expr.name)
    raise ReshError(f"goto argument must name a location, got {expr!r}")
