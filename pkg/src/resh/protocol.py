"""Wire protocol for orchestration traffic.

Every message is one UTF-8 line of JSON, newline terminated. The
envelope carries a protocol version, a per-sender unique id, the sender
name, a millisecond timestamp, and a kind tag; the remaining fields
depend on the kind. Encoding is canonical: fixed key order, no spaces,
so byte-level golden fixtures are stable. Decoding is tolerant: unknown
fields are ignored, unknown kinds raise DecodeError but keep the raw
line for logging. docs/protocol.md documents the schema normatively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

from .errors import DecodeError
from .syntax.ast import ParamType

PROTOCOL_VERSION = 1


class ActStatus(str, Enum):
    ACCEPTED = "accepted"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    TERMINATED = "terminated"


class TaskState(str, Enum):
    ACCEPTED = "accepted"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass(frozen=True)
class Duration:
    """A duration argument value; kept distinct from plain ints on the wire."""

    ms: int


Value = Union[str, int, float, bool, Duration]


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class Capability:
    action: str
    signature: Tuple[ParamType, ...] = ()
    typical_duration_ms: Optional[int] = None


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    delay_ms: int = 0   # hold at this waypoint before moving on


# ---------------------------------------------------------------------------
# message bodies

@dataclass(frozen=True)
class Advertise:
    robot: str
    capabilities: Tuple[Capability, ...] = ()
    properties: Tuple[Tuple[str, Value], ...] = ()


@dataclass(frozen=True)
class Retract:
    robot: str
    action: Optional[str] = None   # None retracts the whole robot


@dataclass(frozen=True)
class PropertyUpdate:
    robot: str
    prop: str
    value: Value = False


@dataclass(frozen=True)
class PoseUpdate:
    robot: str
    pose: Pose = Pose(0.0, 0.0, 0.0)
    battery: float = 1.0


@dataclass(frozen=True)
class StartAction:
    instance_id: str
    action: str
    args: Tuple[Value, ...] = ()
    robot: str = ""


@dataclass(frozen=True)
class CancelAction:
    instance_id: str


@dataclass(frozen=True)
class ActionStatus:
    instance_id: str
    status: ActStatus
    detail: str = ""


@dataclass(frozen=True)
class GotoSet:
    epoch: int
    entries: Tuple[Tuple[str, Tuple[Waypoint, ...]], ...] = ()
    path_ref: str = ""


@dataclass(frozen=True)
class Event:
    name: str
    args: Tuple[Value, ...] = ()


@dataclass(frozen=True)
class SubmitProgram:
    source: str
    program_id: str


@dataclass(frozen=True)
class TaskStatus:
    program_id: str
    state: TaskState
    detail: str = ""


@dataclass(frozen=True)
class CancelTask:
    program_id: str


Body = Union[Advertise, Retract, PropertyUpdate, PoseUpdate, StartAction,
             CancelAction, ActionStatus, GotoSet, Event, SubmitProgram,
             TaskStatus, CancelTask]

KINDS: Dict[type, str] = {
    Advertise: "ADVERTISE",
    Retract: "RETRACT",
    PropertyUpdate: "PROPERTY_UPDATE",
    PoseUpdate: "POSE_UPDATE",
    StartAction: "START_ACTION",
    CancelAction: "CANCEL_ACTION",
    ActionStatus: "ACTION_STATUS",
    GotoSet: "GOTO_SET",
    Event: "EVENT",
    SubmitProgram: "SUBMIT_PROGRAM",
    TaskStatus: "TASK_STATUS",
    CancelTask: "CANCEL_TASK",
}


@dataclass(frozen=True)
class Envelope:
    msg_id: str
    sender: str
    ts: int           # milliseconds
    body: Body

    @property
    def kind(self) -> str:
        return KINDS[type(self.body)]


# ---------------------------------------------------------------------------
# value plumbing

def _enc_value(v: Value):
    if isinstance(v, Duration):
        return {"ms": v.ms}
    if isinstance(v, (str, bool, int, float)):
        return v
    raise TypeError(f"not a wire value: {v!r}")


def _dec_value(v) -> Value:
    if isinstance(v, dict):
        if set(v) == {"ms"} and isinstance(v["ms"], int):
            return Duration(v["ms"])
        raise DecodeError(f"bad value object {v!r}")
    if isinstance(v, (str, bool, int, float)):
        return v
    raise DecodeError(f"bad value {v!r}")


def _enc_pose(p: Pose):
    return {"x": p.x, "y": p.y, "theta": p.theta}


def _dec_pose(d) -> Pose:
    try:
        return Pose(float(d["x"]), float(d["y"]), float(d["theta"]))
    except (TypeError, KeyError) as e:
        raise DecodeError(f"bad pose: {e}")


def _enc_cap(c: Capability):
    out = {"action": c.action, "sig": [t.value for t in c.signature]}
    if c.typical_duration_ms is not None:
        out["typicalDurationMs"] = c.typical_duration_ms
    return out


def _dec_cap(d) -> Capability:
    try:
        sig = tuple(ParamType(s) for s in d["sig"])
        return Capability(d["action"], sig, d.get("typicalDurationMs"))
    except (TypeError, KeyError, ValueError) as e:
        raise DecodeError(f"bad capability: {e}")


def _enc_wp(w: Waypoint):
    out = {"x": w.x, "y": w.y}
    if w.delay_ms:
        out["delayMs"] = w.delay_ms
    return out


def _dec_wp(d) -> Waypoint:
    try:
        return Waypoint(float(d["x"]), float(d["y"]), int(d.get("delayMs", 0)))
    except (TypeError, KeyError) as e:
        raise DecodeError(f"bad waypoint: {e}")


# ---------------------------------------------------------------------------
# codec

def _body_fields(b: Body) -> dict:
    if isinstance(b, Advertise):
        return {"robot": b.robot,
                "capabilities": [_enc_cap(c) for c in b.capabilities],
                "properties": {k: _enc_value(v) for k, v in b.properties}}
    if isinstance(b, Retract):
        out = {"robot": b.robot}
        if b.action is not None:
            out["action"] = b.action
        return out
    if isinstance(b, PropertyUpdate):
        return {"robot": b.robot, "prop": b.prop, "value": _enc_value(b.value)}
    if isinstance(b, PoseUpdate):
        return {"robot": b.robot, "pose": _enc_pose(b.pose), "battery": b.battery}
    if isinstance(b, StartAction):
        return {"instanceId": b.instance_id, "action": b.action,
                "args": [_enc_value(a) for a in b.args], "robot": b.robot}
    if isinstance(b, CancelAction):
        return {"instanceId": b.instance_id}
    if isinstance(b, ActionStatus):
        out = {"instanceId": b.instance_id, "status": b.status.value}
        if b.detail:
            out["detail"] = b.detail
        return out
    if isinstance(b, GotoSet):
        return {"epoch": b.epoch,
                "entries": [{"robot": r, "waypoints": [_enc_wp(w) for w in ws]}
                            for r, ws in b.entries],
                "pathRef": b.path_ref}
    if isinstance(b, Event):
        return {"name": b.name, "args": [_enc_value(a) for a in b.args]}
    if isinstance(b, SubmitProgram):
        return {"source": b.source, "programId": b.program_id}
    if isinstance(b, TaskStatus):
        out = {"programId": b.program_id, "state": b.state.value}
        if b.detail:
            out["detail"] = b.detail
        return out
    if isinstance(b, CancelTask):
        return {"programId": b.program_id}
    raise TypeError(f"not a message body: {b!r}")


def encode(m: Envelope) -> bytes:
    obj = {"v": PROTOCOL_VERSION, "id": m.msg_id, "sender": m.sender,
           "ts": m.ts, "kind": m.kind}
    obj.update(_body_fields(m.body))
    return (json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n").encode()


def _req(obj: dict, key: str):
    if key not in obj:
        raise DecodeError(f"missing field {key!r}")
    return obj[key]


_DECODERS = {
    "ADVERTISE": lambda o: Advertise(
        _req(o, "robot"),
        tuple(_dec_cap(c) for c in o.get("capabilities", [])),
        tuple(sorted((k, _dec_value(v)) for k, v in o.get("properties", {}).items()))),
    "RETRACT": lambda o: Retract(_req(o, "robot"), o.get("action")),
    "PROPERTY_UPDATE": lambda o: PropertyUpdate(
        _req(o, "robot"), _req(o, "prop"), _dec_value(_req(o, "value"))),
    "POSE_UPDATE": lambda o: PoseUpdate(
        _req(o, "robot"), _dec_pose(_req(o, "pose")), float(_req(o, "battery"))),
    "START_ACTION": lambda o: StartAction(
        _req(o, "instanceId"), _req(o, "action"),
        tuple(_dec_value(a) for a in o.get("args", [])), o.get("robot", "")),
    "CANCEL_ACTION": lambda o: CancelAction(_req(o, "instanceId")),
    "ACTION_STATUS": lambda o: ActionStatus(
        _req(o, "instanceId"), ActStatus(_req(o, "status")), o.get("detail", "")),
    "GOTO_SET": lambda o: GotoSet(
        int(_req(o, "epoch")),
        tuple((e["robot"], tuple(_dec_wp(w) for w in e["waypoints"]))
              for e in o.get("entries", [])),
        o.get("pathRef", "")),
    "EVENT": lambda o: Event(
        _req(o, "name"), tuple(_dec_value(a) for a in o.get("args", []))),
    "SUBMIT_PROGRAM": lambda o: SubmitProgram(_req(o, "source"), _req(o, "programId")),
    "TASK_STATUS": lambda o: TaskStatus(
        _req(o, "programId"), TaskState(_req(o, "state")), o.get("detail", "")),
    "CANCEL_TASK": lambda o: CancelTask(_req(o, "programId")),
}


def decode(line: Union[bytes, str]) -> Envelope:
    raw = line.decode("utf-8", "replace") if isinstance(line, bytes) else line
    raw = raw.rstrip("\n")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise DecodeError(f"bad json: {e.msg}", position=e.pos, raw=raw)
    if not isinstance(obj, dict):
        raise DecodeError("message is not an object", raw=raw)
    v = obj.get("v")
    if v != PROTOCOL_VERSION:
        raise DecodeError(f"unsupported protocol version {v!r}", raw=raw)
    kind = obj.get("kind")
    dec = _DECODERS.get(kind)
    if dec is None:
        raise DecodeError(f"unknown kind {kind!r}", raw=raw)
    try:
        body = dec(obj)
    except DecodeError as e:
        raise DecodeError(e.reason, raw=raw)
    except (KeyError, TypeError, ValueError) as e:
        raise DecodeError(f"bad {kind} payload: {e}", raw=raw)
    try:
        return Envelope(str(_req(obj, "id")), str(_req(obj, "sender")),
                        int(_req(obj, "ts")), body)
    except DecodeError as e:
        raise DecodeError(e.reason, raw=raw)
