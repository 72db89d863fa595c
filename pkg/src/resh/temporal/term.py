"""Scheduling terms: the expression tree stripped down for execution.

Each leaf gets a stable uid.  Robot actions are *observable*: their
initiations and terminations form the letters of timing-diagram words.
Waits and pauses are internal: they gate execution but resolve silently
as far as the word language is concerned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

from ..syntax.ast import (
    Action, Assigned, AssignMode, Binary, Expr, Group, Located, Pause,
    PropSpec, Repeat, Target, TemporalOp, Term, WaitEvent, WaitProp,
)


class AtomKind(str, Enum):
    ACTION = "action"
    WAIT_EVENT = "waitevent"
    WAIT_PROP = "waitprop"
    PAUSE = "pause"


@dataclass(frozen=True)
class SAtom:
    uid: str
    kind: AtomKind

    @property
    def observable(self) -> bool:
        return self.kind is AtomKind.ACTION


@dataclass(frozen=True)
class SOp:
    op: TemporalOp
    lhs: "STerm"
    rhs: "STerm"


@dataclass(frozen=True)
class SLoop:
    uid: str
    body: "STerm"


STerm = Union[SAtom, SOp, SLoop]


@dataclass
class AtomInfo:
    """Runtime-facing details for one leaf, keyed by uid."""

    kind: AtomKind
    action: Optional[str] = None
    args: Tuple[Expr, ...] = ()
    assign: Optional[Target] = None
    assign_mode: Optional[AssignMode] = None
    exclusive_scope: Optional[str] = None     # id of the innermost <-> scope
    location: Optional[Target] = None
    event: Optional[str] = None
    event_params: Tuple[Tuple[str, object], ...] = ()
    prop: Optional[PropSpec] = None
    pause_ms: int = 0
    loop_until: Optional[PropSpec] = None


@dataclass
class Lowered:
    root: STerm
    info: Dict[str, AtomInfo]

    def atoms(self) -> Tuple[SAtom, ...]:
        out = []

        def walk(n: STerm):
            if isinstance(n, SAtom):
                out.append(n)
            elif isinstance(n, SOp):
                walk(n.lhs)
                walk(n.rhs)
            else:
                walk(n.body)

        walk(self.root)
        return tuple(out)

    def observable_uids(self) -> frozenset[str]:
        return frozenset(a.uid for a in self.atoms() if a.observable)


def lower(term: Term, prefix: str = "a") -> Lowered:
    """Convert a checked, expanded AST term into a scheduling term."""
    info: Dict[str, AtomInfo] = {}
    counter = 0
    scope_counter = 0

    def fresh(kind: str = "") -> str:
        nonlocal counter
        uid = f"{prefix}{counter}"
        counter += 1
        return uid

    def walk(t: Term, assign: Optional[Target], mode: Optional[AssignMode],
             scope: Optional[str], loc: Optional[Target]) -> STerm:
        nonlocal scope_counter
        if isinstance(t, Action):
            uid = fresh()
            info[uid] = AtomInfo(AtomKind.ACTION, action=t.name, args=t.args,
                                 assign=assign, assign_mode=mode,
                                 exclusive_scope=scope, location=loc)
            return SAtom(uid, AtomKind.ACTION)
        if isinstance(t, WaitEvent):
            uid = fresh()
            info[uid] = AtomInfo(AtomKind.WAIT_EVENT, event=t.name, event_params=t.params)
            return SAtom(uid, AtomKind.WAIT_EVENT)
        if isinstance(t, WaitProp):
            uid = fresh()
            info[uid] = AtomInfo(AtomKind.WAIT_PROP, prop=t.spec)
            return SAtom(uid, AtomKind.WAIT_PROP)
        if isinstance(t, Pause):
            uid = fresh()
            info[uid] = AtomInfo(AtomKind.PAUSE, pause_ms=t.millis)
            return SAtom(uid, AtomKind.PAUSE)
        if isinstance(t, Repeat):
            uid = fresh()
            body = walk(t.body, assign, mode, scope, loc)
            info[uid] = AtomInfo(AtomKind.ACTION, loop_until=t.until)  # kind unused
            return SLoop(uid, body)
        if isinstance(t, Binary):
            return SOp(t.op, walk(t.lhs, assign, mode, scope, loc),
                       walk(t.rhs, assign, mode, scope, loc))
        if isinstance(t, Assigned):
            new_scope = scope
            if t.mode is AssignMode.EXCLUSIVE:
                new_scope = f"x{scope_counter}"
                scope_counter += 1
            return walk(t.inner, t.target, t.mode, new_scope, loc)
        if isinstance(t, Located):
            return walk(t.inner, assign, mode, scope, t.loc)
        if isinstance(t, Group):
            return walk(t.inner, assign, mode, scope, loc)
        raise TypeError(f"cannot lower {t!r}")

    root = walk(term, None, None, None, None)
    return Lowered(root, info)


def atoms_of(term: STerm) -> Tuple[SAtom, ...]:
    out = []

    def walk(n: STerm):
        if isinstance(n, SAtom):
            out.append(n)
        elif isinstance(n, SOp):
            walk(n.lhs)
            walk(n.rhs)
        else:
            walk(n.body)

    walk(term)
    return tuple(out)


def loops_of(term: STerm) -> Tuple[SLoop, ...]:
    out = []

    def walk(n: STerm):
        if isinstance(n, SOp):
            walk(n.lhs)
            walk(n.rhs)
        elif isinstance(n, SLoop):
            out.append(n)
            walk(n.body)

    walk(term)
    return tuple(out)
