"""AST node definitions for Resh programs.

All nodes are frozen dataclasses so ASTs can be hashed, compared
structurally and used as dict keys (the expander and the temporal engine
both rely on this).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union


class ParamType(str, Enum):
    ROBOT = "robot"
    LOC = "loc"
    INT = "int"
    BOOL = "bool"
    STRING = "string"
    DURATION = "duration"


class TemporalOp(str, Enum):
    AND = "&"
    SEQ = "=>"
    PAR = "+"
    PARSEQ = "+=>"
    CHOICE = "|"
    LAND = "!&"    # lhs cut short if rhs finishes first
    RAND = "&!"    # rhs cut short if lhs finishes first
    BAND = "!&!"   # symmetric
    LPAR = "!+"
    RPAR = "+!"
    BPAR = "!+!"


#: Operators whose operands start at nominally the same time.
PAR_OPS = frozenset({TemporalOp.PAR, TemporalOp.LPAR, TemporalOp.RPAR, TemporalOp.BPAR})
#: Short-circuit operators: (op, lhs cancellable, rhs cancellable).
CUT_LHS = frozenset({TemporalOp.LAND, TemporalOp.BAND, TemporalOp.LPAR, TemporalOp.BPAR})
CUT_RHS = frozenset({TemporalOp.RAND, TemporalOp.BAND, TemporalOp.RPAR, TemporalOp.BPAR})


class AssignMode(str, Enum):
    SHARED = "->"
    EXCLUSIVE = "<->"


class TargetKind(str, Enum):
    VAR = "var"      # identifier: declared robot/loc variable
    NAME = "name"    # string literal: symbolic external name


@dataclass(frozen=True)
class Target:
    kind: TargetKind
    value: str


# ---------------------------------------------------------------------------
# Argument expressions

@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class DurationLit:
    millis: int


@dataclass(frozen=True)
class VarRef:
    name: str


Expr = Union[StringLit, IntLit, BoolLit, DurationLit, VarRef]


# ---------------------------------------------------------------------------
# Terms

@dataclass(frozen=True)
class PropSpec:
    prop: str
    negated: bool = False
    owner: Optional[str] = None  # robot variable, as in r.loaded

    def __str__(self) -> str:
        neg = "!" if self.negated else ""
        own = f"{self.owner}." if self.owner else ""
        return f"{neg}{own}{self.prop}"


@dataclass(frozen=True)
class Action:
    name: str
    args: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class WaitEvent:
    name: str
    params: Tuple[Tuple[str, ParamType], ...] = ()


@dataclass(frozen=True)
class WaitProp:
    spec: PropSpec


@dataclass(frozen=True)
class Pause:
    millis: int


@dataclass(frozen=True)
class Repeat:
    body: "Term"
    until: PropSpec


@dataclass(frozen=True)
class Binary:
    op: TemporalOp
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class Assigned:
    inner: "Term"
    mode: AssignMode
    target: Target


@dataclass(frozen=True)
class Located:
    inner: "Term"
    loc: Target


@dataclass(frozen=True)
class Group:
    inner: "Term"


@dataclass(frozen=True)
class Call:
    task: str
    args: Tuple[Expr, ...] = ()


Term = Union[Action, WaitEvent, WaitProp, Pause, Repeat, Binary, Assigned, Located, Group, Call]


# ---------------------------------------------------------------------------
# Declarations

@dataclass(frozen=True)
class ActionDecl:
    name: str
    signature: Tuple[ParamType, ...] = ()


@dataclass(frozen=True)
class VarDecl:
    name: str
    var_type: ParamType
    with_spec: Tuple[PropSpec, ...] = ()  # conjunction of boolean prop literals


@dataclass(frozen=True)
class TaskDecl:
    name: str
    params: Tuple[Tuple[str, ParamType], ...]
    var_decls: Tuple[VarDecl, ...]
    body: Term


Declaration = Union[ActionDecl, VarDecl, TaskDecl]


@dataclass(frozen=True)
class Program:
    decls: Tuple[Declaration, ...] = ()

    def actions(self) -> Tuple[ActionDecl, ...]:
        return tuple(d for d in self.decls if isinstance(d, ActionDecl))

    def tasks(self) -> Tuple[TaskDecl, ...]:
        return tuple(d for d in self.decls if isinstance(d, TaskDecl))

    def top_vars(self) -> Tuple[VarDecl, ...]:
        return tuple(d for d in self.decls if isinstance(d, VarDecl))


@dataclass(frozen=True)
class SourceProgram:
    text: str
    origin: str = "<inline>"
