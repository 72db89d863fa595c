"""Static checking: typing, task macro expansion, recursion rejection.

The checker produces a closed ``TypedProgram``: a single entry body with
every task call inlined, plus the symbol tables the runtime needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Set, Tuple

from .errors import (
    CheckError, CycleError, NonBooleanWithClause, TypeMismatch, UnknownAction,
    UnknownTask, UnknownVariable,
)
from .syntax.ast import (
    Action, ActionDecl, Assigned, Binary, BoolLit, Call, DurationLit, Group,
    IntLit, Located, ParamType, Pause, Program, PropSpec, Repeat, StringLit,
    Target, TargetKind, TaskDecl, Term, VarDecl, VarRef, WaitEvent, WaitProp,
)


@dataclass
class RequirementSet:
    """What a robot variable (or fixed robot name) must be able to do."""

    capabilities: Set[Tuple[str, Tuple[ParamType, ...]]] = field(default_factory=set)
    needs_goto: bool = False
    with_spec: Tuple[PropSpec, ...] = ()


@dataclass
class TypedProgram:
    entry_body: Term                                    # expanded, no Call nodes
    action_table: Dict[str, Tuple[ParamType, ...]]
    var_table: Dict[str, Tuple[ParamType, Tuple[PropSpec, ...]]]
    event_table: Dict[str, Tuple[ParamType, ...]]
    requirements: Dict[str, RequirementSet]             # keyed "var:NAME" / "robot:NAME"


def _expr_type(e, var_table) -> ParamType:
    if isinstance(e, StringLit):
        return ParamType.STRING
    if isinstance(e, IntLit):
        return ParamType.INT
    if isinstance(e, BoolLit):
        return ParamType.BOOL
    if isinstance(e, DurationLit):
        return ParamType.DURATION
    if isinstance(e, VarRef):
        if e.name not in var_table:
            raise UnknownVariable(f"unknown variable {e.name!r}")
        return var_table[e.name][0]
    raise CheckError(f"bad argument expression {e!r}")


# ---------------------------------------------------------------------------
# Call graph / recursion

def _calls_in(term: Term, task_names: Set[str]) -> Set[str]:
    out: Set[str] = set()

    def walk(t: Term):
        if isinstance(t, (Action, Call)) and t.name in task_names:
            out.add(t.name)
        elif isinstance(t, Binary):
            walk(t.lhs)
            walk(t.rhs)
        elif isinstance(t, (Assigned, Located, Group)):
            walk(t.inner)
        elif isinstance(t, Repeat):
            walk(t.body)

    walk(term)
    return out


def detect_recursion(program: Program) -> None:
    """Raise CycleError if the task call graph has a cycle."""
    tasks = {t.name: t for t in program.tasks()}
    names = set(tasks)
    graph = {n: sorted(_calls_in(tasks[n].body, names)) for n in tasks}
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}
    stack: list = []

    def dfs(n: str):
        color[n] = GREY
        stack.append(n)
        for m in graph[n]:
            if color[m] == GREY:
                cycle = stack[stack.index(m):] + [m]
                raise CycleError(cycle)
            if color[m] == WHITE:
                dfs(m)
        stack.pop()
        color[n] = BLACK

    for n in sorted(graph):
        if color[n] == WHITE:
            dfs(n)


# ---------------------------------------------------------------------------
# Macro expansion

class _Expander:
    def __init__(self, program: Program):
        self.tasks = {t.name: t for t in program.tasks()}
        self.fresh_counter = 0
        self.collected_vars: Dict[str, VarDecl] = {}

    def expand_task(self, task: TaskDecl, arg_map: Dict[str, object], rename: Dict[str, str]) -> Term:
        for v in task.var_decls:
            fresh = v.name if v.name not in self.collected_vars and v.name not in rename else f"{v.name}${self.fresh_counter}"
            if fresh != v.name:
                self.fresh_counter += 1
            rename = {**rename, v.name: fresh}
            self.collected_vars[fresh] = VarDecl(fresh, v.var_type, v.with_spec)
        return self.expand_term(task.body, arg_map, rename)

    def expand_term(self, t: Term, arg_map: Dict[str, object], rename: Dict[str, str]) -> Term:
        if isinstance(t, (Action, Call)) and t.name in self.tasks:
            callee = self.tasks[t.name]
            if len(t.args) != len(callee.params):
                raise TypeMismatch(f"call to {t.name}", f"{len(callee.params)} args", f"{len(t.args)} args")
            inner_args: Dict[str, object] = {}
            for (pname, _ptype), arg in zip(callee.params, t.args):
                inner_args[pname] = self.subst_expr(arg, arg_map, rename)
            return self.expand_task(callee, inner_args, {})
        if isinstance(t, Action):
            return Action(t.name, tuple(self.subst_expr(a, arg_map, rename) for a in t.args))
        if isinstance(t, Binary):
            return Binary(t.op, self.expand_term(t.lhs, arg_map, rename), self.expand_term(t.rhs, arg_map, rename))
        if isinstance(t, Assigned):
            return Assigned(self.expand_term(t.inner, arg_map, rename), t.mode,
                            self.subst_target(t.target, arg_map, rename))
        if isinstance(t, Located):
            return Located(self.expand_term(t.inner, arg_map, rename),
                           self.subst_target(t.loc, arg_map, rename))
        if isinstance(t, Group):
            return Group(self.expand_term(t.inner, arg_map, rename))
        if isinstance(t, Repeat):
            return Repeat(self.expand_term(t.body, arg_map, rename),
                          self.subst_prop(t.until, rename))
        if isinstance(t, WaitProp):
            return WaitProp(self.subst_prop(t.spec, rename))
        if isinstance(t, (WaitEvent, Pause)):
            return t
        raise CheckError(f"cannot expand {t!r}")

    def subst_expr(self, e, arg_map, rename):
        if isinstance(e, VarRef):
            if e.name in arg_map:
                return arg_map[e.name]
            if e.name in rename:
                return VarRef(rename[e.name])
        return e

    def subst_target(self, target: Target, arg_map, rename) -> Target:
        if target.kind is TargetKind.VAR:
            if target.value in arg_map:
                v = arg_map[target.value]
                if isinstance(v, StringLit):
                    return Target(TargetKind.NAME, v.value)
                if isinstance(v, VarRef):
                    return Target(TargetKind.VAR, v.name)
                raise TypeMismatch("assignment/location target", "robot/loc variable or string", v)
            if target.value in rename:
                return Target(TargetKind.VAR, rename[target.value])
        return target

    def subst_prop(self, spec: PropSpec, rename) -> PropSpec:
        if spec.owner and spec.owner in rename:
            return PropSpec(spec.prop, spec.negated, rename[spec.owner])
        return spec


def expand(program: Program) -> Tuple[Term, Dict[str, VarDecl]]:
    """Inline every task call into main's body; returns (body, var decls)."""
    tasks = {t.name: t for t in program.tasks()}
    if "main" not in tasks:
        raise UnknownTask("program has no task named 'main'")
    detect_recursion(program)
    ex = _Expander(program)
    for v in program.top_vars():
        ex.collected_vars[v.name] = v
    body = ex.expand_task(tasks["main"], {}, {})
    return body, ex.collected_vars


# ---------------------------------------------------------------------------
# Type checking

def check(program: Program) -> TypedProgram:
    action_table: Dict[str, Tuple[ParamType, ...]] = {}
    for a in program.actions():
        if a.name in action_table:
            raise CheckError(f"duplicate action declaration {a.name!r}")
        action_table[a.name] = a.signature
    seen_tasks: Set[str] = set()
    for t in program.tasks():
        if t.name in seen_tasks:
            raise CheckError(f"duplicate task declaration {t.name!r}")
        if t.name in action_table:
            raise CheckError(f"{t.name!r} declared as both action and task")
        seen_tasks.add(t.name)

    body, var_decls = expand(program)

    var_table: Dict[str, Tuple[ParamType, Tuple[PropSpec, ...]]] = {}
    for name, v in var_decls.items():
        if v.with_spec and v.var_type is not ParamType.ROBOT:
            raise NonBooleanWithClause(f"with-clause on non-robot variable {name!r}")
        var_table[name] = (v.var_type, v.with_spec)

    event_table: Dict[str, Tuple[ParamType, ...]] = {}
    requirements: Dict[str, RequirementSet] = {}

    def req_key(target: Target) -> str:
        return ("var:" if target.kind is TargetKind.VAR else "robot:") + target.value

    def req(target: Target) -> RequirementSet:
        key = req_key(target)
        if key not in requirements:
            ws: Tuple[PropSpec, ...] = ()
            if target.kind is TargetKind.VAR and target.value in var_table:
                ws = var_table[target.value][1]
            requirements[key] = RequirementSet(with_spec=ws)
        return requirements[key]

    def check_target_var(target: Target, want: ParamType, ctx: str):
        if target.kind is TargetKind.VAR:
            if target.value not in var_table:
                raise UnknownVariable(f"{ctx}: unknown variable {target.value!r}")
            got = var_table[target.value][0]
            if got is not want:
                raise TypeMismatch(ctx, want.value, got.value)

    def walk(t: Term, assign: Optional[Target], located: bool):
        if isinstance(t, Action):
            if t.name not in action_table:
                raise UnknownAction(f"unknown action {t.name!r}")
            sig = action_table[t.name]
            if len(t.args) != len(sig):
                raise TypeMismatch(f"action {t.name}", f"{len(sig)} args", f"{len(t.args)} args")
            for i, (arg, want) in enumerate(zip(t.args, sig)):
                got = _expr_type(arg, var_table)
                if got is not want:
                    raise TypeMismatch(f"action {t.name} argument {i + 1}", want.value, got.value)
            if assign is not None:
                r = req(assign)
                r.capabilities.add((t.name, sig))
                if located:
                    r.needs_goto = True
        elif isinstance(t, WaitEvent):
            if t.name in event_table and event_table[t.name] != tuple(p for _, p in t.params):
                raise TypeMismatch(f"event {t.name}", event_table[t.name],
                                   tuple(p for _, p in t.params))
            event_table[t.name] = tuple(p for _, p in t.params)
            for pname, ptype in t.params:
                if pname in var_table and var_table[pname][0] is not ptype:
                    raise CheckError(f"event parameter {pname!r} clashes with a declared variable")
                var_table.setdefault(pname, (ptype, ()))
        elif isinstance(t, WaitProp):
            if t.spec.owner is not None:
                if t.spec.owner not in var_table:
                    raise UnknownVariable(f"waitprop: unknown variable {t.spec.owner!r}")
                if var_table[t.spec.owner][0] is not ParamType.ROBOT:
                    raise TypeMismatch("waitprop owner", "robot", var_table[t.spec.owner][0].value)
        elif isinstance(t, Pause):
            pass
        elif isinstance(t, Repeat):
            walk(t.body, assign, located)
            if t.until.owner is not None and t.until.owner not in var_table:
                raise UnknownVariable(f"untilprop: unknown variable {t.until.owner!r}")
        elif isinstance(t, Binary):
            walk(t.lhs, assign, located)
            walk(t.rhs, assign, located)
        elif isinstance(t, Assigned):
            check_target_var(t.target, ParamType.ROBOT, "-> target")
            walk(t.inner, t.target, located)
        elif isinstance(t, Located):
            check_target_var(t.loc, ParamType.LOC, "@ target")
            walk(t.inner, assign, True)
        elif isinstance(t, Group):
            walk(t.inner, assign, located)
        elif isinstance(t, Call):
            raise CheckError("internal: Call survived expansion")
        else:
            raise CheckError(f"cannot check {t!r}")

    walk(body, None, False)
    return TypedProgram(body, action_table, var_table, event_table, requirements)
