"""Canonical source rendering of Resh ASTs.

``parse(pretty_print(p))`` is structurally equal to ``p`` provided ``p``
carries an explicit ``Group`` wherever the grammar would require
parentheses; ``needs_group`` tells generators and rewriters where that is.
"""

from __future__ import annotations

from .ast import (
    Action, ActionDecl, Assigned, Binary, BoolLit, DurationLit, Group, IntLit,
    Located, Pause, Program, PropSpec, Repeat, StringLit, TaskDecl, TemporalOp,
    Term, VarDecl, VarRef, WaitEvent, WaitProp,
)

_LEVEL = {
    TemporalOp.SEQ: 0,
    TemporalOp.PARSEQ: 1,
    TemporalOp.AND: 2, TemporalOp.LAND: 2, TemporalOp.RAND: 2, TemporalOp.BAND: 2,
    TemporalOp.PAR: 3, TemporalOp.LPAR: 3, TemporalOp.RPAR: 3, TemporalOp.BPAR: 3,
    TemporalOp.CHOICE: 4,
}
_POSTFIX_LEVEL = 5


def _level(t: Term) -> int:
    if isinstance(t, Binary):
        return _LEVEL[t.op]
    if isinstance(t, (Assigned, Located)):
        return _POSTFIX_LEVEL
    return 6  # atoms and explicit groups


def needs_group(child: Term, parent_level: int, right_side: bool) -> bool:
    cl = _level(child)
    if cl > parent_level:
        return False
    if cl < parent_level:
        return True
    return right_side  # equal level on the right re-associates


def _dur(millis: int) -> str:
    if millis % 1000 == 0:
        return f"{millis // 1000}s"
    return f"{millis}ms"


def _expr(e) -> str:
    if isinstance(e, StringLit):
        escaped = e.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, DurationLit):
        return _dur(e.millis)
    if isinstance(e, VarRef):
        return e.name
    raise TypeError(f"not an expression: {e!r}")


def _target(t) -> str:
    from .ast import TargetKind
    if t.kind is TargetKind.NAME:
        return _expr(StringLit(t.value))
    return t.value


def _params(params) -> str:
    # re-group runs that share a type, Go style
    parts = []
    i = 0
    while i < len(params):
        j = i
        while j + 1 < len(params) and params[j + 1][1] == params[i][1]:
            j += 1
        names = ", ".join(p[0] for p in params[i:j + 1])
        parts.append(f"{names} {params[i][1].value}")
        i = j + 1
    return ", ".join(parts)


def print_term(t: Term) -> str:
    if isinstance(t, Action):
        if t.args:
            return f"{t.name}(" + ", ".join(_expr(a) for a in t.args) + ")"
        return t.name
    if isinstance(t, WaitEvent):
        return f"waitevent {t.name}({_params(t.params)})"
    if isinstance(t, WaitProp):
        return f"waitprop {t.spec}"
    if isinstance(t, Pause):
        return f"pause {_dur(t.millis)}"
    if isinstance(t, Repeat):
        body = print_term(t.body)
        if _level(t.body) < _POSTFIX_LEVEL:
            body = f"({body})"
        return f"repeat {body} untilprop {t.until}"
    if isinstance(t, Binary):
        lhs, rhs = print_term(t.lhs), print_term(t.rhs)
        lvl = _LEVEL[t.op]
        if needs_group(t.lhs, lvl, right_side=False):
            lhs = f"({lhs})"
        if needs_group(t.rhs, lvl, right_side=True):
            rhs = f"({rhs})"
        return f"{lhs} {t.op.value} {rhs}"
    if isinstance(t, Assigned):
        inner = print_term(t.inner)
        if _level(t.inner) < _POSTFIX_LEVEL:
            inner = f"({inner})"
        return f"{inner} {t.mode.value} {_target(t.target)}"
    if isinstance(t, Located):
        inner = print_term(t.inner)
        if _level(t.inner) < _POSTFIX_LEVEL:
            inner = f"({inner})"
        return f"{inner} @ {_target(t.loc)}"
    if isinstance(t, Group):
        return f"({print_term(t.inner)})"
    raise TypeError(f"not a term: {t!r}")


def _var_decl(d: VarDecl) -> str:
    s = f"var {d.name} {d.var_type.value}"
    if d.with_spec:
        s += " with " + ", ".join(str(p) for p in d.with_spec)
    return s


def pretty_print(p: Program) -> str:
    lines: list[str] = []
    for d in p.decls:
        if isinstance(d, ActionDecl):
            sig = ", ".join(s.value for s in d.signature)
            lines.append(f"action {d.name}({sig})")
        elif isinstance(d, VarDecl):
            lines.append(_var_decl(d))
        elif isinstance(d, TaskDecl):
            lines.append(f"task {d.name}({_params(d.params)}) {{")
            for v in d.var_decls:
                lines.append(f"  {_var_decl(v)}")
            lines.append(f"  {print_term(d.body)}")
            lines.append("}")
        else:
            raise TypeError(f"not a declaration: {d!r}")
    return "\n".join(lines) + "\n"
