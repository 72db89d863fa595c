"""Recursive-descent parser for Resh.

Precedence, loosest to tightest (all binary operators left-associative):

    =>   +=>   & !& &! !&!   + !+ +! !+!   |   postfix @ -> <->

A task body is a run of `var` declarations followed by exactly one
expression.  Parenthesized sub-expressions are kept as explicit ``Group``
nodes so that printing and re-parsing round-trips structurally.
"""

from __future__ import annotations

from ..errors import ParseError
from .ast import (
    Action, ActionDecl, AssignMode, Binary, BoolLit, Declaration, DurationLit,
    Group, IntLit, Located, Assigned, ParamType, Pause, Program, PropSpec,
    Repeat, SourceProgram, StringLit, Target, TargetKind, TaskDecl,
    TemporalOp, Term, VarDecl, VarRef, WaitEvent, WaitProp,
)
from .lexer import TokKind, Token, tokenize

_BIN_LEVELS = (
    ("=>",),
    ("+=>",),
    ("&", "!&", "&!", "!&!"),
    ("+", "!+", "+!", "!+!"),
    ("|",),
)

_TYPE_NAMES = {t.value: t for t in ParamType}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.pos]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind is not TokKind.EOF:
            self.pos += 1
        return t

    def fail(self, expected: str):
        t = self.peek()
        found = t.text or "end of input"
        raise ParseError(f"expected {expected}, found {found!r}", t.line, t.col)

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind is TokKind.OP and t.text in ops

    def at_kw(self, *kws: str) -> bool:
        t = self.peek()
        return t.kind is TokKind.KEYWORD and t.text in kws

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            self.fail(f"'{op}'")
        return self.advance()

    def expect_kw(self, kw: str) -> Token:
        if not self.at_kw(kw):
            self.fail(f"'{kw}'")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind is not TokKind.IDENT:
            self.fail(what)
        return self.advance().value  # type: ignore[return-value]

    # -- declarations -------------------------------------------------------

    def parse_program(self) -> Program:
        decls: list[Declaration] = []
        while self.peek().kind is not TokKind.EOF:
            if self.at_kw("action"):
                decls.extend(self.action_decls())
            elif self.at_kw("task"):
                decls.append(self.task_decl())
            elif self.at_kw("var"):
                decls.append(self.var_decl())
            else:
                self.fail("'action', 'task' or 'var' declaration")
        return Program(tuple(decls))

    def action_decls(self) -> list[ActionDecl]:
        self.expect_kw("action")
        out = [self.one_action_decl()]
        while self.at_op(","):
            self.advance()
            out.append(self.one_action_decl())
        return out

    def one_action_decl(self) -> ActionDecl:
        name = self.expect_ident("action name")
        self.expect_op("(")
        sig: list[ParamType] = []
        if not self.at_op(")"):
            sig.append(self.param_type())
            while self.at_op(","):
                self.advance()
                sig.append(self.param_type())
        self.expect_op(")")
        return ActionDecl(name, tuple(sig))

    def param_type(self) -> ParamType:
        t = self.peek()
        if t.kind is TokKind.IDENT and t.text in _TYPE_NAMES:
            self.advance()
            return _TYPE_NAMES[t.text]
        self.fail("type name")
        raise AssertionError

    def task_decl(self) -> TaskDecl:
        self.expect_kw("task")
        name = self.expect_ident("task name")
        self.expect_op("(")
        params = self.param_groups(")")
        self.expect_op(")")
        self.expect_op("{")
        var_decls: list[VarDecl] = []
        while self.at_kw("var"):
            var_decls.append(self.var_decl())
        body = self.term()
        self.expect_op("}")
        return TaskDecl(name, params, tuple(var_decls), body)

    def var_decl(self) -> VarDecl:
        self.expect_kw("var")
        name = self.expect_ident("variable name")
        vtype = self.param_type()
        with_spec: list[PropSpec] = []
        if self.at_kw("with"):
            self.advance()
            with_spec.append(self.prop_literal())
            while self.at_op(","):
                self.advance()
                with_spec.append(self.prop_literal())
        return VarDecl(name, vtype, tuple(with_spec))

    def prop_literal(self) -> PropSpec:
        negated = False
        if self.at_op("!"):
            self.advance()
            negated = True
        first = self.expect_ident("property name")
        owner = None
        prop = first
        if self.at_op("."):
            self.advance()
            owner = first
            prop = self.expect_ident("property name")
        return PropSpec(prop=prop, negated=negated, owner=owner)

    def param_groups(self, closer: str):
        """Go-style parameter lists: ``A, B loc, n int``."""
        items: list[tuple[str, ParamType | None]] = []
        if not self.at_op(closer):
            while True:
                name = self.expect_ident("parameter name")
                ptype = None
                t = self.peek()
                if t.kind is TokKind.IDENT and t.text in _TYPE_NAMES:
                    ptype = self.param_type()
                items.append((name, ptype))
                if self.at_op(","):
                    self.advance()
                    continue
                break
        # propagate each group's trailing type backwards
        out: list[tuple[str, ParamType]] = []
        pending: list[str] = []
        for name, ptype in items:
            pending.append(name)
            if ptype is not None:
                out.extend((n, ptype) for n in pending)
                pending = []
        if pending:
            t = self.peek()
            raise ParseError(f"parameter(s) {', '.join(pending)} missing a type", t.line, t.col)
        return tuple(out)

    # -- terms --------------------------------------------------------------

    def term(self) -> Term:
        return self.binary(0)

    def binary(self, level: int) -> Term:
        if level >= len(_BIN_LEVELS):
            return self.postfix()
        lhs = self.binary(level + 1)
        while self.at_op(*_BIN_LEVELS[level]):
            op = TemporalOp(self.advance().text)
            rhs = self.binary(level + 1)
            lhs = Binary(op, lhs, rhs)
        return lhs

    def postfix(self) -> Term:
        t = self.primary()
        while self.at_op("@", "->", "<->"):
            op = self.advance().text
            target = self.target()
            if op == "@":
                t = Located(t, target)
            else:
                t = Assigned(t, AssignMode(op), target)
        return t

    def target(self) -> Target:
        tok = self.peek()
        if tok.kind is TokKind.IDENT:
            self.advance()
            return Target(TargetKind.VAR, tok.value)  # type: ignore[arg-type]
        if tok.kind is TokKind.STRING:
            self.advance()
            return Target(TargetKind.NAME, tok.value)  # type: ignore[arg-type]
        self.fail("location/robot name or variable")
        raise AssertionError

    def primary(self) -> Term:
        t = self.peek()
        if self.at_op("("):
            self.advance()
            inner = self.term()
            self.expect_op(")")
            return Group(inner)
        if self.at_kw("waitevent"):
            self.advance()
            name = self.expect_ident("event name")
            self.expect_op("(")
            params = self.param_groups(")")
            self.expect_op(")")
            return WaitEvent(name, params)
        if self.at_kw("waitprop"):
            self.advance()
            return WaitProp(self.prop_literal())
        if self.at_kw("pause"):
            self.advance()
            d = self.peek()
            if d.kind is not TokKind.DURATION:
                self.fail("duration literal like 5s or 250ms")
            self.advance()
            return Pause(d.value)  # type: ignore[arg-type]
        if self.at_kw("repeat"):
            self.advance()
            body = self.postfix()
            self.expect_kw("untilprop")
            return Repeat(body, self.prop_literal())
        if t.kind is TokKind.IDENT:
            name = self.advance().value
            args: list = []
            if self.at_op("("):
                self.advance()
                if not self.at_op(")"):
                    args.append(self.expr())
                    while self.at_op(","):
                        self.advance()
                        args.append(self.expr())
                self.expect_op(")")
            # Calls to tasks are parsed as Action nodes; the checker
            # re-interprets names bound to tasks.
            return Action(name, tuple(args))  # type: ignore[arg-type]
        self.fail("expression")
        raise AssertionError

    def expr(self):
        t = self.peek()
        if t.kind is TokKind.STRING:
            self.advance()
            return StringLit(t.value)  # type: ignore[arg-type]
        if t.kind is TokKind.INT:
            self.advance()
            return IntLit(t.value)  # type: ignore[arg-type]
        if t.kind is TokKind.DURATION:
            self.advance()
            return DurationLit(t.value)  # type: ignore[arg-type]
        if self.at_kw("true") or self.at_kw("false"):
            return BoolLit(self.advance().text == "true")
        if t.kind is TokKind.IDENT:
            self.advance()
            return VarRef(t.value)  # type: ignore[arg-type]
        self.fail("argument expression")
        raise AssertionError


def parse(src: SourceProgram | str) -> Program:
    if isinstance(src, str):
        src = SourceProgram(src)
    p = Parser(tokenize(src))
    return p.parse_program()


def parse_term(text: str) -> Term:
    """Parse a single expression (used by tests and tooling)."""
    p = Parser(tokenize(SourceProgram(text)))
    t = p.term()
    if p.peek().kind is not TokKind.EOF:
        p.fail("end of input")
    return t
