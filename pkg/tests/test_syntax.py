"""Lexer, parser, and printer tests, including a round-trip property."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resh.errors import LexError, ParseError
from resh.syntax import (
    Action, AssignMode, Assigned, Binary, BoolLit, DurationLit, Group, IntLit,
    Located, ParamType, Pause, PropSpec, Repeat, StringLit, Target, TargetKind,
    TemporalOp, WaitEvent, WaitProp, parse, parse_term, pretty_print,
    print_term, tokenize,
)
from resh.syntax.printer import needs_group


# ---------------------------------------------------------------------------
# lexer

def kinds(src):
    return [t.kind.name for t in tokenize(src)]


def test_tokenize_operators_longest_match():
    toks = [t.value for t in tokenize("a !&! b !& c &! d !+! e !+ f +! g +=> h")]
    assert toks == ["a", "!&!", "b", "!&", "c", "&!", "d", "!+!", "e",
                    "!+", "f", "+!", "g", "+=>", "h", ""]


def test_tokenize_durations():
    toks = tokenize("pause 5s pause 250ms")
    durs = [t.value for t in toks if t.kind.name == "DURATION"]
    assert durs == [5000, 250]


def test_tokenize_bad_duration_suffix():
    with pytest.raises(LexError):
        tokenize("pause 5m")


def test_tokenize_comments_and_positions():
    toks = tokenize("a // comment\nb")
    assert [t.value for t in toks][:2] == ["a", "b"]
    assert toks[1].line == 2 and toks[1].col == 1


def test_tokenize_string_escapes():
    toks = tokenize('f("he\\"llo\\n")')
    lit = [t for t in toks if t.kind.name == "STRING"][0]
    assert lit.value == 'he"llo\n'


def test_tokenize_unterminated_string():
    with pytest.raises(LexError):
        tokenize('f("oops')


# ---------------------------------------------------------------------------
# parser: precedence and shapes

def test_precedence_seq_loosest():
    t = parse_term("a => b & c")
    assert t == Binary(TemporalOp.SEQ, Action("a"),
                       Binary(TemporalOp.AND, Action("b"), Action("c")))


def test_precedence_choice_tightest_binary():
    t = parse_term("a + b | c")
    assert t == Binary(TemporalOp.PAR, Action("a"),
                       Binary(TemporalOp.CHOICE, Action("b"), Action("c")))


def test_precedence_parseq_between_seq_and_and():
    t = parse_term("a => b +=> c & d")
    assert t == Binary(
        TemporalOp.SEQ, Action("a"),
        Binary(TemporalOp.PARSEQ, Action("b"),
               Binary(TemporalOp.AND, Action("c"), Action("d"))))


def test_left_associativity():
    t = parse_term("a => b => c")
    assert t == Binary(TemporalOp.SEQ,
                       Binary(TemporalOp.SEQ, Action("a"), Action("b")),
                       Action("c"))
    t = parse_term("a & b !& c")
    assert t == Binary(TemporalOp.LAND,
                       Binary(TemporalOp.AND, Action("a"), Action("b")),
                       Action("c"))


def test_postfix_binds_tightest():
    t = parse_term("a | b -> r1")
    assert t == Binary(TemporalOp.CHOICE, Action("a"),
                       Assigned(Action("b"), AssignMode.SHARED,
                                Target(TargetKind.VAR, "r1")))


def test_postfix_stacking():
    t = parse_term('a @ kitchen <-> "rob7"')
    assert t == Assigned(Located(Action("a"), Target(TargetKind.VAR, "kitchen")),
                         AssignMode.EXCLUSIVE, Target(TargetKind.NAME, "rob7"))


def test_group_distributes_postfix():
    t = parse_term("(a => b) -> r")
    assert t == Assigned(Group(Binary(TemporalOp.SEQ, Action("a"), Action("b"))),
                         AssignMode.SHARED, Target(TargetKind.VAR, "r"))


def test_waits_and_pause():
    assert parse_term("waitprop !r.loaded") == WaitProp(PropSpec("loaded", True, "r"))
    assert parse_term("pause 250ms") == Pause(250)
    t = parse_term("waitevent orderPlaced(item string, n int)")
    assert t == WaitEvent("orderPlaced", (("item", ParamType.STRING),
                                          ("n", ParamType.INT)))


def test_repeat_until():
    t = parse_term("repeat (a => b) untilprop done")
    assert t == Repeat(Group(Binary(TemporalOp.SEQ, Action("a"), Action("b"))),
                       PropSpec("done"))


def test_action_args():
    t = parse_term('fetch("mug", 2, true, 5s, x)')
    assert t == Action("fetch", (StringLit("mug"), IntLit(2), BoolLit(True),
                                 DurationLit(5000), "x" and t.args[4]))
    from resh.syntax import VarRef
    assert t.args[4] == VarRef("x")


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as e:
        parse_term("a =>")
    assert e.value.line == 1


def test_program_declarations():
    p = parse("""
        action pick(string)
        var r robot with canPick, !busy
        var dock loc
        task main() {
            pick("mug") -> r @ dock
        }
    """)
    assert [a.name for a in p.actions()] == ["pick"]
    v = p.top_vars()[0]
    assert v.with_spec == (PropSpec("canPick"), PropSpec("busy", True))
    assert len(p.tasks()) == 1


def test_task_params_grouped_types():
    p = parse("""
        action go()
        task main(a, b loc, n int) { go() }
    """)
    assert p.tasks()[0].params == (("a", ParamType.LOC), ("b", ParamType.LOC),
                                   ("n", ParamType.INT))


# ---------------------------------------------------------------------------
# round trip property

_names = st.sampled_from(["a", "b", "c", "pick", "scan"])


def _grouped(child, level, right):
    return Group(child) if needs_group(child, level, right) else child


def _binary(op_level):
    ops = {0: [TemporalOp.SEQ], 1: [TemporalOp.PARSEQ],
           2: [TemporalOp.AND, TemporalOp.LAND, TemporalOp.RAND, TemporalOp.BAND],
           3: [TemporalOp.PAR, TemporalOp.LPAR, TemporalOp.RPAR, TemporalOp.BPAR],
           4: [TemporalOp.CHOICE]}

    def mk(op, l, r):
        lvl = op_level
        return Binary(op, _grouped(l, lvl, False), _grouped(r, lvl, True))

    return st.sampled_from(ops[op_level]), mk


def _terms():
    leaves = st.one_of(
        _names.map(Action),
        st.integers(1, 9999).map(Pause),
        st.sampled_from(["ready", "done"]).map(lambda p: WaitProp(PropSpec(p))),
    )

    def extend(children):
        out = []
        for lvl in range(5):
            opstrat, mk = _binary(lvl)
            out.append(st.builds(mk, opstrat, children, children))
        out.append(children.map(
            lambda t: Assigned(_grouped(t, 5, False), AssignMode.SHARED,
                               Target(TargetKind.VAR, "r"))))
        out.append(children.map(
            lambda t: Located(_grouped(t, 5, False), Target(TargetKind.VAR, "dock"))))
        out.append(children.map(
            lambda t: Repeat(_grouped(t, 5, False), PropSpec("stop"))))
        return st.one_of(out)

    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_terms())
def test_print_parse_round_trip(term):
    assert parse_term(print_term(term)) == term


@settings(max_examples=50, deadline=None)
@given(_terms())
def test_print_is_stable(term):
    src = print_term(term)
    assert print_term(parse_term(src)) == src


def test_program_round_trip():
    src = """action pick(string)
action scan()
var r robot with canPick
task main() {
  var dock loc
  pick("mug") -> r @ dock => scan
}
"""
    p = parse(src)
    assert pretty_print(p) == src
