"""Denotational semantics: compositional automata over timing-diagram letters.

Each scheduling-term node denotes a small nondeterministic automaton.
Configurations are nested tuples; composition is structural, one
combinator per operator.  Silent moves (wait resolution, loop decisions)
are epsilon transitions taken between letters.  A letter is consumed in
two phases, terminations then initiations, with forced structural
normalization (short-circuit cuts, choice commits, loop boundaries)
applied after every move.

This module is a second, independent route to the word language of a
term.  It shares no execution logic with the operational route in
``state``; agreement of the two is checked by the test suite.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, Iterator, Optional, Tuple

from ..syntax.ast import TemporalOp
from .state import Letter, Status
from .term import SAtom, SLoop, SOp, STerm

Cfg = Tuple
XMap = Dict[str, Status]


class Node:
    """Automaton denotation of one scheduling-term node."""

    uids: FrozenSet[str]
    obs: FrozenSet[str]

    def initial(self) -> Cfg:
        raise NotImplementedError

    def eps(self, cfg: Cfg) -> Iterator[Cfg]:
        raise NotImplementedError

    def step_x(self, cfg: Cfg, x: XMap) -> Optional[Cfg]:
        raise NotImplementedError

    def step_y(self, cfg: Cfg, y: FrozenSet[str]) -> Optional[Cfg]:
        raise NotImplementedError

    def accepting(self, cfg: Cfg) -> bool:
        raise NotImplementedError

    def cancel(self, cfg: Cfg) -> Cfg:
        raise NotImplementedError

    def settled(self, cfg: Cfg) -> bool:
        raise NotImplementedError

    def silent_front(self, cfg: Cfg) -> bool:
        raise NotImplementedError


class ActNode(Node):
    """Observable action leaf: unstarted, running, cancelling, done, cancelled."""

    def __init__(self, uid: str):
        self.uid = uid
        self.uids = frozenset({uid})
        self.obs = frozenset({uid})

    def initial(self):
        return ("U",)

    def eps(self, cfg):
        return iter(())

    def step_x(self, cfg, x):
        if self.uid not in x:
            return cfg
        status = x[self.uid]
        if cfg[0] == "R" and status is Status.SUCCEEDED:
            return ("F",)
        if cfg[0] == "C" and status is Status.TERMINATED:
            return ("X",)
        return None

    def step_y(self, cfg, y):
        if self.uid not in y:
            return cfg
        return ("R",) if cfg[0] == "U" else None

    def accepting(self, cfg):
        return cfg[0] == "F"

    def cancel(self, cfg):
        if cfg[0] == "U":
            return ("X",)
        if cfg[0] == "R":
            return ("C",)
        return cfg

    def settled(self, cfg):
        return cfg[0] not in ("R", "C")

    def silent_front(self, cfg):
        return False


class IntNode(Node):
    """Internal leaf (wait or pause): pending, fired, cancelled."""

    def __init__(self, uid: str):
        self.uid = uid
        self.uids = frozenset({uid})
        self.obs = frozenset()

    def initial(self):
        return ("P",)

    def eps(self, cfg):
        if cfg[0] == "P":
            yield ("F",)

    def step_x(self, cfg, x):
        return None if self.uid in x else cfg

    def step_y(self, cfg, y):
        return None if self.uid in y else cfg

    def accepting(self, cfg):
        return cfg[0] == "F"

    def cancel(self, cfg):
        return ("X",) if cfg[0] == "P" else cfg

    def settled(self, cfg):
        return True

    def silent_front(self, cfg):
        return True


class SeqNode(Node):
    """=> : run lhs to completion, then rhs.  Handoff may share a letter."""

    def __init__(self, l: Node, r: Node):
        self.l, self.r = l, r
        self.uids = l.uids | r.uids
        self.obs = l.obs | r.obs

    def initial(self):
        return ("L", self.l.initial())

    def eps(self, cfg):
        ph, c = cfg
        if ph == "L":
            for c2 in self.l.eps(c):
                yield ("L", c2)
            if self.l.accepting(c):
                yield ("R", self.r.initial())
        elif ph == "R":
            for c2 in self.r.eps(c):
                yield ("R", c2)

    def step_x(self, cfg, x):
        ph, c = cfg
        if ph in ("L", "Lx"):
            if any(u in x for u in self.r.uids):
                return None
            c2 = self.l.step_x(c, x)
            return None if c2 is None else (ph, c2)
        if any(u in x for u in self.l.uids):
            return None
        c2 = self.r.step_x(c, x)
        return None if c2 is None else (ph, c2)

    def step_y(self, cfg, y):
        ph, c = cfg
        yl = y & self.l.obs
        yr = y & self.r.obs
        if ph == "L":
            if yr:
                if yl or not self.l.accepting(c):
                    return None
                c2 = self.r.step_y(self.r.initial(), yr)
                return None if c2 is None else ("R", c2)
            c2 = self.l.step_y(c, yl)
            return None if c2 is None else ("L", c2)
        if ph == "R":
            if yl:
                return None
            c2 = self.r.step_y(c, yr)
            return None if c2 is None else ("R", c2)
        return cfg if not y else None

    def accepting(self, cfg):
        return cfg[0] == "R" and self.r.accepting(cfg[1])

    def cancel(self, cfg):
        ph, c = cfg
        if ph in ("L", "Lx"):
            return ("Lx", self.l.cancel(c))
        return ("Rx", self.r.cancel(c))

    def settled(self, cfg):
        ph, c = cfg
        return (self.l if ph in ("L", "Lx") else self.r).settled(c)

    def silent_front(self, cfg):
        ph, c = cfg
        return (self.l if ph == "L" else self.r).silent_front(c)


_CUT_L = (TemporalOp.LAND, TemporalOp.LPAR)
_CUT_R = (TemporalOp.RAND, TemporalOp.RPAR)
_CUT_B = (TemporalOp.BAND, TemporalOp.BPAR)
_PLUS = (TemporalOp.PAR, TemporalOp.LPAR, TemporalOp.RPAR, TemporalOp.BPAR,
         TemporalOp.PARSEQ)


class ConcNode(Node):
    """Concurrent composition: the & family, the + family, and +=>.

    Phases: P (co-start pending, + family only), G (general), W0/W1
    (one side won a short-circuit cut, the other winds down), Z
    (cancelled from above).
    """

    def __init__(self, op: TemporalOp, l: Node, r: Node):
        self.op = op
        self.l, self.r = l, r
        self.uids = l.uids | r.uids
        self.obs = l.obs | r.obs

    def initial(self):
        ph = "P" if self.op in _PLUS else "G"
        return self._norm((ph, self.l.initial(), self.r.initial()))

    def _norm(self, cfg):
        ph, c0, c1 = cfg
        if ph == "P":
            sf0 = self.l.silent_front(c0)
            sf1 = self.r.silent_front(c1)
            ready = sf0 if self.op is TemporalOp.PARSEQ else (sf0 or sf1)
            if ready:
                ph = "G"
        if ph == "G":
            a0 = self.l.accepting(c0)
            a1 = self.r.accepting(c1)
            if self.op in _CUT_L and a1 and not a0:
                return ("W1", self.l.cancel(c0), c1)
            if self.op in _CUT_R and a0 and not a1:
                return ("W0", c0, self.r.cancel(c1))
            if self.op in _CUT_B:
                if a0 and not a1:
                    return ("W0", c0, self.r.cancel(c1))
                if a1 and not a0:
                    return ("W1", self.l.cancel(c0), c1)
        return (ph, c0, c1)

    def eps(self, cfg):
        ph, c0, c1 = cfg
        if ph in ("P", "G"):
            for c in self.l.eps(c0):
                yield self._norm(("G", c, c1))
            # in the co-start phase a +=> right side is not yet armed
            if not (ph == "P" and self.op is TemporalOp.PARSEQ):
                for c in self.r.eps(c1):
                    yield self._norm(("G", c0, c))
        elif ph == "W0":
            for c in self.l.eps(c0):
                yield ("W0", c, c1)
        elif ph == "W1":
            for c in self.r.eps(c1):
                yield ("W1", c0, c)

    def step_x(self, cfg, x):
        ph, c0, c1 = cfg
        if ph == "P":
            return cfg if not any(u in x for u in self.uids) else None
        c0b = self.l.step_x(c0, x)
        c1b = self.r.step_x(c1, x)
        if c0b is None or c1b is None:
            return None
        if ph == "G":
            return self._norm(("G", c0b, c1b))
        return (ph, c0b, c1b)

    def step_y(self, cfg, y):
        ph, c0, c1 = cfg
        y0 = y & self.l.obs
        y1 = y & self.r.obs
        if ph == "P":
            if not y0 and not y1:
                return cfg
            if self.op is TemporalOp.PARSEQ:
                if not y0:
                    return None            # rhs may not start before lhs
            elif not (y0 and y1):
                return None                # plain + family must co-start
            c0b = self.l.step_y(c0, y0)
            c1b = self.r.step_y(c1, y1)
            if c0b is None or c1b is None:
                return None
            return self._norm(("G", c0b, c1b))
        if ph == "W0" and y1:
            return None
        if ph == "W1" and y0:
            return None
        if ph == "Z" and y:
            return None
        c0b = self.l.step_y(c0, y0)
        c1b = self.r.step_y(c1, y1)
        if c0b is None or c1b is None:
            return None
        out = (ph, c0b, c1b)
        return self._norm(out) if ph == "G" else out

    def accepting(self, cfg):
        ph, c0, c1 = cfg
        if ph in ("P", "G"):
            return self.l.accepting(c0) and self.r.accepting(c1)
        if ph == "W0":
            return self.l.accepting(c0) and self.r.settled(c1)
        if ph == "W1":
            return self.r.accepting(c1) and self.l.settled(c0)
        return False

    def cancel(self, cfg):
        _, c0, c1 = cfg
        return ("Z", self.l.cancel(c0), self.r.cancel(c1))

    def settled(self, cfg):
        _, c0, c1 = cfg
        return self.l.settled(c0) and self.r.settled(c1)

    def silent_front(self, cfg):
        _, c0, c1 = cfg
        sf0 = self.l.silent_front(c0)
        sf1 = self.r.silent_front(c1)
        if self.op is TemporalOp.PARSEQ:
            return sf0
        return sf0 or sf1


class ChoiceNode(Node):
    """| : both branches listen; the first observable start commits."""

    def __init__(self, l: Node, r: Node):
        self.l, self.r = l, r
        self.uids = l.uids | r.uids
        self.obs = l.obs | r.obs

    def initial(self):
        return self._norm(("U", self.l.initial(), self.r.initial()))

    def _norm(self, cfg):
        if cfg[0] != "U":
            return cfg
        _, c0, c1 = cfg
        # a branch that completes without observable work wins the choice
        if self.l.accepting(c0):
            return ("0", c0)
        if self.r.accepting(c1):
            return ("1", c1)
        return cfg

    def eps(self, cfg):
        if cfg[0] == "U":
            _, c0, c1 = cfg
            for c in self.l.eps(c0):
                yield self._norm(("U", c, c1))
            for c in self.r.eps(c1):
                yield self._norm(("U", c0, c))
        elif cfg[0] == "0":
            for c in self.l.eps(cfg[1]):
                yield ("0", c)
        elif cfg[0] == "1":
            for c in self.r.eps(cfg[1]):
                yield ("1", c)

    def step_x(self, cfg, x):
        tag = cfg[0]
        if tag == "U":
            return cfg if not any(u in x for u in self.uids) else None
        if tag in ("0", "x0"):
            if any(u in x for u in self.r.uids):
                return None
            c = self.l.step_x(cfg[1], x)
            return None if c is None else (tag, c)
        if tag in ("1", "x1"):
            if any(u in x for u in self.l.uids):
                return None
            c = self.r.step_x(cfg[1], x)
            return None if c is None else (tag, c)
        return cfg if not any(u in x for u in self.uids) else None

    def step_y(self, cfg, y):
        tag = cfg[0]
        y0 = y & self.l.obs
        y1 = y & self.r.obs
        if tag == "U":
            if y0 and y1:
                return None
            if y0:
                c = self.l.step_y(cfg[1], y0)
                return None if c is None else ("0", c)
            if y1:
                c = self.r.step_y(cfg[2], y1)
                return None if c is None else ("1", c)
            return cfg
        if tag == "0":
            if y1:
                return None
            c = self.l.step_y(cfg[1], y0)
            return None if c is None else ("0", c)
        if tag == "1":
            if y0:
                return None
            c = self.r.step_y(cfg[1], y1)
            return None if c is None else ("1", c)
        return cfg if not y else None

    def accepting(self, cfg):
        if cfg[0] == "0":
            return self.l.accepting(cfg[1])
        if cfg[0] == "1":
            return self.r.accepting(cfg[1])
        return False

    def cancel(self, cfg):
        tag = cfg[0]
        if tag == "U":
            return ("xU",)       # nothing observable ran; settles silently
        if tag == "0":
            return ("x0", self.l.cancel(cfg[1]))
        if tag == "1":
            return ("x1", self.r.cancel(cfg[1]))
        return cfg

    def settled(self, cfg):
        tag = cfg[0]
        if tag == "U" or tag == "xU":
            return True
        if tag in ("0", "x0"):
            return self.l.settled(cfg[1])
        return self.r.settled(cfg[1])

    def silent_front(self, cfg):
        if cfg[0] == "U":
            return self.l.silent_front(cfg[1]) or self.r.silent_front(cfg[2])
        if cfg[0] == "0":
            return self.l.silent_front(cfg[1])
        if cfg[0] == "1":
            return self.r.silent_front(cfg[1])
        return True


class LoopNode(Node):
    """repeat ... untilprop: boundary decisions are silent moves."""

    def __init__(self, body: Node):
        self.body = body
        self.uids = body.uids
        self.obs = body.obs

    def initial(self):
        return ("b",)

    def _norm(self, cfg):
        if cfg[0] == "r" and self.body.accepting(cfg[1]):
            return ("b",)
        return cfg

    def eps(self, cfg):
        if cfg[0] == "b":
            yield ("d",)
            yield self._norm(("r", self.body.initial()))
        elif cfg[0] == "r":
            for c in self.body.eps(cfg[1]):
                yield self._norm(("r", c))

    def step_x(self, cfg, x):
        if cfg[0] in ("r", "x") and cfg[1] is not None:
            c = self.body.step_x(cfg[1], x)
            if c is None:
                return None
            return self._norm((cfg[0], c)) if cfg[0] == "r" else (cfg[0], c)
        return cfg if not any(u in x for u in self.uids) else None

    def step_y(self, cfg, y):
        if cfg[0] == "r":
            c = self.body.step_y(cfg[1], y & self.obs)
            return None if c is None else self._norm(("r", c))
        return cfg if not (y & self.obs) else None

    def accepting(self, cfg):
        return cfg[0] == "d"

    def cancel(self, cfg):
        if cfg[0] == "r":
            return ("x", self.body.cancel(cfg[1]))
        if cfg[0] == "b":
            return ("x", None)
        return cfg

    def settled(self, cfg):
        if cfg[0] in ("r", "x") and len(cfg) > 1 and cfg[1] is not None:
            return self.body.settled(cfg[1])
        return True

    def silent_front(self, cfg):
        return True


def build(term: STerm) -> Node:
    """Denote a scheduling term as a compositional automaton."""
    if isinstance(term, SAtom):
        return ActNode(term.uid) if term.observable else IntNode(term.uid)
    if isinstance(term, SLoop):
        return LoopNode(build(term.body))
    l = build(term.lhs)
    r = build(term.rhs)
    if term.op is TemporalOp.SEQ:
        return SeqNode(l, r)
    if term.op is TemporalOp.CHOICE:
        return ChoiceNode(l, r)
    return ConcNode(term.op, l, r)


class EventAutomaton:
    """Subset view of a node: epsilon-closed config sets stepped by letters."""

    def __init__(self, node: Node):
        self.node = node

    def closure(self, cfgs: Iterable[Cfg]) -> FrozenSet[Cfg]:
        seen = set(cfgs)
        frontier = list(seen)
        while frontier:
            c = frontier.pop()
            for c2 in self.node.eps(c):
                if c2 not in seen:
                    seen.add(c2)
                    frontier.append(c2)
        return frozenset(seen)

    def initial_state(self) -> FrozenSet[Cfg]:
        return self.closure([self.node.initial()])

    def step(self, state: FrozenSet[Cfg], letter: Letter) -> FrozenSet[Cfg]:
        x = dict(letter.x)
        out = set()
        for cfg in state:
            c = self.node.step_x(cfg, x)
            if c is None:
                continue
            c = self.node.step_y(c, letter.y)
            if c is not None:
                out.add(c)
        return self.closure(out)

    def accepting(self, state: FrozenSet[Cfg]) -> bool:
        return any(self.node.accepting(c) for c in state)

    def accepts(self, word: Iterable[Letter]) -> bool:
        state = self.initial_state()
        for letter in word:
            state = self.step(state, letter)
            if not state:
                return False
        return self.accepting(state)


def automaton_for(term: STerm) -> EventAutomaton:
    return EventAutomaton(build(term))
