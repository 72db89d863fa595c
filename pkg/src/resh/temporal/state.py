"""Operational semantics of the 11 temporal operators.

Execution state is a status assignment over the leaves of a scheduling
term.  A letter is applied in two phases: terminations (X) first, then
initiations (Y).  Between the phases a structural normalization runs:
short-circuit operators cancel the losing side, choices commit, waits
arm, loops reach their boundary.  Internal leaves (waits, pauses) resolve
via explicit epsilon moves between letters, never inside letters.

States are immutable; every transition returns a fresh state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Set, Tuple

from ..errors import IllegalLetter
from ..syntax.ast import TemporalOp
from .term import AtomKind, SAtom, SLoop, SOp, STerm, atoms_of, loops_of


class Status(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    TERMINATED = "terminated"


class AtomState(str, Enum):
    UNSTARTED = "unstarted"
    RUNNING = "running"
    CANCELLING = "cancelling"   # cancel issued, waiting for the agent's ack
    FINISHED = "finished"
    FAILED = "failed"
    CANCELLED = "cancelled"


class LoopPhase(str, Enum):
    BOUNDARY = "boundary"   # between iterations; untilprop decision pending
    RUNNING = "running"
    EXITED = "exited"
    CANCELLED = "cancelled"   # cut short from above; distinct from a normal exit


_ACTIVE = (AtomState.RUNNING, AtomState.CANCELLING)


@dataclass(frozen=True)
class Letter:
    """One step of a timing-diagram word: terminations X, initiations Y."""

    x: FrozenSet[Tuple[str, Status]] = frozenset()
    y: FrozenSet[str] = frozenset()

    def __post_init__(self):
        xids = {uid for uid, _ in self.x}
        if len(xids) != len(self.x):
            raise IllegalLetter("two terminations for one instance in a letter")
        if xids & self.y:
            raise IllegalLetter("instance both terminated and initiated in one letter")

    @property
    def empty(self) -> bool:
        return not self.x and not self.y

    def __repr__(self) -> str:
        xs = ",".join(f"{u}{'#' if s is Status.TERMINATED else ('!' if s is Status.FAILED else '')}"
                      for u, s in sorted(self.x))
        ys = ",".join(sorted(self.y))
        return f"<{{{xs}}},{{{ys}}}>"


Word = Tuple[Letter, ...]

EMPTY_LETTER = Letter()


class ExecState:
    """Immutable execution snapshot for one scheduling term."""

    __slots__ = ("term", "atoms", "loops", "_hash", "_opts")

    def __init__(self, term: STerm, atoms: Dict[str, AtomState],
                 loops: Dict[str, Tuple[int, LoopPhase]]):
        object.__setattr__(self, "term", term)
        object.__setattr__(self, "atoms", dict(atoms))
        object.__setattr__(self, "loops", dict(loops))
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_opts", None)

    def __setattr__(self, *a):
        raise AttributeError("ExecState is immutable")

    def _key(self):
        # iteration counters are engine bookkeeping; two states that differ
        # only in how often a loop has run are semantically the same
        return (tuple(sorted(self.atoms.items())),
                tuple(sorted((u, p) for u, (_, p) in self.loops.items())))

    def __eq__(self, other):
        return isinstance(other, ExecState) and self._key() == other._key()

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        parts = [f"{u}={s.value}" for u, s in sorted(self.atoms.items())]
        parts += [f"{u}=iter{i}/{p.value}" for u, (i, p) in sorted(self.loops.items())]
        return "ExecState(" + " ".join(parts) + ")"

    # -- derived predicates -------------------------------------------------

    def finished(self, node: STerm | None = None) -> bool:
        return _finished(node or self.term, self.atoms, self.loops)

    def failed(self) -> bool:
        return any(s is AtomState.FAILED for s in self.atoms.values())

    def running_observable(self) -> FrozenSet[str]:
        return frozenset(u for u, s in self.atoms.items()
                         if s is AtomState.RUNNING and _is_obs(self.term, u))

    def cancel_obligations(self) -> FrozenSet[str]:
        return frozenset(u for u, s in self.atoms.items() if s is AtomState.CANCELLING)

    def armed_internals(self) -> FrozenSet[str]:
        return frozenset(u for u, s in self.atoms.items()
                         if s is AtomState.RUNNING and not _is_obs(self.term, u))

    def pending_loops(self) -> FrozenSet[str]:
        out: Set[str] = set()
        _pending_loops(self.term, self.atoms, self.loops, out)
        return frozenset(out)

    def start_options(self) -> FrozenSet[FrozenSet[str]]:
        opts = self._opts
        if opts is None:
            opts = frozenset(_start_options(self.term, self.atoms, self.loops))
            object.__setattr__(self, "_opts", opts)
        return opts

    def eligible(self) -> FrozenSet[FrozenSet[str]]:
        """Minimal nonempty start groups permitted in the next letter."""
        opts = [o for o in self.start_options() if o]
        minimal = [o for o in opts if not any(p < o for p in opts)]
        return frozenset(minimal)

    # -- transitions --------------------------------------------------------

    def apply_letter(self, letter: Letter, strict: bool = True) -> "ExecState":
        atoms = dict(self.atoms)
        loops = dict(self.loops)
        for uid, status in letter.x:
            cur = atoms.get(uid)
            if cur is None or not _is_obs(self.term, uid):
                raise IllegalLetter(f"termination for unknown/internal instance {uid}")
            if cur is AtomState.RUNNING:
                if status is Status.SUCCEEDED:
                    atoms[uid] = AtomState.FINISHED
                elif status is Status.FAILED:
                    atoms[uid] = AtomState.FAILED
                elif not strict:
                    atoms[uid] = AtomState.CANCELLED
                else:
                    raise IllegalLetter(f"{uid} is running; only succeeded/failed legal")
            elif cur is AtomState.CANCELLING:
                if status is Status.TERMINATED or not strict:
                    atoms[uid] = AtomState.CANCELLED
                else:
                    raise IllegalLetter(f"{uid} is being cancelled; only terminated legal")
            else:
                raise IllegalLetter(f"termination for {uid} in state {cur.value}")
        _normalize(self.term, atoms, loops)
        if letter.y:
            opts = frozenset(_start_options(self.term, atoms, loops))
            if frozenset(letter.y) not in opts:
                raise IllegalLetter(f"initiation set {sorted(letter.y)} not permitted")
            for uid in letter.y:
                atoms[uid] = AtomState.RUNNING
            _normalize(self.term, atoms, loops)
        return ExecState(self.term, atoms, loops)

    def resolve_internal(self, uid: str) -> "ExecState":
        if self.atoms.get(uid) is not AtomState.RUNNING or _is_obs(self.term, uid):
            raise IllegalLetter(f"{uid} is not an armed internal leaf")
        atoms = dict(self.atoms)
        loops = dict(self.loops)
        atoms[uid] = AtomState.FINISHED
        _normalize(self.term, atoms, loops)
        return ExecState(self.term, atoms, loops)

    def loop_exit(self, uid: str) -> "ExecState":
        if uid not in self.pending_loops():
            raise IllegalLetter(f"loop {uid} is not at a boundary")
        loops = dict(self.loops)
        loops[uid] = (loops[uid][0], LoopPhase.EXITED)
        atoms = dict(self.atoms)
        _normalize(self.term, atoms, loops)
        return ExecState(self.term, atoms, loops)

    def loop_enter(self, uid: str) -> "ExecState":
        if uid not in self.pending_loops():
            raise IllegalLetter(f"loop {uid} is not at a boundary")
        atoms = dict(self.atoms)
        loops = dict(self.loops)
        node = _find_loop(self.term, uid)
        _reset_subtree(node.body, atoms, loops)
        it, _ = loops[uid]
        loops[uid] = (it + 1, LoopPhase.RUNNING)
        _normalize(self.term, atoms, loops)
        return ExecState(self.term, atoms, loops)

    # engine-level override: a movement abort returns the leaf to the pool
    def reset_atom(self, uid: str) -> "ExecState":
        atoms = dict(self.atoms)
        loops = dict(self.loops)
        atoms[uid] = AtomState.UNSTARTED
        _normalize(self.term, atoms, loops)
        return ExecState(self.term, atoms, loops)


def initial_state(term: STerm) -> ExecState:
    atoms = {a.uid: AtomState.UNSTARTED for a in atoms_of(term)}
    loops = {l.uid: (0, LoopPhase.BOUNDARY) for l in loops_of(term)}
    _normalize(term, atoms, loops)
    return ExecState(term, atoms, loops)


# ---------------------------------------------------------------------------
# structural helpers

_OBS_CACHE: Dict[STerm, FrozenSet[str]] = {}


def _is_obs(term: STerm, uid: str) -> bool:
    obs = _OBS_CACHE.get(term)
    if obs is None:
        obs = frozenset(a.uid for a in atoms_of(term) if a.observable)
        _OBS_CACHE[term] = obs
    return uid in obs


def _find_loop(term: STerm, uid: str) -> SLoop:
    for l in loops_of(term):
        if l.uid == uid:
            return l
    raise KeyError(uid)


def _reset_subtree(node: STerm, atoms, loops):
    for a in atoms_of(node):
        atoms[a.uid] = AtomState.UNSTARTED
    for l in loops_of(node):
        loops[l.uid] = (0, LoopPhase.BOUNDARY)


def _finished(node: STerm, atoms, loops) -> bool:
    if isinstance(node, SAtom):
        return atoms[node.uid] is AtomState.FINISHED
    if isinstance(node, SLoop):
        return loops[node.uid][1] is LoopPhase.EXITED
    op = node.op
    fl = _finished(node.lhs, atoms, loops)
    fr = _finished(node.rhs, atoms, loops)
    if op in (TemporalOp.AND, TemporalOp.PAR, TemporalOp.SEQ, TemporalOp.PARSEQ):
        return fl and fr
    if op is TemporalOp.CHOICE:
        return fl or fr
    if op in (TemporalOp.LAND, TemporalOp.LPAR):
        return fr and _settled(node.lhs, atoms, loops)
    if op in (TemporalOp.RAND, TemporalOp.RPAR):
        return fl and _settled(node.rhs, atoms, loops)
    if op in (TemporalOp.BAND, TemporalOp.BPAR):
        return (fl and _settled(node.rhs, atoms, loops)) or \
               (fr and _settled(node.lhs, atoms, loops))
    raise AssertionError(op)


def _settled(node: STerm, atoms, loops) -> bool:
    """No leaf below needs further agent activity (running or awaiting ack)."""
    return all(atoms[a.uid] not in _ACTIVE for a in atoms_of(node))


def _any_started(node: STerm, atoms, loops) -> bool:
    if any(atoms[a.uid] is not AtomState.UNSTARTED for a in atoms_of(node)):
        return True
    return any(loops[l.uid] != (0, LoopPhase.BOUNDARY) for l in loops_of(node))


def _silent_front(node: STerm, atoms, loops) -> bool:
    """Whether the node's execution can begin without an observable initiation."""
    if isinstance(node, SAtom):
        return not node.observable
    if isinstance(node, SLoop):
        return True
    op = node.op
    if op in (TemporalOp.SEQ, TemporalOp.PARSEQ):
        if _finished(node.lhs, atoms, loops):
            return _silent_front(node.rhs, atoms, loops)
        return _silent_front(node.lhs, atoms, loops)
    # all concurrent operators and choice: either side beginning silently
    # begins the node (eager arming starts frontier internals at once)
    return _silent_front(node.lhs, atoms, loops) or _silent_front(node.rhs, atoms, loops)


def _side_ready(node: STerm, atoms, loops) -> bool:
    """True when a +-operand no longer constrains the co-start letter."""
    return _any_started(node, atoms, loops) or _silent_front(node, atoms, loops)


def _progressed(node: STerm, atoms, loops) -> bool:
    """Choice commitment test: an observable leaf started, or the branch finished."""
    for a in atoms_of(node):
        if a.observable and atoms[a.uid] in (AtomState.RUNNING, AtomState.CANCELLING,
                                             AtomState.FINISHED, AtomState.FAILED):
            return True
    return _finished(node, atoms, loops)


def _cancelled_out(node: STerm, atoms, loops) -> bool:
    return all(atoms[a.uid] in (AtomState.CANCELLED, AtomState.FINISHED, AtomState.FAILED)
               for a in atoms_of(node))


def _cancel(node: STerm, atoms, loops) -> bool:
    changed = False
    for a in atoms_of(node):
        s = atoms[a.uid]
        if s is AtomState.UNSTARTED:
            atoms[a.uid] = AtomState.CANCELLED
            changed = True
        elif s is AtomState.RUNNING:
            atoms[a.uid] = AtomState.CANCELLING if a.observable else AtomState.CANCELLED
            changed = True
    for l in loops_of(node):
        it, ph = loops[l.uid]
        if ph not in (LoopPhase.EXITED, LoopPhase.CANCELLED):
            loops[l.uid] = (it, LoopPhase.CANCELLED)
            changed = True
    return changed


def _armable(node: STerm, atoms, loops, out: Set[str]):
    if isinstance(node, SAtom):
        if not node.observable and atoms[node.uid] is AtomState.UNSTARTED:
            out.add(node.uid)
        return
    if isinstance(node, SLoop):
        if loops[node.uid][1] is LoopPhase.RUNNING:
            _armable(node.body, atoms, loops, out)
        return
    op = node.op
    if op in (TemporalOp.SEQ, TemporalOp.PARSEQ) and op is TemporalOp.SEQ:
        if _finished(node.lhs, atoms, loops):
            _armable(node.rhs, atoms, loops, out)
        else:
            _armable(node.lhs, atoms, loops, out)
        return
    if op is TemporalOp.PARSEQ:
        _armable(node.lhs, atoms, loops, out)
        # rhs waits may arm only once lhs has begun
        if _side_ready(node.lhs, atoms, loops):
            _armable(node.rhs, atoms, loops, out)
        return
    if op is TemporalOp.CHOICE:
        pl = _progressed(node.lhs, atoms, loops)
        pr = _progressed(node.rhs, atoms, loops)
        if pl and not pr:
            _armable(node.lhs, atoms, loops, out)
        elif pr and not pl:
            _armable(node.rhs, atoms, loops, out)
        else:
            _armable(node.lhs, atoms, loops, out)
            _armable(node.rhs, atoms, loops, out)
        return
    _armable(node.lhs, atoms, loops, out)
    _armable(node.rhs, atoms, loops, out)


def _pending_loops(node: STerm, atoms, loops, out: Set[str]):
    if isinstance(node, SAtom):
        return
    if isinstance(node, SLoop):
        if loops[node.uid][1] is LoopPhase.BOUNDARY:
            out.add(node.uid)
        else:
            _pending_loops(node.body, atoms, loops, out)
        return
    op = node.op
    if op is TemporalOp.SEQ:
        if _finished(node.lhs, atoms, loops):
            _pending_loops(node.rhs, atoms, loops, out)
        else:
            _pending_loops(node.lhs, atoms, loops, out)
        return
    if op is TemporalOp.PARSEQ:
        _pending_loops(node.lhs, atoms, loops, out)
        if _side_ready(node.lhs, atoms, loops):
            _pending_loops(node.rhs, atoms, loops, out)
        return
    if op is TemporalOp.CHOICE:
        pl = _progressed(node.lhs, atoms, loops)
        pr = _progressed(node.rhs, atoms, loops)
        if pl and not pr:
            _pending_loops(node.lhs, atoms, loops, out)
        elif pr and not pl:
            _pending_loops(node.rhs, atoms, loops, out)
        else:
            _pending_loops(node.lhs, atoms, loops, out)
            _pending_loops(node.rhs, atoms, loops, out)
        return
    _pending_loops(node.lhs, atoms, loops, out)
    _pending_loops(node.rhs, atoms, loops, out)


def _normalize(term: STerm, atoms, loops):
    for _ in range(10_000):
        changed = False

        # finished loop bodies reach the untilprop boundary
        for l in loops_of(term):
            it, ph = loops[l.uid]
            if ph is LoopPhase.RUNNING and _finished(l.body, atoms, loops):
                loops[l.uid] = (it, LoopPhase.BOUNDARY)
                changed = True

        def walk(node: STerm):
            nonlocal changed
            if isinstance(node, SAtom):
                return
            if isinstance(node, SLoop):
                walk(node.body)
                return
            op = node.op
            if op is TemporalOp.CHOICE:
                pl = _progressed(node.lhs, atoms, loops)
                pr = _progressed(node.rhs, atoms, loops)
                if pl and not pr and not _cancelled_out(node.rhs, atoms, loops):
                    changed |= _cancel(node.rhs, atoms, loops)
                elif pr and not pl and not _cancelled_out(node.lhs, atoms, loops):
                    changed |= _cancel(node.lhs, atoms, loops)
            elif op in (TemporalOp.LAND, TemporalOp.LPAR):
                if _finished(node.rhs, atoms, loops) and not _finished(node.lhs, atoms, loops):
                    changed |= _cancel(node.lhs, atoms, loops)
            elif op in (TemporalOp.RAND, TemporalOp.RPAR):
                if _finished(node.lhs, atoms, loops) and not _finished(node.rhs, atoms, loops):
                    changed |= _cancel(node.rhs, atoms, loops)
            elif op in (TemporalOp.BAND, TemporalOp.BPAR):
                fl = _finished(node.lhs, atoms, loops)
                fr = _finished(node.rhs, atoms, loops)
                if fl and not fr:
                    changed |= _cancel(node.rhs, atoms, loops)
                elif fr and not fl:
                    changed |= _cancel(node.lhs, atoms, loops)
            walk(node.lhs)
            walk(node.rhs)

        walk(term)

        arm: Set[str] = set()
        _armable(term, atoms, loops, arm)
        for uid in arm:
            atoms[uid] = AtomState.RUNNING
            changed = True

        if not changed:
            return
    raise AssertionError("normalization did not converge")


def _start_options(node: STerm, atoms, loops) -> Set[FrozenSet[str]]:
    empty: FrozenSet[str] = frozenset()
    if isinstance(node, SAtom):
        if node.observable and atoms[node.uid] is AtomState.UNSTARTED:
            return {empty, frozenset({node.uid})}
        return {empty}
    if isinstance(node, SLoop):
        if loops[node.uid][1] is LoopPhase.RUNNING:
            return _start_options(node.body, atoms, loops)
        return {empty}
    op = node.op
    if op is TemporalOp.SEQ:
        if _finished(node.lhs, atoms, loops):
            return _start_options(node.rhs, atoms, loops)
        return _start_options(node.lhs, atoms, loops)
    ol = _start_options(node.lhs, atoms, loops)
    or_ = _start_options(node.rhs, atoms, loops)
    if op is TemporalOp.PARSEQ:
        if _side_ready(node.lhs, atoms, loops):
            return {a | b for a in ol for b in or_}
        return {empty} | {a | b for a in ol if a for b in or_}
    if op in (TemporalOp.PAR, TemporalOp.LPAR, TemporalOp.RPAR, TemporalOp.BPAR):
        if _side_ready(node.lhs, atoms, loops) or _side_ready(node.rhs, atoms, loops):
            return {a | b for a in ol for b in or_}
        return {empty} | {a | b for a in ol if a for b in or_ if b}
    if op is TemporalOp.CHOICE:
        pl = _progressed(node.lhs, atoms, loops)
        pr = _progressed(node.rhs, atoms, loops)
        if pl and not pr:
            return ol
        if pr and not pl:
            return or_
        return {empty} | {a for a in ol if a} | {b for b in or_ if b}
    # plain and short-circuit & variants: fully independent sides
    return {a | b for a in ol for b in or_}
