"""Timing-diagram words: enumeration and cross-route language checks.

A word is a sequence of nonempty letters <X,Y>.  The operational route
explores ExecState with silent moves closed off between letters; the
denotational route steps the compositional automaton.  Both define the
same language; ``language_equal`` verifies this exactly up to a length
bound by a memoized product walk over the full letter alphabet.
"""

from __future__ import annotations

from itertools import chain, combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from ..errors import BudgetExceeded
from .automaton import EventAutomaton, automaton_for
from .state import ExecState, Letter, Status, Word, initial_state
from .term import STerm, atoms_of


def _subsets(items: Tuple) -> Iterable[Tuple]:
    return chain.from_iterable(combinations(items, n) for n in range(len(items) + 1))


def eps_closure(states: Iterable[ExecState]) -> FrozenSet[ExecState]:
    """Close a set of states under silent moves: waits, pauses, loop decisions."""
    seen: Set[ExecState] = set(states)
    frontier = list(seen)
    while frontier:
        st = frontier.pop()
        nxt: List[ExecState] = []
        for uid in st.armed_internals():
            nxt.append(st.resolve_internal(uid))
        for uid in st.pending_loops():
            nxt.append(st.loop_exit(uid))
            nxt.append(st.loop_enter(uid))
        for st2 in nxt:
            if st2 not in seen:
                seen.add(st2)
                frontier.append(st2)
    return frozenset(seen)


def letters_from(state: ExecState) -> Iterable[Tuple[Letter, ExecState]]:
    """All nonempty letters legal from one state, with their successors."""
    running = tuple(sorted(state.running_observable()))
    cancelling = tuple(sorted(state.cancel_obligations()))
    for xr in _subsets(running):
        for xc in _subsets(cancelling):
            x = frozenset({(u, Status.SUCCEEDED) for u in xr} |
                          {(u, Status.TERMINATED) for u in xc})
            mid = state.apply_letter(Letter(x, frozenset())) if x else state
            for y in mid.start_options():
                if not x and not y:
                    continue
                letter = Letter(x, frozenset(y))
                yield letter, mid.apply_letter(Letter(frozenset(), frozenset(y))) if y else mid


def op_step(states: FrozenSet[ExecState], letter: Letter) -> FrozenSet[ExecState]:
    out: Set[ExecState] = set()
    for st in states:
        try:
            out.add(st.apply_letter(letter))
        except Exception:
            continue
    return eps_closure(out)


def op_accepting(states: Iterable[ExecState]) -> bool:
    return any(st.finished() for st in states)


def enumerate_words(term: STerm, max_len: int, budget: int = 200_000) -> Set[Word]:
    """All accepted words up to max_len letters, by operational exploration."""
    start = eps_closure([initial_state(term)])
    words: Set[Word] = set()
    count = 0
    frontier: List[Tuple[Word, FrozenSet[ExecState]]] = [((), start)]
    while frontier:
        word, states = frontier.pop()
        if op_accepting(states):
            words.add(word)
        if len(word) >= max_len:
            continue
        by_letter: Dict[Letter, Set[ExecState]] = {}
        for st in states:
            for letter, succ in letters_from(st):
                by_letter.setdefault(letter, set()).add(succ)
        for letter, succs in by_letter.items():
            count += 1
            if count > budget:
                raise BudgetExceeded(f"word enumeration exceeded {budget} expansions")
            frontier.append((word + (letter,), eps_closure(succs)))
    return words


def full_alphabet(uids: Iterable[str]) -> List[Letter]:
    """Every nonempty letter over the given observable instances.

    Each instance contributes absent / succeeded / terminated to X;
    Y ranges over subsets of the instances absent from X.
    """
    uids = tuple(sorted(uids))
    letters: List[Letter] = []
    for assign in _subsets(uids):
        rest = tuple(u for u in uids if u not in assign)
        for term_subset in _subsets(assign):
            x = frozenset({(u, Status.TERMINATED if u in term_subset else Status.SUCCEEDED)
                           for u in assign})
            for y in _subsets(rest):
                if not x and not y:
                    continue
                letters.append(Letter(x, frozenset(y)))
    return letters


def language_equal(term: STerm, max_len: int) -> Optional[Word]:
    """Compare both semantic routes up to max_len; return a counterexample word
    accepted by exactly one route, or None when they agree."""
    aut = automaton_for(term)
    alphabet = full_alphabet(a.uid for a in atoms_of(term) if a.observable)

    a_start = eps_closure([initial_state(term)])
    b_start = aut.initial_state()

    a_memo: Dict[Tuple[FrozenSet[ExecState], int], bool] = {}
    b_memo: Dict[Tuple[FrozenSet, int], bool] = {}
    a_steps: Dict[Tuple[FrozenSet[ExecState], Letter], FrozenSet[ExecState]] = {}
    b_steps: Dict[Tuple[FrozenSet, Letter], FrozenSet] = {}

    def step_a(states, letter):
        key = (states, letter)
        if key not in a_steps:
            a_steps[key] = op_step(states, letter)
        return a_steps[key]

    def step_b(state, letter):
        key = (state, letter)
        if key not in b_steps:
            b_steps[key] = aut.step(state, letter)
        return b_steps[key]

    def a_has_accept(states, k) -> bool:
        if op_accepting(states):
            return True
        if k == 0:
            return False
        key = (states, k)
        if key not in a_memo:
            a_memo[key] = False  # cycle guard; revisits within k can't add words
            a_memo[key] = any(a_has_accept(s2, k - 1)
                              for s2 in (step_a(states, l) for l in alphabet) if s2)
        return a_memo[key]

    def b_has_accept(state, k) -> bool:
        if aut.accepting(state):
            return True
        if k == 0:
            return False
        key = (state, k)
        if key not in b_memo:
            b_memo[key] = False
            b_memo[key] = any(b_has_accept(s2, k - 1)
                              for s2 in (step_b(state, l) for l in alphabet) if s2)
        return b_memo[key]

    seen: Set[Tuple[FrozenSet[ExecState], FrozenSet, int]] = set()

    def walk(a, b, k, prefix) -> Optional[Word]:
        if op_accepting(a) != aut.accepting(b):
            return prefix
        if k == 0:
            return None
        key = (a, b, k)
        if key in seen:
            return None
        seen.add(key)
        for letter in alphabet:
            a2 = step_a(a, letter)
            b2 = step_b(b, letter)
            if not a2 and not b2:
                continue
            if not a2:
                if b_has_accept(b2, k - 1):
                    return prefix + (letter,)
                continue
            if not b2:
                if a_has_accept(a2, k - 1):
                    return prefix + (letter,)
                continue
            bad = walk(a2, b2, k - 1, prefix + (letter,))
            if bad is not None:
                return bad
        return None

    return walk(a_start, b_start, max_len, ())
