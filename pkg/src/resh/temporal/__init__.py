from .term import AtomInfo, AtomKind, Lowered, SAtom, SLoop, SOp, STerm, lower  # noqa: F401
from .state import (  # noqa: F401
    AtomState, ExecState, Letter, LoopPhase, Status, Word, initial_state,
)
from .automaton import EventAutomaton, automaton_for, build  # noqa: F401
from .words import enumerate_words, full_alphabet, language_equal  # noqa: F401
