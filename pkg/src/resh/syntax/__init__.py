from .ast import *  # noqa: F401,F403
from .lexer import Token, TokKind, tokenize  # noqa: F401
from .parser import parse, parse_term  # noqa: F401
from .printer import pretty_print, print_term  # noqa: F401
