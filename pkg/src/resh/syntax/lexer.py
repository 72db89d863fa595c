"""Tokenizer for Resh source text.

Multi-character operators are matched with maximal munch, so `!&!` is one
token and `!loaded` is a bang followed by an identifier.  Duration
literals (`5s`, `250ms`) are lexed as a single token.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import LexError
from .ast import SourceProgram


class TokKind(str, Enum):
    IDENT = "ident"
    KEYWORD = "keyword"
    INT = "int"
    STRING = "string"
    DURATION = "duration"
    OP = "op"
    EOF = "eof"


KEYWORDS = frozenset({
    "action", "task", "var", "with", "waitevent", "waitprop",
    "pause", "repeat", "untilprop", "true", "false",
})

# Longest first so maximal munch falls out of a linear scan.
OPERATORS = (
    "!&!", "!+!", "+=>", "<->",
    "!&", "&!", "!+", "+!", "=>", "->",
    "&", "+", "|", "@", "!", "(", ")", "{", "}", ",", ".",
)


@dataclass(frozen=True)
class Token:
    kind: TokKind
    text: str
    value: object  # int for INT, millis for DURATION, str otherwise
    line: int
    col: int

    def __repr__(self) -> str:  # compact, for parser error messages
        return f"{self.kind.value}({self.text!r})"


def tokenize(src: SourceProgram | str) -> list[Token]:
    if isinstance(src, str):
        src = SourceProgram(src)
    text = src.text
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def bump(k: int):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            bump(1)
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                bump(1)
            continue
        tline, tcol = line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = TokKind.KEYWORD if word in KEYWORDS else TokKind.IDENT
            toks.append(Token(kind, word, word, tline, tcol))
            bump(j - i)
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            digits = text[i:j]
            # duration suffix: s or ms, not followed by more identifier chars
            suffix = ""
            k = j
            while k < n and text[k].isalpha():
                k += 1
            suffix = text[j:k]
            if suffix in ("s", "ms"):
                millis = int(digits) * (1000 if suffix == "s" else 1)
                toks.append(Token(TokKind.DURATION, text[i:k], millis, tline, tcol))
                bump(k - i)
            elif suffix:
                raise LexError(f"bad numeric suffix {suffix!r}", tline, tcol)
            else:
                toks.append(Token(TokKind.INT, digits, int(digits), tline, tcol))
                bump(j - i)
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise LexError("unterminated string literal", tline, tcol)
                if text[j] == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise LexError("unterminated string literal", tline, tcol)
            toks.append(Token(TokKind.STRING, text[i:j + 1], "".join(buf), tline, tcol))
            bump(j + 1 - i)
            continue
        for op in OPERATORS:
            if text.startswith(op, i):
                toks.append(Token(TokKind.OP, op, op, tline, tcol))
                bump(len(op))
                break
        else:
            raise LexError(f"unexpected character {c!r}", tline, tcol)
    toks.append(Token(TokKind.EOF, "", "", line, col))
    return toks
