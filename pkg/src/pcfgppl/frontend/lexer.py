from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = frozenset(
    "lam let in recursive match with then else if true false assume weight observe "
    "resample type con".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<float>-?\d+(?:\.\d*(?:[eE][+-]?\d+)?|[eE][+-]?\d+))
  | (?P<int>-?\d+)
  | (?P<arrow>->)
  | (?P<ident>[a-z_][A-Za-z0-9_']*)
  | (?P<conid>[A-Z][A-Za-z0-9_']*)
  | (?P<punct>[()\[\]{},=.;:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int float ident conid kw punct eof
    text: str
    line: int
    col: int

    @property
    def loc(self):
        return (self.line, self.col)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", (line, pos - line_start + 1))
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind in ("ws", "comment"):
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rfind("\n") + 1
        else:
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            elif kind in ("arrow", "punct"):
                kind = "punct"
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens
