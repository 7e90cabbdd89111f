"""Tokenizer for decompiler-style pseudocode.

Comments vanish here, with one exception: `// attribute: X` trailers are
collected as annotation notes (they carry accepted attribute labels
through re-parses) and handed back next to the token stream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

# Longest first so <<= style overlaps never mis-split.
_OPERATORS = [
    "**", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "=>",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~",
    "(", ")", "{", "}", "[", "]", ",", ";", ".", ":", "?",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<number>0[xX][0-9a-fA-F]+|\d+)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>%s)
    """ % "|".join(re.escape(op) for op in _OPERATORS),
    re.VERBOSE | re.DOTALL,
)

_ATTR_COMMENT_RE = re.compile(r"//\s*attribute:\s*([A-Za-z_][A-Za-z0-9_]*)\s*$")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | op | eof
    text: str
    line: int
    col: int

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


@dataclass(frozen=True)
class AttrNote:
    """An `// attribute: Label` trailer and the line it sits on."""

    line: int
    label: str


def tokenize(text: str) -> tuple[list[Token], list[AttrNote]]:
    tokens: list[Token] = []
    notes: list[AttrNote] = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError((line, pos - line_start + 1), ("token",), text[pos])
        start = pos
        pos = m.end()
        col = start - line_start + 1
        if m.lastgroup == "ws" or m.lastgroup == "block_comment":
            pass
        elif m.lastgroup == "line_comment":
            attr = _ATTR_COMMENT_RE.match(m.group())
            if attr:
                notes.append(AttrNote(line, attr.group(1)))
        else:
            tokens.append(Token(m.lastgroup, m.group(), line, col))
        # track newlines inside whatever we just consumed
        consumed = text[start:pos]
        newlines = consumed.count("\n")
        if newlines:
            line += newlines
            line_start = start + consumed.rindex("\n") + 1
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, notes


def tokens_to_text(tokens: list[Token]) -> str:
    """Space-joined rendering; tokenizing it again yields the same stream."""
    return " ".join(t.text for t in tokens if t.kind != "eof")
