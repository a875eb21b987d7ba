"""Abstract statements and their decomposition into basic blocks.

A function body in ANF is viewed as a list of statements of four kinds:
``checkpoint`` (a ``resample``), ``call`` (a call to a function that may
reach a checkpoint), ``if`` (a match, with both arms lowered recursively)
and ``other`` (anything else). :func:`decompose` splits such a list into
numbered blocks whose checkpoints and calls all sit in tail position.
Every statement carries an opaque payload that the decomposition passes
through untouched.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Any, Union

from .frontend.pretty import fmt_pattern, _pp
from .frontend.syntax import App, Let, Match, Resample, Var


class _Return:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "RETURN"

    def __reduce__(self):
        return (_Return, ())


RETURN = _Return()  # ``next = return``: continue at the caller's return block
NONE = None  # ``next = none``: do nothing at the end of the block

Next = Union[int, _Return]


# ------------------------------------------------------------------ stmt


@dataclass(frozen=True)
class Checkpoint:
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class If:
    thn: tuple
    els: tuple
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class Other:
    payload: Any = field(default=None, compare=False)


Stmt = Union[Checkpoint, Call, If, Other]


# ------------------------------------------------------------------ tstmt


@dataclass(frozen=True)
class TCheckpoint:
    next: Next
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class TCall:
    next: Next
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class TIf:
    thn: tuple
    els: tuple
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class Jump:
    next: Next


@dataclass(frozen=True)
class TOther:
    payload: Any = field(default=None, compare=False)


TStmt = Union[TCheckpoint, TCall, TIf, Jump, TOther]


# ------------------------------------------------------------------ payloads

RET = "<ret>"  # destination of a function's result


@dataclass(frozen=True)
class Bind:
    """``dest = rhs``; ``dest`` is :data:`RET` for the function's result."""

    dest: str
    rhs: Any


@dataclass(frozen=True)
class MatchInfo:
    """Condition of an ``if``: ``target`` matched against ``pat``; the arms
    leave their value in ``dest``."""

    target: Any
    pat: Any
    dest: str


# ------------------------------------------------------------------ lowering


def lower_to_stmts(body, resample_fns) -> list:
    """Lower an ANF function body to abstract statements."""
    return _lower(body, RET, resample_fns)


def _lower(t, dest, rs) -> list:
    out = []
    while isinstance(t, Let):
        out.append(_lower_op(t.rhs, t.name, rs))
        t = t.body
    out.append(_lower_op(t, dest, rs))
    return out


def _lower_op(rhs, dest, rs):
    if isinstance(rhs, Resample):
        return Checkpoint(Bind(dest, rhs))
    if isinstance(rhs, App) and isinstance(rhs.fn, Var) and rhs.fn.name in rs:
        return Call(Bind(dest, rhs))
    if isinstance(rhs, Match):
        return If(tuple(_lower(rhs.thn, dest, rs)), tuple(_lower(rhs.els, dest, rs)),
                  MatchInfo(rhs.target, rhs.pat, dest))
    return Other(Bind(dest, rhs))


# ------------------------------------------------------------------ decomposition


class _Decomposer:
    def __init__(self, start: int = 1):
        self.counter = itertools.count(start)

    def new_index(self) -> int:
        return next(self.counter)

    def init_next(self, nxt):
        return self.new_index() if nxt is NONE else nxt

    def rec(self, acc, srcs):
        block, blocks, nxt = acc
        if not srcs:
            if nxt is NONE:
                return block, blocks, nxt
            return block + [Jump(nxt)], blocks, nxt
        src, rest = srcs[0], srcs[1:]
        if isinstance(src, (Checkpoint, Call)):
            mk = TCheckpoint if isinstance(src, Checkpoint) else TCall
            if not rest:
                nxt = self.init_next(nxt)
                return block + [mk(nxt, src.payload)], blocks, nxt
            index = self.new_index()
            block = block + [mk(index, src.payload)]
            next_block, blocks, nxt = self.rec(([], blocks, self.init_next(nxt)), rest)
            return block, {**blocks, index: next_block}, nxt
        if isinstance(src, Other):
            return self.rec((block + [TOther(src.payload)], blocks, nxt), rest)
        if isinstance(src, If):
            if not rest:
                thn, thn_blocks, thn_next = self.rec(([], blocks, nxt), list(src.thn))
                els, els_blocks, els_next = self.rec(([], thn_blocks, thn_next), list(src.els))
                if nxt != els_next and thn_next is NONE:
                    thn = thn + [Jump(els_next)]
                return block + [TIf(tuple(thn), tuple(els), src.payload)], els_blocks, els_next
            thn, thn_blocks, thn_next = self.rec(([], blocks, NONE), list(src.thn))
            els, els_blocks, els_next = self.rec(([], thn_blocks, thn_next), list(src.els))
            if els_next is NONE:
                return self.rec((block + [TIf(tuple(thn), tuple(els), src.payload)],
                                 els_blocks, nxt), rest)
            if thn_next is NONE:
                thn = thn + [Jump(els_next)]
            next_block, blocks, nxt = self.rec(([], els_blocks, self.init_next(nxt)), rest)
            return (block + [TIf(tuple(thn), tuple(els), src.payload)],
                    {**blocks, els_next: next_block}, nxt)
        raise TypeError(f"not a stmt: {src!r}")


def decompose_raw(srcs) -> tuple[dict, int]:
    """The decomposition exactly as specified: returns (blocks, entry index),
    with fresh indices counting up from 1 and the entry block numbered last."""
    d = _Decomposer()
    block, blocks, _ = d.rec(([], {}, RETURN), list(srcs))
    entry = d.new_index()
    blocks = {**blocks, entry: block}
    return {k: tuple(v) for k, v in blocks.items()}, entry


def decompose(srcs) -> dict:
    """Decompose statements into blocks; the entry block is renumbered to 0
    and the others to 1, 2, ... in creation order."""
    blocks, entry = decompose_raw(srcs)
    order = [entry] + sorted(k for k in blocks if k != entry)
    mapping = {old: new for new, old in enumerate(order)}
    return {mapping[k]: _renumber(blocks[k], mapping) for k in order}


def _renumber(stmts, m):
    out = []
    for s in stmts:
        if isinstance(s, TCheckpoint):
            out.append(TCheckpoint(_rn(s.next, m), s.payload))
        elif isinstance(s, TCall):
            out.append(TCall(_rn(s.next, m), s.payload))
        elif isinstance(s, Jump):
            out.append(Jump(_rn(s.next, m)))
        elif isinstance(s, TIf):
            out.append(TIf(_renumber(s.thn, m), _renumber(s.els, m), s.payload))
        else:
            out.append(s)
    return tuple(out)


def _rn(n, m):
    return n if n is RETURN else m[n]


# ------------------------------------------------------------------ properties


def check_tail_position(blocks) -> bool:
    """True iff every checkpoint, call and jump ends its statement list."""
    return all(_tail_ok(b) for b in blocks.values())


def _tail_ok(stmts) -> bool:
    for i, s in enumerate(stmts):
        if isinstance(s, (TCheckpoint, TCall, Jump)) and i != len(stmts) - 1:
            return False
        if isinstance(s, TIf) and not (_tail_ok(s.thn) and _tail_ok(s.els)):
            return False
    return True


def successors(stmts) -> set:
    """Block indices a block may transfer to (``return`` excluded)."""
    out = set()
    for s in stmts:
        if isinstance(s, (TCheckpoint, TCall, Jump)) and s.next is not RETURN:
            out.add(s.next)
        elif isinstance(s, TIf):
            out |= successors(s.thn) | successors(s.els)
    return out


def reachable(blocks, entry: int = 0) -> set:
    seen, work = {entry}, [entry]
    while work:
        for n in successors(blocks[work.pop()]):
            if n not in seen:
                seen.add(n)
                work.append(n)
    return seen


def transitions(stmts) -> list:
    """``(kind, next)`` for every control transfer in a block, in order."""
    out = []
    for s in stmts:
        if isinstance(s, TCheckpoint):
            out.append(("checkpoint", s.next))
        elif isinstance(s, TCall):
            out.append(("call", s.next))
        elif isinstance(s, Jump):
            out.append(("jump", s.next))
        elif isinstance(s, TIf):
            out += transitions(s.thn) + transitions(s.els)
    return out


# ------------------------------------------------------------------ text form


def _fmt_next(n) -> str:
    return "return" if n is RETURN else str(n)


def _payload_text(p) -> str:
    if isinstance(p, Bind):
        rhs = " ".join(_pp(p.rhs, 0).split())
        return f"{'return' if p.dest == RET else p.dest} = {rhs}"
    if isinstance(p, MatchInfo):
        target = _pp(p.target, 0)
        return f"match {target} with {fmt_pattern(p.pat)}"
    return ""


def _dump(stmts, ind, with_payload, lines, last=True):
    pad = "  " * ind
    for i, s in enumerate(stmts):
        sep = "" if i == len(stmts) - 1 else ","
        note = ""
        if with_payload and getattr(s, "payload", None) is not None:
            note = f"  -- {_payload_text(s.payload)}"
        if isinstance(s, (If, TIf)):
            lines.append(f"{pad}if [{note}")
            _dump(s.thn, ind + 1, with_payload, lines)
            lines.append(f"{pad}] [")
            _dump(s.els, ind + 1, with_payload, lines)
            lines.append(f"{pad}]{sep}")
            continue
        if isinstance(s, (Checkpoint, Call, Other, TOther)):
            word = {Checkpoint: "checkpoint", Call: "call", Other: "other",
                    TOther: "other"}[type(s)]
        elif isinstance(s, TCheckpoint):
            word = f"checkpoint {_fmt_next(s.next)}"
        elif isinstance(s, TCall):
            word = f"call {_fmt_next(s.next)}"
        else:
            word = f"jump {_fmt_next(s.next)}"
        lines.append(f"{pad}{word}{sep}{note}")


def dump_stmts(stmts, with_payload: bool = False) -> str:
    lines = ["["]
    _dump(stmts, 1, with_payload, lines)
    lines.append("]")
    return "\n".join(lines)


def dump_blocks(blocks, with_payload: bool = False) -> str:
    out = []
    for k in sorted(blocks):
        lines = [f"{k}: ["]
        _dump(blocks[k], 1, with_payload, lines)
        lines.append("]")
        out.append("\n".join(lines))
    return "\n".join(out)


_WORD = re.compile(r"\[|\]|,|:|[A-Za-z]+|\d+")


def _tokens(text):
    text = re.sub(r"--[^\n]*", "", text)
    return _WORD.findall(text)


class _TextParser:
    def __init__(self, text):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, want=None):
        t = self.peek()
        if t is None or (want is not None and t != want):
            raise ValueError(f"expected {want!r}, found {t!r}")
        self.i += 1
        return t

    def next_value(self):
        t = self.take()
        return RETURN if t == "return" else int(t)

    def stmt_list(self, typed):
        self.take("[")
        out = []
        while self.peek() != "]":
            out.append(self.stmt(typed))
            if self.peek() == ",":
                self.take(",")
        self.take("]")
        return tuple(out)

    def stmt(self, typed):
        w = self.take()
        if w == "if":
            thn = self.stmt_list(typed)
            els = self.stmt_list(typed)
            return TIf(thn, els) if typed else If(thn, els)
        if w == "other":
            return TOther() if typed else Other()
        if w in ("checkpoint", "call"):
            if not typed:
                return Checkpoint() if w == "checkpoint" else Call()
            n = self.next_value()
            return TCheckpoint(n) if w == "checkpoint" else TCall(n)
        if w == "jump" and typed:
            return Jump(self.next_value())
        raise ValueError(f"unexpected {w!r}")


def parse_stmts(text: str) -> tuple:
    p = _TextParser(text)
    out = p.stmt_list(False)
    if p.peek() is not None:
        raise ValueError("trailing input")
    return out


def parse_blocks(text: str) -> dict:
    p = _TextParser(text)
    blocks = {}
    while p.peek() is not None:
        k = int(p.take())
        p.take(":")
        blocks[k] = p.stmt_list(True)
    return blocks
