"""Abstract syntax of the source language, its patterns and its types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Loc = Union[tuple, None]


@dataclass(frozen=True)
class Node:
    loc: Loc = field(default=None, compare=False, repr=False, kw_only=True)


# --------------------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Builtin:
    name: str


@dataclass(frozen=True)
class Const(Node):
    """A literal (int, float, bool) or a builtin function in prefix form."""

    value: Union[int, float, bool, Builtin]


@dataclass(frozen=True)
class Lam(Node):
    param: str
    body: "Term"
    ty: "Type | None" = None


@dataclass(frozen=True)
class App(Node):
    """Saturated or partial application spine ``fn a1 ... an``."""

    fn: "Term"
    args: tuple


@dataclass(frozen=True)
class Let(Node):
    name: str
    rhs: "Term"
    body: "Term"
    ty: "Type | None" = None


@dataclass(frozen=True)
class RecBinding:
    name: str
    rhs: "Term"
    ty: "Type | None" = None


@dataclass(frozen=True)
class RecLet(Node):
    bindings: tuple  # of RecBinding
    body: "Term"


@dataclass(frozen=True)
class Con(Node):
    name: str
    arg: "Term"


@dataclass(frozen=True)
class Match(Node):
    target: "Term"
    pat: "Pattern"
    thn: "Term"
    els: "Term"


@dataclass(frozen=True)
class SeqLit(Node):
    items: tuple


@dataclass(frozen=True)
class RecordLit(Node):
    fields: tuple  # of (label, Term)


@dataclass(frozen=True)
class Dist(Node):
    name: str
    args: tuple


@dataclass(frozen=True)
class Assume(Node):
    dist: "Term"


@dataclass(frozen=True)
class Weight(Node):
    arg: "Term"


@dataclass(frozen=True)
class Observe(Node):
    value: "Term"
    dist: "Term"


@dataclass(frozen=True)
class Resample(Node):
    pass


@dataclass(frozen=True)
class TypeDecl(Node):
    name: str
    body: "Term"


@dataclass(frozen=True)
class ConDecl(Node):
    name: str
    payload: "Type"
    variant: str
    body: "Term"


# sugar, removed by desugar()
@dataclass(frozen=True)
class If(Node):
    cond: "Term"
    thn: "Term"
    els: "Term"


@dataclass(frozen=True)
class Seq(Node):
    first: "Term"
    second: "Term"


Term = Union[
    Var, Const, Lam, App, Let, RecLet, Con, Match, SeqLit, RecordLit, Dist, Assume,
    Weight, Observe, Resample, TypeDecl, ConDecl, If, Seq,
]

UNIT = RecordLit(())


# ------------------------------------------------------------------------ patterns


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PWild:
    pass


@dataclass(frozen=True)
class PLit:
    value: Union[int, float, bool]


@dataclass(frozen=True)
class PCon:
    name: str
    sub: "Pattern"


@dataclass(frozen=True)
class PRecord:
    fields: tuple  # of (label, Pattern)


Pattern = Union[PVar, PWild, PLit, PCon, PRecord]

PAT_TRUE = PLit(True)


def pattern_vars(p: Pattern) -> list[str]:
    if isinstance(p, PVar):
        return [p.name]
    if isinstance(p, PCon):
        return pattern_vars(p.sub)
    if isinstance(p, PRecord):
        out: list[str] = []
        for _, sub in p.fields:
            out.extend(pattern_vars(sub))
        return out
    return []


def free_vars(t) -> set:
    """Free term variables of ``t`` (builtins are constants, not variables)."""
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, (Const, Resample)):
        return set()
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.param}
    if isinstance(t, Let):
        return free_vars(t.rhs) | (free_vars(t.body) - {t.name})
    if isinstance(t, RecLet):
        names = {b.name for b in t.bindings}
        out = free_vars(t.body)
        for b in t.bindings:
            out |= free_vars(b.rhs)
        return out - names
    if isinstance(t, Match):
        return (free_vars(t.target) | (free_vars(t.thn) - set(pattern_vars(t.pat)))
                | free_vars(t.els))
    out: set = set()
    for child in children(t):
        out |= free_vars(child)
    return out


def children(t) -> tuple:
    """Immediate subterms, for node kinds that bind nothing."""
    if isinstance(t, App):
        return (t.fn,) + tuple(t.args)
    if isinstance(t, (SeqLit,)):
        return tuple(t.items)
    if isinstance(t, RecordLit):
        return tuple(v for _, v in t.fields)
    if isinstance(t, Dist):
        return tuple(t.args)
    if isinstance(t, Con):
        return (t.arg,)
    if isinstance(t, Assume):
        return (t.dist,)
    if isinstance(t, Weight):
        return (t.arg,)
    if isinstance(t, Observe):
        return (t.value, t.dist)
    if isinstance(t, If):
        return (t.cond, t.thn, t.els)
    if isinstance(t, Seq):
        return (t.first, t.second)
    if isinstance(t, (TypeDecl, ConDecl)):
        return (t.body,)
    return ()


# --------------------------------------------------------------------------- types


@dataclass(frozen=True)
class TPrim:
    name: str  # Float | Int | Bool

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class TRecord:
    fields: tuple  # of (label, Type), sorted by label

    def __str__(self):
        if not self.fields:
            return "()"
        return "{" + ", ".join(f"{l}: {t}" for l, t in self.fields) + "}"

    def labels(self) -> list[str]:
        return [l for l, _ in self.fields]


@dataclass(frozen=True)
class TVariant:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class TSeq:
    elem: "Type"
    length: "int | None | TVar" = None

    def __str__(self):
        return f"[{self.elem}]"


@dataclass(frozen=True)
class TFun:
    params: tuple
    ret: "Type"

    def __str__(self):
        parts = [f"({p})" if isinstance(p, TFun) else str(p) for p in self.params]
        return " -> ".join(parts + [str(self.ret)])


@dataclass(eq=False)
class TVar:
    """Unification variable; identity-compared."""

    id: int
    ref: "Type | None" = None

    def __str__(self):
        return f"?{self.id}"

    def __hash__(self):
        return id(self)


Type = Union[TPrim, TRecord, TVariant, TSeq, TFun, TVar]

FLOAT = TPrim("Float")
INT = TPrim("Int")
BOOL = TPrim("Bool")
TUNIT = TRecord(())


def record_type(fields) -> TRecord:
    return TRecord(tuple(sorted(fields, key=lambda f: f[0])))


# ---------------------------------------------------------------- distributions

# name -> (parameter types, value type)
DISTRIBUTIONS: dict[str, tuple[tuple, TPrim]] = {
    "Bernoulli": ((FLOAT,), BOOL),
    "Normal": ((FLOAT, FLOAT), FLOAT),
    "Gamma": ((FLOAT, FLOAT), FLOAT),
    "Exponential": ((FLOAT,), FLOAT),
    "Poisson": ((FLOAT,), INT),
    "Binomial": ((INT, FLOAT), INT),
    "Uniform": ((FLOAT, FLOAT), FLOAT),
    "Beta": ((FLOAT, FLOAT), FLOAT),
}


def dist_arity(name: str) -> int:
    return len(DISTRIBUTIONS[name][0])


# ------------------------------------------------------------------- builtins

_II_I = ((INT, INT), INT)
_FF_F = ((FLOAT, FLOAT), FLOAT)
_II_B = ((INT, INT), BOOL)
_FF_B = ((FLOAT, FLOAT), BOOL)

# Polymorphic builtins (get, length) are typed specially by the checker.
BUILTIN_SIGNATURES: dict[str, tuple] = {
    "addi": _II_I, "subi": _II_I, "muli": _II_I, "divi": _II_I, "modi": _II_I,
    "negi": ((INT,), INT),
    "eqi": _II_B, "neqi": _II_B, "lti": _II_B, "gti": _II_B, "leqi": _II_B, "geqi": _II_B,
    "addf": _FF_F, "subf": _FF_F, "mulf": _FF_F, "divf": _FF_F,
    "negf": ((FLOAT,), FLOAT),
    "eqf": _FF_B, "neqf": _FF_B, "ltf": _FF_B, "gtf": _FF_B, "leqf": _FF_B, "geqf": _FF_B,
    "log": ((FLOAT,), FLOAT), "exp": ((FLOAT,), FLOAT), "sqrt": ((FLOAT,), FLOAT),
    "int2float": ((INT,), FLOAT),
    "not": ((BOOL,), BOOL),
    "get": None,
    "length": None,
}

BUILTIN_ARITY = {name: (2 if name == "get" else 1 if name == "length" else len(sig[0]))
                 for name, sig in BUILTIN_SIGNATURES.items()}

CORE_BUILTINS = frozenset(
    "addi subi muli eqi addf subf mulf divf geqf leqf eqf log exp".split())
