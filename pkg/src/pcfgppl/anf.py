"""A-normal form.

After :func:`normalize` every argument of an application, constructor,
record, sequence or distribution is a variable or a literal, every match
scrutinizes a variable or literal, and every let binds either a trivial
value, a single operation (one application, ``assume``, ``observe``,
``weight``, ``resample`` or data construction) or a match whose branches are
themselves in ANF. A function body ends in such a value, operation or match.
Tail calls stay unbound; everything else that is non-trivial gets a let.
"""

from __future__ import annotations

import re
from dataclasses import replace

from .frontend.desugar import FreshNames, term_names
from .frontend.syntax import (
    BOOL, BUILTIN_SIGNATURES, DISTRIBUTIONS, FLOAT, INT, TUNIT, App, Assume, Builtin, Con,
    ConDecl, Const, Dist, Lam, Let, Match, Observe, RecBinding, RecLet, RecordLit, Resample,
    SeqLit, TSeq, TVariant, TypeDecl, Var, Weight, record_type,
)

TEMP_PREFIX = "_t"


def is_trivial(t) -> bool:
    return isinstance(t, Var) or (isinstance(t, Const) and not isinstance(t.value, Builtin))


def _spine(t):
    fn, args = t.fn, tuple(t.args)
    while isinstance(fn, App):
        args = tuple(fn.args) + args
        fn = fn.fn
    return fn, args


class _Normalizer:
    def __init__(self, taken: set):
        self.taken = taken
        self.fresh = FreshNames(TEMP_PREFIX, set(taken))

    def term(self, t):
        return self.norm(t, lambda n: n)

    def norm(self, t, k):
        if is_trivial(t) or isinstance(t, Resample):
            return k(t)
        if isinstance(t, Let):
            if isinstance(t.rhs, Lam):
                return Let(t.name, self.lam(t.rhs), self.norm(t.body, k), t.ty, loc=t.loc)
            return self.norm(t.rhs, lambda n: Let(t.name, n, self.norm(t.body, k), t.ty,
                                                  loc=t.loc))
        if isinstance(t, Match):
            return self.name(t.target, lambda v: k(Match(v, t.pat, self.term(t.thn),
                                                         self.term(t.els), loc=t.loc)))
        if isinstance(t, App):
            fn, args = _spine(t)
            return self.names(args, lambda vs: k(App(fn, vs, loc=t.loc)))
        if isinstance(t, Con):
            return self.name(t.arg, lambda v: k(Con(t.name, v, loc=t.loc)))
        if isinstance(t, RecordLit):
            labels = [l for l, _ in t.fields]
            return self.names([v for _, v in t.fields],
                              lambda vs: k(RecordLit(tuple(zip(labels, vs)), loc=t.loc)))
        if isinstance(t, SeqLit):
            return self.names(t.items, lambda vs: k(SeqLit(vs, loc=t.loc)))
        if isinstance(t, Assume):
            return self.dist(t.dist, lambda d: k(Assume(d, loc=t.loc)))
        if isinstance(t, Observe):
            return self.name(t.value, lambda v: self.dist(
                t.dist, lambda d: k(Observe(v, d, loc=t.loc))))
        if isinstance(t, Weight):
            return self.name(t.arg, lambda v: k(Weight(v, loc=t.loc)))
        if isinstance(t, Lam):
            return k(self.lam(t))
        if isinstance(t, RecLet):
            binds = tuple(RecBinding(b.name, self.lam(b.rhs), b.ty) for b in t.bindings)
            return RecLet(binds, self.norm(t.body, k), loc=t.loc)
        if isinstance(t, TypeDecl):
            return TypeDecl(t.name, self.norm(t.body, k), loc=t.loc)
        if isinstance(t, ConDecl):
            return ConDecl(t.name, t.payload, t.variant, self.norm(t.body, k), loc=t.loc)
        raise TypeError(f"cannot normalize {t!r}")

    def lam(self, t):
        if isinstance(t, Lam):
            return Lam(t.param, self.lam(t.body), t.ty, loc=t.loc)
        saved = self.fresh
        self.fresh = FreshNames(TEMP_PREFIX, set(self.taken))
        body = self.term(t)
        self.fresh = saved
        return body

    def dist(self, d, k):
        return self.names(d.args, lambda vs: k(Dist(d.name, vs, loc=d.loc)))

    def name(self, t, k):
        def bind(n):
            if is_trivial(n):
                return k(n)
            v = self.fresh()
            return Let(v, n, k(Var(v)))
        return self.norm(t, bind)

    def names(self, ts, k):
        ts = list(ts)
        out: list = []

        def step(i):
            if i == len(ts):
                return k(tuple(out))

            def got(v):
                out.append(v)
                return step(i + 1)
            return self.name(ts[i], got)
        return step(0)


def normalize(t, taken: set | None = None):
    """Convert a (desugared) term to A-normal form.

    Temporaries are ``_t0, _t1, ...``; the counter restarts for each function
    body and skips every name already present in the program.
    """
    taken = term_names(t) if taken is None else set(taken) | term_names(t)
    return _Normalizer(taken).term(t)


# ------------------------------------------------------------------ validation


def _is_simple(t) -> bool:
    if isinstance(t, Resample):
        return True
    if isinstance(t, App):
        fn = t.fn
        head_ok = isinstance(fn, Var) or (isinstance(fn, Const) and isinstance(fn.value, Builtin))
        return head_ok and all(is_trivial(a) for a in t.args)
    if isinstance(t, Con):
        return is_trivial(t.arg)
    if isinstance(t, RecordLit):
        return all(is_trivial(v) for _, v in t.fields)
    if isinstance(t, SeqLit):
        return all(is_trivial(v) for v in t.items)
    if isinstance(t, Assume):
        return isinstance(t.dist, Dist) and all(is_trivial(a) for a in t.dist.args)
    if isinstance(t, Observe):
        return (is_trivial(t.value) and isinstance(t.dist, Dist)
                and all(is_trivial(a) for a in t.dist.args))
    if isinstance(t, Weight):
        return is_trivial(t.arg)
    return False


def _valid_value(t) -> bool:
    """Something allowed as a let right-hand side or in tail position."""
    if is_trivial(t) or _is_simple(t):
        return True
    if isinstance(t, Match):
        return is_trivial(t.target) and validate_anf(t.thn) and validate_anf(t.els)
    return False


def validate_anf(t) -> bool:
    """True iff ``t`` satisfies the ANF invariants."""
    while True:
        if isinstance(t, (TypeDecl, ConDecl)):
            t = t.body
        elif isinstance(t, RecLet):
            if not all(_valid_lam(b.rhs) for b in t.bindings):
                return False
            t = t.body
        elif isinstance(t, Let):
            if isinstance(t.rhs, Lam):
                if not _valid_lam(t.rhs):
                    return False
            elif not _valid_value(t.rhs):
                return False
            t = t.body
        else:
            return _valid_value(t)


def _valid_lam(t) -> bool:
    while isinstance(t, Lam):
        t = t.body
    return validate_anf(t)


# ------------------------------------------------------------------ programs


def type_of(t, types: dict, program):
    """Type of an ANF value or term, given binder types of the enclosing function."""
    if isinstance(t, Var):
        if t.name in types:
            return types[t.name]
        return program.consts[t.name][0]
    if isinstance(t, Const):
        v = t.value
        return BOOL if isinstance(v, bool) else INT if isinstance(v, int) else FLOAT
    if isinstance(t, Let):
        return type_of(t.body, types, program)
    if isinstance(t, Match):
        return type_of(t.thn, types, program)
    if isinstance(t, App):
        fn = t.fn
        if isinstance(fn, Var):
            return program.funcs[fn.name].ret
        name = fn.value.name
        if name == "get":
            return type_of(t.args[0], types, program).elem
        if name == "length":
            return INT
        return BUILTIN_SIGNATURES[name][1]
    if isinstance(t, Assume):
        return DISTRIBUTIONS[t.dist.name][1]
    if isinstance(t, (Observe, Weight, Resample)):
        return TUNIT
    if isinstance(t, Con):
        return TVariant(program.cons[t.name])
    if isinstance(t, RecordLit):
        return record_type([(l, type_of(v, types, program)) for l, v in t.fields])
    if isinstance(t, SeqLit):
        elem = type_of(t.items[0], types, program) if t.items else TUNIT
        return TSeq(elem, len(t.items))
    raise TypeError(f"no type for {t!r}")


def normalize_program(program):
    """Normalize every function body of a checked program, typing the temporaries."""
    taken = set(program.consts) | set(program.funcs)
    for f in program.all_functions():
        taken |= set(f.types) | set(f.params) | term_names(f.body)
    funcs = {}
    for name, f in program.funcs.items():
        funcs[name] = _normalize_fun(f, taken, program)
    main = _normalize_fun(program.main, taken, program)
    return replace(program, funcs=funcs, main=main)


def _normalize_fun(f, taken, program):
    body = normalize(f.body, taken)
    types = dict(f.types)
    _bind_temp_types_ordered(body, types, program)
    return replace(f, body=body, types=types)


def _bind_temp_types_ordered(t, types, program):
    """Type temporaries in evaluation order so every use sees its definition."""
    while isinstance(t, Let):
        if isinstance(t.rhs, Match):
            _bind_temp_types_ordered(t.rhs.thn, types, program)
            _bind_temp_types_ordered(t.rhs.els, types, program)
        if t.name not in types:
            types[t.name] = type_of(t.rhs, types, program)
        t = t.body
    if isinstance(t, Match):
        _bind_temp_types_ordered(t.thn, types, program)
        _bind_temp_types_ordered(t.els, types, program)


# ------------------------------------------------------------------ text form

_HEADER = re.compile(r"^-- (\S+)\((.*)\)$")


def parse_anf_dump(text: str) -> dict:
    """Inverse of the ``anf`` stage dump: ``name -> (params, body)``.

    Bodies are parsed without name resolution (they refer to globals that
    the dump does not repeat), so builtins and constructors stay variables.
    """
    from .frontend.parser import _Parser

    out, name, params, lines = {}, None, (), []

    def flush():
        if name is not None:
            out[name] = (params, _Parser("\n".join(lines)).parse_program())

    for line in text.splitlines():
        m = _HEADER.match(line)
        if m:
            flush()
            name = m.group(1)
            params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
            lines = []
        elif name is not None:
            lines.append(line)
        elif line.strip():
            raise ValueError(f"text before the first function header: {line!r}")
    flush()
    return out
