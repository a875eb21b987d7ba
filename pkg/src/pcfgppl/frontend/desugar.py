"""Removal of surface sugar: ``if``, ``;`` and nested patterns."""

from __future__ import annotations

from .syntax import (
    PAT_TRUE, App, Assume, Con, ConDecl, Const, Dist, If, Lam, Let, Match, Observe, PCon,
    PLit, PRecord, PVar, PWild, RecBinding, RecLet, RecordLit, Resample, Seq, SeqLit,
    TypeDecl, Var, Weight,
)


def term_names(t, acc: set | None = None) -> set:
    """Every identifier bound or referenced anywhere in ``t``."""
    acc = set() if acc is None else acc
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            acc.add(t.name)
        elif isinstance(t, Lam):
            acc.add(t.param)
            stack.append(t.body)
        elif isinstance(t, Let):
            acc.add(t.name)
            stack += [t.rhs, t.body]
        elif isinstance(t, RecLet):
            for b in t.bindings:
                acc.add(b.name)
                stack.append(b.rhs)
            stack.append(t.body)
        elif isinstance(t, Match):
            _pattern_names(t.pat, acc)
            stack += [t.target, t.thn, t.els]
        elif isinstance(t, App):
            stack.append(t.fn)
            stack.extend(t.args)
        elif isinstance(t, (SeqLit,)):
            stack.extend(t.items)
        elif isinstance(t, RecordLit):
            stack.extend(v for _, v in t.fields)
        elif isinstance(t, Dist):
            stack.extend(t.args)
        elif isinstance(t, (Con,)):
            stack.append(t.arg)
        elif isinstance(t, Assume):
            stack.append(t.dist)
        elif isinstance(t, Observe):
            stack += [t.value, t.dist]
        elif isinstance(t, Weight):
            stack.append(t.arg)
        elif isinstance(t, If):
            stack += [t.cond, t.thn, t.els]
        elif isinstance(t, Seq):
            stack += [t.first, t.second]
        elif isinstance(t, (TypeDecl, ConDecl)):
            stack.append(t.body)
    return acc


def _pattern_names(p, acc):
    if isinstance(p, PVar):
        acc.add(p.name)
    elif isinstance(p, PCon):
        _pattern_names(p.sub, acc)
    elif isinstance(p, PRecord):
        for _, sub in p.fields:
            _pattern_names(sub, acc)


class FreshNames:
    """Deterministic fresh identifiers with a reserved prefix, avoiding ``taken``."""

    def __init__(self, prefix: str, taken: set):
        self.prefix = prefix
        self.taken = taken
        self.counter = 0

    def reset(self):
        self.counter = 0

    def __call__(self) -> str:
        while True:
            name = f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def _is_binder(p) -> bool:
    return isinstance(p, (PVar, PWild))


def is_flat_pattern(p) -> bool:
    if isinstance(p, (PVar, PWild, PLit)):
        return True
    if isinstance(p, PCon):
        return _is_binder(p.sub) or (isinstance(p.sub, PRecord)
                                     and all(_is_binder(s) for _, s in p.sub.fields))
    if isinstance(p, PRecord):
        return all(_is_binder(s) for _, s in p.fields)
    return False


def _flatten_match(target, pat, thn, els, fresh, loc):
    if is_flat_pattern(pat):
        return Match(target, pat, thn, els, loc=loc)
    if isinstance(pat, PCon):
        if isinstance(pat.sub, PRecord):
            v = fresh()
            inner = _flatten_match(Var(v), pat.sub, thn, els, fresh, loc)
            return Match(target, PCon(pat.name, PVar(v)), inner, els, loc=loc)
        v = fresh()
        inner = _flatten_match(Var(v), pat.sub, thn, els, fresh, loc)
        return Match(target, PCon(pat.name, PVar(v)), inner, els, loc=loc)
    # record with nested field patterns
    fields, nested = [], []
    for label, sub in pat.fields:
        if _is_binder(sub):
            fields.append((label, sub))
        else:
            v = fresh()
            fields.append((label, PVar(v)))
            nested.append((v, sub))
    body = thn
    for v, sub in reversed(nested):
        body = _flatten_match(Var(v), sub, body, els, fresh, loc)
    return Match(target, PRecord(tuple(fields)), body, els, loc=loc)


def desugar(t):
    """Rewrite ``if``/``;`` into ``match``/``let`` and flatten deep patterns.

    Fresh binders are ``_s0, _s1, ...``, skipping any name already in ``t``,
    so the result is a pure function of ``t`` and ``desugar`` is idempotent.
    """
    fresh = FreshNames("_s", term_names(t))
    return _desugar(t, fresh)


def _desugar(t, fresh):
    d = lambda x: _desugar(x, fresh)  # noqa: E731
    if isinstance(t, (Var, Const, Resample)):
        return t
    if isinstance(t, If):
        return Match(d(t.cond), PAT_TRUE, d(t.thn), d(t.els), loc=t.loc)
    if isinstance(t, Seq):
        first = d(t.first)
        return Let(fresh(), first, d(t.second), loc=t.loc)
    if isinstance(t, Match):
        return _flatten_match(d(t.target), t.pat, d(t.thn), d(t.els), fresh, t.loc)
    if isinstance(t, Lam):
        return Lam(t.param, d(t.body), t.ty, loc=t.loc)
    if isinstance(t, App):
        return App(d(t.fn), tuple(d(a) for a in t.args), loc=t.loc)
    if isinstance(t, Let):
        return Let(t.name, d(t.rhs), d(t.body), t.ty, loc=t.loc)
    if isinstance(t, RecLet):
        return RecLet(tuple(RecBinding(b.name, d(b.rhs), b.ty) for b in t.bindings),
                      d(t.body), loc=t.loc)
    if isinstance(t, Con):
        return Con(t.name, d(t.arg), loc=t.loc)
    if isinstance(t, SeqLit):
        return SeqLit(tuple(d(a) for a in t.items), loc=t.loc)
    if isinstance(t, RecordLit):
        return RecordLit(tuple((l, d(v)) for l, v in t.fields), loc=t.loc)
    if isinstance(t, Dist):
        return Dist(t.name, tuple(d(a) for a in t.args), loc=t.loc)
    if isinstance(t, Assume):
        return Assume(d(t.dist), loc=t.loc)
    if isinstance(t, Observe):
        return Observe(d(t.value), d(t.dist), loc=t.loc)
    if isinstance(t, Weight):
        return Weight(d(t.arg), loc=t.loc)
    if isinstance(t, TypeDecl):
        return TypeDecl(t.name, d(t.body), loc=t.loc)
    if isinstance(t, ConDecl):
        return ConDecl(t.name, t.payload, t.variant, d(t.body), loc=t.loc)
    raise TypeError(f"unknown term {t!r}")
