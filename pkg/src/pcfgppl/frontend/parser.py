"""Recursive-descent parser for ``.cppl`` source text.

The concrete syntax follows the usual ML layout: ``let``/``lam``/``match``
bodies extend as far right as possible, ``t1; t2`` binds loosest and
``if``/``match`` arms are closed by ``else``.
"""

from __future__ import annotations

from ..errors import ParseError
from .lexer import Token, tokenize
from .syntax import (
    BOOL, BUILTIN_SIGNATURES, DISTRIBUTIONS, FLOAT, INT, TUNIT, App, Assume, Builtin,
    Con, ConDecl, Const, Dist, If, Lam, Let, Match, Observe, PCon, PLit, PRecord, PVar,
    PWild, RecBinding, RecLet, RecordLit, Resample, Seq, SeqLit, TFun, TSeq, TVariant,
    TypeDecl, Var, Weight, dist_arity, pattern_vars, record_type,
)

_ATOM_START_KINDS = ("int", "float", "ident")
_ATOM_START_PUNCT = ("(", "[", "{")


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -------------------------------------------------------------- helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_kw(self, text: str) -> bool:
        return self.at("kw", text)

    def at_p(self, text: str) -> bool:
        return self.at("punct", text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text if text is not None else kind
            got = self.tok.text or "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", self.tok.loc)
        return self.advance()

    def ident(self) -> str:
        return self.expect("ident").text

    def error(self, msg: str, tok: Token | None = None):
        raise ParseError(msg, (tok or self.tok).loc)

    # ---------------------------------------------------------- expressions
    def parse_program(self):
        t = self.expr()
        if not self.at("eof"):
            self.error(f"unexpected {self.tok.text!r}")
        return t

    def expr(self):
        start = self.tok
        first = self.ctl()
        if self.at_p(";"):
            self.advance()
            return Seq(first, self.expr(), loc=start.loc)
        return first

    def ctl(self):
        t = self.tok
        if self.at_kw("let"):
            return self.let_expr()
        if self.at_kw("recursive"):
            return self.rec_expr()
        if self.at_kw("lam"):
            self.advance()
            name = self.ident()
            ty = None
            if self.at_p(":"):
                self.advance()
                ty = self.type_expr()
            self.expect("punct", ".")
            return Lam(name, self.expr(), ty, loc=t.loc)
        if self.at_kw("if"):
            self.advance()
            cond = self.expr()
            self.expect("kw", "then")
            thn = self.expr()
            self.expect("kw", "else")
            els = self.expr()
            return If(cond, thn, els, loc=t.loc)
        if self.at_kw("match"):
            self.advance()
            target = self.expr()
            self.expect("kw", "with")
            ptok = self.tok
            pat = self.pattern()
            names = pattern_vars(pat)
            if len(names) != len(set(names)):
                self.error("pattern variables must be distinct", ptok)
            self.expect("kw", "then")
            thn = self.expr()
            self.expect("kw", "else")
            els = self.expr()
            return Match(target, pat, thn, els, loc=t.loc)
        if self.at_kw("type"):
            self.advance()
            name = self.expect("conid").text
            self.expect("kw", "in")
            return TypeDecl(name, self.expr(), loc=t.loc)
        if self.at_kw("con"):
            self.advance()
            name = self.expect("conid").text
            self.expect("punct", ":")
            ty = self.type_expr()
            if not (isinstance(ty, TFun) and len(ty.params) == 1 and isinstance(ty.ret, TVariant)):
                self.error(f"constructor {name} must have a type of the form T -> Variant", t)
            self.expect("kw", "in")
            return ConDecl(name, ty.params[0], ty.ret.name, self.expr(), loc=t.loc)
        return self.app()

    def let_expr(self):
        t = self.expect("kw", "let")
        name = self.ident()
        ty = self.opt_annotation()
        self.expect("punct", "=")
        rhs = self.expr()
        self.expect("kw", "in")
        return Let(name, rhs, self.expr(), ty, loc=t.loc)

    def opt_annotation(self):
        if self.at_p(":"):
            self.advance()
            return self.type_expr()
        return None

    def rec_expr(self):
        t = self.expect("kw", "recursive")
        if not self.at_kw("let"):
            self.error("expected 'let' after 'recursive'")
        bindings = []
        while self.at_kw("let"):
            self.advance()
            name = self.ident()
            ty = self.opt_annotation()
            self.expect("punct", "=")
            bindings.append(RecBinding(name, self.expr(), ty))
        if len({b.name for b in bindings}) != len(bindings):
            self.error("duplicate name in recursive group", t)
        self.expect("kw", "in")
        return RecLet(tuple(bindings), self.expr(), loc=t.loc)

    def app(self):
        t = self.tok
        if self.at_kw("assume"):
            self.advance()
            d = self.atom()
            if not isinstance(d, Dist):
                self.error("assume expects a distribution, e.g. assume (Bernoulli 0.5)", t)
            return Assume(d, loc=t.loc)
        if self.at_kw("weight"):
            self.advance()
            return Weight(self.atom(), loc=t.loc)
        if self.at_kw("observe"):
            self.advance()
            v = self.atom()
            dt = self.tok
            d = self.atom()
            if not isinstance(d, Dist):
                self.error("observe expects a distribution as second argument", dt)
            return Observe(v, d, loc=t.loc)
        if self.at_kw("resample"):
            self.advance()
            return Resample(loc=t.loc)
        if self.at("conid"):
            name = self.advance().text
            if name in DISTRIBUTIONS:
                k = dist_arity(name)
                args = []
                for _ in range(k):
                    if not self.atom_start():
                        self.error(f"distribution {name} expects {k} argument(s), got {len(args)}")
                    args.append(self.atom())
                if self.atom_start():
                    self.error(f"distribution {name} expects {k} argument(s), got more")
                return Dist(name, tuple(args), loc=t.loc)
            if self.atom_start():
                arg = self.atom()
            else:
                arg = RecordLit((), loc=t.loc)
            return Con(name, arg, loc=t.loc)
        head = self.atom()
        args = []
        while self.atom_start():
            args.append(self.atom())
        if not args:
            return head
        return App(head, tuple(args), loc=t.loc)

    def atom_start(self) -> bool:
        t = self.tok
        if t.kind in _ATOM_START_KINDS:
            return True
        if t.kind == "kw" and t.text in ("true", "false"):
            return True
        return t.kind == "punct" and t.text in _ATOM_START_PUNCT

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Const(int(t.text), loc=t.loc)
        if t.kind == "float":
            self.advance()
            return Const(float(t.text), loc=t.loc)
        if self.at_kw("true") or self.at_kw("false"):
            self.advance()
            return Const(t.text == "true", loc=t.loc)
        if t.kind == "ident":
            self.advance()
            return Var(t.text, loc=t.loc)
        if self.at_p("("):
            self.advance()
            if self.at_p(")"):
                self.advance()
                return RecordLit((), loc=t.loc)
            e = self.expr()
            self.expect("punct", ")")
            return e
        if self.at_p("["):
            self.advance()
            items = []
            if not self.at_p("]"):
                items.append(self.expr())
                while self.at_p(","):
                    self.advance()
                    items.append(self.expr())
            self.expect("punct", "]")
            return SeqLit(tuple(items), loc=t.loc)
        if self.at_p("{"):
            self.advance()
            fields = []
            if not self.at_p("}"):
                while True:
                    label = self.ident()
                    self.expect("punct", "=")
                    fields.append((label, self.expr()))
                    if not self.at_p(","):
                        break
                    self.advance()
            self.expect("punct", "}")
            labels = [l for l, _ in fields]
            if len(set(labels)) != len(labels):
                self.error("duplicate record label", t)
            return RecordLit(tuple(fields), loc=t.loc)
        self.error(f"unexpected {t.text or 'end of input'!r}")

    # ------------------------------------------------------------- patterns
    def pattern(self):
        t = self.tok
        if self.at("conid"):
            name = self.advance().text
            if self.pattern_atom_start():
                return PCon(name, self.pattern_atom())
            return PCon(name, PWild())
        return self.pattern_atom()

    def pattern_atom_start(self) -> bool:
        t = self.tok
        return (t.kind in ("int", "float", "ident")
                or (t.kind == "kw" and t.text in ("true", "false"))
                or (t.kind == "punct" and t.text in ("(", "{")))

    def pattern_atom(self):
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return PWild() if t.text == "_" else PVar(t.text)
        if t.kind == "int":
            self.advance()
            return PLit(int(t.text))
        if t.kind == "float":
            self.advance()
            return PLit(float(t.text))
        if self.at_kw("true") or self.at_kw("false"):
            self.advance()
            return PLit(t.text == "true")
        if self.at_p("("):
            self.advance()
            if self.at_p(")"):
                self.advance()
                return PRecord(())
            p = self.pattern()
            self.expect("punct", ")")
            return p
        if self.at_p("{"):
            self.advance()
            fields = []
            if not self.at_p("}"):
                while True:
                    label = self.ident()
                    self.expect("punct", "=")
                    fields.append((label, self.pattern()))
                    if not self.at_p(","):
                        break
                    self.advance()
            self.expect("punct", "}")
            return PRecord(tuple(fields))
        self.error(f"unexpected {t.text or 'end of input'!r} in pattern")

    # ---------------------------------------------------------------- types
    def type_expr(self):
        left = self.type_atom()
        if self.at_p("->"):
            self.advance()
            right = self.type_expr()
            if isinstance(right, TFun):
                return TFun((left,) + right.params, right.ret)
            return TFun((left,), right)
        return left

    def type_atom(self):
        t = self.tok
        if self.at("conid"):
            self.advance()
            return {"Float": FLOAT, "Int": INT, "Bool": BOOL}.get(t.text, TVariant(t.text))
        if self.at_p("("):
            self.advance()
            if self.at_p(")"):
                self.advance()
                return TUNIT
            ty = self.type_expr()
            self.expect("punct", ")")
            return ty
        if self.at_p("["):
            self.advance()
            elem = self.type_expr()
            self.expect("punct", "]")
            return TSeq(elem, None)
        if self.at_p("{"):
            self.advance()
            fields = []
            if not self.at_p("}"):
                while True:
                    label = self.ident()
                    self.expect("punct", ":")
                    fields.append((label, self.type_expr()))
                    if not self.at_p(","):
                        break
                    self.advance()
            self.expect("punct", "}")
            return record_type(fields)
        self.error(f"unexpected {t.text or 'end of input'!r} in type")


def _resolve(t, scope: frozenset, under_dist_site: bool = False):
    """Check scoping, turn free builtin names into constants, and police
    where distribution constructions may appear."""
    r = _resolve
    if isinstance(t, Var):
        if t.name in scope:
            return t
        if t.name in BUILTIN_SIGNATURES:
            return Const(Builtin(t.name), loc=t.loc)
        raise ParseError(f"unbound variable {t.name!r}", t.loc)
    if isinstance(t, Const) or isinstance(t, Resample):
        return t
    if isinstance(t, Dist):
        if not under_dist_site:
            raise ParseError(
                f"distribution {t.name} must occur immediately under assume or observe", t.loc)
        return Dist(t.name, tuple(r(a, scope) for a in t.args), loc=t.loc)
    if isinstance(t, Lam):
        return Lam(t.param, r(t.body, scope | {t.param}), t.ty, loc=t.loc)
    if isinstance(t, App):
        return App(r(t.fn, scope), tuple(r(a, scope) for a in t.args), loc=t.loc)
    if isinstance(t, Let):
        return Let(t.name, r(t.rhs, scope), r(t.body, scope | {t.name}), t.ty, loc=t.loc)
    if isinstance(t, RecLet):
        inner = scope | {b.name for b in t.bindings}
        binds = tuple(RecBinding(b.name, r(b.rhs, inner), b.ty) for b in t.bindings)
        return RecLet(binds, r(t.body, inner), loc=t.loc)
    if isinstance(t, Con):
        return Con(t.name, r(t.arg, scope), loc=t.loc)
    if isinstance(t, Match):
        names = frozenset(pattern_vars(t.pat))
        return Match(r(t.target, scope), t.pat, r(t.thn, scope | names), r(t.els, scope),
                     loc=t.loc)
    if isinstance(t, If):
        return If(r(t.cond, scope), r(t.thn, scope), r(t.els, scope), loc=t.loc)
    if isinstance(t, Seq):
        return Seq(r(t.first, scope), r(t.second, scope), loc=t.loc)
    if isinstance(t, SeqLit):
        return SeqLit(tuple(r(a, scope) for a in t.items), loc=t.loc)
    if isinstance(t, RecordLit):
        return RecordLit(tuple((l, r(v, scope)) for l, v in t.fields), loc=t.loc)
    if isinstance(t, Assume):
        return Assume(r(t.dist, scope, True), loc=t.loc)
    if isinstance(t, Observe):
        return Observe(r(t.value, scope), r(t.dist, scope, True), loc=t.loc)
    if isinstance(t, Weight):
        return Weight(r(t.arg, scope), loc=t.loc)
    if isinstance(t, TypeDecl):
        return TypeDecl(t.name, r(t.body, scope), loc=t.loc)
    if isinstance(t, ConDecl):
        return ConDecl(t.name, t.payload, t.variant, r(t.body, scope), loc=t.loc)
    raise TypeError(f"unknown term {t!r}")


def parse_raw(source: str):
    """Parse without desugaring (``if`` and ``;`` remain)."""
    return _resolve(_Parser(source).parse_program(), frozenset())


def parse(source: str):
    """Parse source text into a desugared term."""
    from .desugar import desugar

    return desugar(parse_raw(source))


def parse_type(text: str):
    p = _Parser(text)
    ty = p.type_expr()
    if not p.at("eof"):
        p.error("trailing input after type")
    return ty
