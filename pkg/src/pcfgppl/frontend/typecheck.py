"""Monomorphic type inference restricted to stack-allocatable values.

Every value the compiled program handles must have a size known at compile
time: scalars, records, fixed-length sequences and variants. Variants whose
definition is recursive (trees, lists) are only allowed as constant data
embedded in the program; building one at run time would need a heap.

``typecheck_lite`` returns the term with every binder annotated.
``split_program`` then separates declarations, constant data, top-level
functions and the main body into a :class:`Program`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..errors import TypeCheckError
from ..prims import PRIM_FUNCS
from .syntax import (
    BOOL, BUILTIN_SIGNATURES, DISTRIBUTIONS, FLOAT, INT, TUNIT, App, Assume, Builtin, Con,
    ConDecl, Const, Dist, Lam, Let, Match, Observe, PCon, PLit, PRecord, PVar, PWild,
    RecBinding, RecLet, RecordLit, Resample, SeqLit, TFun, TPrim, TRecord, TSeq, TVar,
    TVariant, TypeDecl, Var, Weight, free_vars, pattern_vars, record_type,
)

MAIN = "<main>"


# ------------------------------------------------------------------ uniquify


def uniquify(t):
    """Rename shadowing binders so that every binder in ``t`` is distinct.

    The first binder of a name keeps it; later ones become ``name'1``,
    ``name'2``, ... (``'`` may appear in identifiers but the renaming never
    reuses a name that already occurs in the program).
    """
    from .desugar import term_names

    taken = term_names(t)
    seen: set = set()
    counters: dict = {}

    def bind(name, env):
        if name not in seen:
            seen.add(name)
            return name, {**env, name: name}
        k = counters.get(name, 0)
        while True:
            k += 1
            new = f"{name}'{k}"
            if new not in taken and new not in seen:
                break
        counters[name] = k
        seen.add(new)
        return new, {**env, name: new}

    def pat(p, env):
        if isinstance(p, PVar):
            new, env = bind(p.name, env)
            return PVar(new), env
        if isinstance(p, PCon):
            sub, env = pat(p.sub, env)
            return PCon(p.name, sub), env
        if isinstance(p, PRecord):
            fields = []
            for label, sub in p.fields:
                sub, env = pat(sub, env)
                fields.append((label, sub))
            return PRecord(tuple(fields)), env
        return p, env

    def go(t, env):
        if isinstance(t, Var):
            return Var(env.get(t.name, t.name), loc=t.loc)
        if isinstance(t, Lam):
            new, inner = bind(t.param, env)
            return Lam(new, go(t.body, inner), t.ty, loc=t.loc)
        if isinstance(t, Let):
            rhs = go(t.rhs, env)
            new, inner = bind(t.name, env)
            return Let(new, rhs, go(t.body, inner), t.ty, loc=t.loc)
        if isinstance(t, RecLet):
            inner = env
            names = []
            for b in t.bindings:
                new, inner = bind(b.name, inner)
                names.append(new)
            binds = tuple(RecBinding(n, go(b.rhs, inner), b.ty)
                          for n, b in zip(names, t.bindings))
            return RecLet(binds, go(t.body, inner), loc=t.loc)
        if isinstance(t, Match):
            target = go(t.target, env)
            p, inner = pat(t.pat, env)
            return Match(target, p, go(t.thn, inner), go(t.els, env), loc=t.loc)
        return _map_children(t, lambda c: go(c, env))

    return go(t, {})


def _map_children(t, f):
    if isinstance(t, (Var, Const, Resample)):
        return t
    if isinstance(t, App):
        return App(f(t.fn), tuple(f(a) for a in t.args), loc=t.loc)
    if isinstance(t, Con):
        return Con(t.name, f(t.arg), loc=t.loc)
    if isinstance(t, SeqLit):
        return SeqLit(tuple(f(a) for a in t.items), loc=t.loc)
    if isinstance(t, RecordLit):
        return RecordLit(tuple((l, f(v)) for l, v in t.fields), loc=t.loc)
    if isinstance(t, Dist):
        return Dist(t.name, tuple(f(a) for a in t.args), loc=t.loc)
    if isinstance(t, Assume):
        return Assume(f(t.dist), loc=t.loc)
    if isinstance(t, Observe):
        return Observe(f(t.value), f(t.dist), loc=t.loc)
    if isinstance(t, Weight):
        return Weight(f(t.arg), loc=t.loc)
    if isinstance(t, TypeDecl):
        return TypeDecl(t.name, f(t.body), loc=t.loc)
    if isinstance(t, ConDecl):
        return ConDecl(t.name, t.payload, t.variant, f(t.body), loc=t.loc)
    raise TypeError(f"unexpected term {t!r}")


# ------------------------------------------------------------------ types


def resolve(ty):
    """Follow unification links and rebuild the type without bound variables."""
    while isinstance(ty, TVar) and ty.ref is not None:
        ty = ty.ref
    if isinstance(ty, TRecord):
        return TRecord(tuple((l, resolve(t)) for l, t in ty.fields))
    if isinstance(ty, TSeq):
        return TSeq(resolve(ty.elem), _resolve_len(ty.length))
    if isinstance(ty, TFun):
        return TFun(tuple(resolve(p) for p in ty.params), resolve(ty.ret))
    return ty


def _resolve_len(n):
    while isinstance(n, TVar) and n.ref is not None:
        n = n.ref
    return n


def _occurs(v, ty) -> bool:
    ty = _shallow(ty)
    if ty is v:
        return True
    if isinstance(ty, TRecord):
        return any(_occurs(v, t) for _, t in ty.fields)
    if isinstance(ty, TSeq):
        return _occurs(v, ty.elem)
    if isinstance(ty, TFun):
        return any(_occurs(v, p) for p in ty.params) or _occurs(v, ty.ret)
    return False


def _shallow(ty):
    while isinstance(ty, TVar) and ty.ref is not None:
        ty = ty.ref
    return ty


@dataclass
class VariantInfo:
    name: str
    cons: dict = field(default_factory=dict)  # constructor -> payload type
    recursive: bool = False


@dataclass
class FunDef:
    name: str
    params: tuple
    param_types: tuple
    ret: object
    body: object
    types: dict  # binder -> type, for every binder of the body and the params


@dataclass
class Program:
    variants: dict
    cons: dict  # constructor -> variant name
    consts: dict  # name -> (type, value)
    funcs: dict  # name -> FunDef, in source order
    main: FunDef

    def all_functions(self):
        return list(self.funcs.values()) + [self.main]

    def con_payload(self, con: str):
        return self.variants[self.cons[con]].cons[con]


# ------------------------------------------------------------------ checker


def _lam_params(lam):
    params = []
    t = lam
    while isinstance(t, Lam):
        params.append(t)
        t = t.body
    return params, t


def _spine(t):
    fn, args = t.fn, tuple(t.args)
    while isinstance(fn, App):
        args = tuple(fn.args) + args
        fn = fn.fn
    return fn, args


def is_static(t, consts) -> bool:
    """Closed data that can be evaluated at compile time."""
    if isinstance(t, Const):
        return not isinstance(t.value, Builtin)
    if isinstance(t, Var):
        return t.name in consts
    if isinstance(t, RecordLit):
        return all(is_static(v, consts) for _, v in t.fields)
    if isinstance(t, SeqLit):
        return all(is_static(v, consts) for v in t.items)
    if isinstance(t, Con):
        return is_static(t.arg, consts)
    if isinstance(t, App):
        fn, args = _spine(t)
        return (isinstance(fn, Const) and isinstance(fn.value, Builtin)
                and all(is_static(a, consts) for a in args))
    return False


def top_level_chain(t):
    """Yield ``(kind, node)`` for the declaration spine at the program root.

    kind is one of ``type``, ``con``, ``fun``, ``rec``, ``const``, ``let``;
    the last item is ``("main", body)``.
    """
    consts: set = set()
    while True:
        if isinstance(t, TypeDecl):
            yield "type", t
        elif isinstance(t, ConDecl):
            yield "con", t
        elif isinstance(t, RecLet):
            yield "rec", t
        elif isinstance(t, Let) and isinstance(t.rhs, Lam):
            yield "fun", t
        elif isinstance(t, Let) and is_static(t.rhs, consts):
            consts.add(t.name)
            yield "const", t
        elif isinstance(t, Let):
            yield "let", t
        else:
            yield "main", t
            return
        t = t.body


class _Checker:
    def __init__(self):
        self.counter = itertools.count()
        self.types: dict = {}  # binder -> Type
        self.funs: dict = {}  # function name -> TFun
        self.variants: dict = {}
        self.cons: dict = {}
        self.consts: set = set()
        self.seq_nodes: list = []

    def fresh(self):
        return TVar(next(self.counter))

    def error(self, msg, node=None):
        raise TypeCheckError(msg, getattr(node, "loc", None))

    # unification -------------------------------------------------------
    def unify(self, a, b, node=None):
        a, b = _shallow(a), _shallow(b)
        if a is b:
            return
        if isinstance(a, TVar):
            if _occurs(a, b):
                self.error(f"infinite type {a} = {resolve(b)}", node)
            a.ref = b
            return
        if isinstance(b, TVar):
            self.unify(b, a, node)
            return
        if isinstance(a, TPrim) and isinstance(b, TPrim) and a.name == b.name:
            return
        if isinstance(a, TVariant) and isinstance(b, TVariant) and a.name == b.name:
            return
        if isinstance(a, TRecord) and isinstance(b, TRecord) and a.labels() == b.labels():
            for (_, x), (_, y) in zip(a.fields, b.fields):
                self.unify(x, y, node)
            return
        if isinstance(a, TSeq) and isinstance(b, TSeq):
            self.unify(a.elem, b.elem, node)
            self.unify_len(a.length, b.length, node)
            return
        if isinstance(a, TFun) and isinstance(b, TFun) and len(a.params) == len(b.params):
            for x, y in zip(a.params, b.params):
                self.unify(x, y, node)
            self.unify(a.ret, b.ret, node)
            return
        self.error(f"type mismatch: expected {resolve(b)}, found {resolve(a)}", node)

    def unify_len(self, m, n, node):
        m, n = _resolve_len(m), _resolve_len(n)
        if m is n:
            return
        if isinstance(m, TVar):
            m.ref = n
        elif isinstance(n, TVar):
            n.ref = m
        elif m != n:
            self.error(f"sequence length mismatch: {m} vs {n}", node)

    def instantiate_annotation(self, ty):
        """Annotations write ``[T]`` without a length; give each a length variable."""
        if isinstance(ty, TSeq):
            n = ty.length if ty.length is not None else self.fresh()
            return TSeq(self.instantiate_annotation(ty.elem), n)
        if isinstance(ty, TRecord):
            return TRecord(tuple((l, self.instantiate_annotation(t)) for l, t in ty.fields))
        if isinstance(ty, TFun):
            return TFun(tuple(self.instantiate_annotation(p) for p in ty.params),
                        self.instantiate_annotation(ty.ret))
        if isinstance(ty, TVariant) and ty.name not in self.variants:
            self.error(f"unknown type {ty.name}")
        return ty

    def bind(self, name, ty):
        self.types[name] = ty

    # declarations -------------------------------------------------------
    def declare_type(self, t):
        if t.name in self.variants:
            self.error(f"type {t.name} declared twice", t)
        if t.name in ("Float", "Int", "Bool"):
            self.error(f"cannot redeclare builtin type {t.name}", t)
        self.variants[t.name] = VariantInfo(t.name)

    def declare_con(self, t):
        if t.variant not in self.variants:
            self.error(f"constructor {t.name} refers to undeclared type {t.variant}", t)
        if t.name in self.cons:
            self.error(f"constructor {t.name} declared twice", t)
        self.cons[t.name] = t.variant
        self.variants[t.variant].cons[t.name] = self.instantiate_annotation(t.payload)

    # terms --------------------------------------------------------------
    def program(self, t):
        for kind, node in top_level_chain(t):
            if kind == "type":
                self.declare_type(node)
            elif kind == "con":
                self.declare_con(node)
            elif kind == "rec":
                self.rec_group(node)
            elif kind == "fun":
                self.function_group([RecBinding(node.name, node.rhs, node.ty)], node)
            elif kind == "const":
                self.consts.add(node.name)
                self.let_binding(node)
            elif kind == "let":
                self.let_binding(node)
            else:
                self.result = self.infer(node)

    def let_binding(self, t):
        ty = self.infer(t.rhs)
        if t.ty is not None:
            self.unify(ty, self.instantiate_annotation(t.ty), t)
        self.bind(t.name, ty)
        return ty

    def rec_group(self, t):
        for b in t.bindings:
            if not isinstance(b.rhs, Lam):
                self.error(f"recursive binding {b.name} must be a function", t)
        self.function_group(list(t.bindings), t)

    def function_group(self, bindings, node):
        for b in bindings:
            params, _ = _lam_params(b.rhs)
            fty = TFun(tuple(self.fresh() for _ in params), self.fresh())
            if b.ty is not None:
                self.unify(fty, self.instantiate_annotation(b.ty), node)
            self.funs[b.name] = fty
        for b in bindings:
            params, body = _lam_params(b.rhs)
            fty = self.funs[b.name]
            for lam, pty in zip(params, fty.params):
                if lam.ty is not None:
                    self.unify(pty, self.instantiate_annotation(lam.ty), lam)
                self.bind(lam.param, pty)
            self.unify(self.infer(body), fty.ret, body)

    def infer(self, t):
        if isinstance(t, Const):
            v = t.value
            if isinstance(v, Builtin):
                self.error(f"builtin {v.name} must be applied to all its arguments", t)
            if isinstance(v, bool):
                return BOOL
            return INT if isinstance(v, int) else FLOAT
        if isinstance(t, Var):
            if t.name in self.funs:
                self.error(f"function {t.name} used as a value; functions are not first-class", t)
            return self.types[t.name]
        if isinstance(t, Let):
            if isinstance(t.rhs, Lam):
                self.error("nested functions are not supported; define functions at top level", t)
            self.let_binding(t)
            return self.infer(t.body)
        if isinstance(t, RecLet):
            self.error("recursive functions must be defined at top level", t)
        if isinstance(t, Lam):
            self.error("nested functions are not supported; define functions at top level", t)
        if isinstance(t, (TypeDecl, ConDecl)):
            self.error("type declarations must appear at top level", t)
        if isinstance(t, App):
            return self.app(t)
        if isinstance(t, RecordLit):
            return record_type([(l, self.infer(v)) for l, v in t.fields])
        if isinstance(t, SeqLit):
            elem = self.fresh()
            for item in t.items:
                self.unify(self.infer(item), elem, item)
            return TSeq(elem, len(t.items))
        if isinstance(t, Con):
            if t.name not in self.cons:
                self.error(f"unknown constructor {t.name}", t)
            variant = self.cons[t.name]
            self.unify(self.infer(t.arg), self.variants[variant].cons[t.name], t)
            return TVariant(variant)
        if isinstance(t, Assume):
            return self.dist(t.dist)
        if isinstance(t, Observe):
            self.unify(self.infer(t.value), self.dist(t.dist), t)
            return TUNIT
        if isinstance(t, Weight):
            self.unify(self.infer(t.arg), FLOAT, t)
            return TUNIT
        if isinstance(t, Resample):
            return TUNIT
        if isinstance(t, Match):
            target = self.infer(t.target)
            self.pattern(t.pat, target, t)
            ty = self.infer(t.thn)
            self.unify(self.infer(t.els), ty, t.els)
            return ty
        if isinstance(t, Dist):
            self.error("distributions may only appear under assume or observe", t)
        self.error(f"unsupported term {type(t).__name__}", t)

    def dist(self, d):
        params, value = DISTRIBUTIONS[d.name]
        for a, p in zip(d.args, params):
            self.unify(self.infer(a), p, a)
        return value

    def app(self, t):
        fn, args = _spine(t)
        if isinstance(fn, Const) and isinstance(fn.value, Builtin):
            name = fn.value.name
            argtys = [self.infer(a) for a in args]
            sig = BUILTIN_SIGNATURES[name]
            if name == "get":
                self._arity(name, 2, args, t)
                elem = self.fresh()
                self.unify(argtys[0], TSeq(elem, self.fresh()), args[0])
                self.unify(argtys[1], INT, args[1])
                return elem
            if name == "length":
                self._arity(name, 1, args, t)
                self.unify(argtys[0], TSeq(self.fresh(), self.fresh()), args[0])
                return INT
            params, ret = sig
            self._arity(name, len(params), args, t)
            for a, at, p in zip(args, argtys, params):
                self.unify(at, p, a)
            return ret
        if isinstance(fn, Var) and fn.name in self.funs:
            fty = self.funs[fn.name]
            self._arity(fn.name, len(fty.params), args, t)
            for a, p in zip(args, fty.params):
                self.unify(self.infer(a), p, a)
            return fty.ret
        if isinstance(fn, Var):
            self.error(f"{fn.name} is not a function", t)
        self.error("only named functions and builtins can be applied", t)

    def _arity(self, name, k, args, node):
        if len(args) < k:
            self.error(f"partial application of {name} ({len(args)} of {k} arguments) "
                       "is not supported", node)
        if len(args) > k:
            self.error(f"{name} applied to {len(args)} arguments but takes {k}", node)

    def pattern(self, p, ty, node):
        if isinstance(p, PWild):
            return
        if isinstance(p, PVar):
            self.bind(p.name, ty)
            return
        if isinstance(p, PLit):
            v = p.value
            self.unify(ty, BOOL if isinstance(v, bool) else INT if isinstance(v, int) else FLOAT,
                       node)
            return
        if isinstance(p, PCon):
            if p.name not in self.cons:
                self.error(f"unknown constructor {p.name}", node)
            variant = self.cons[p.name]
            self.unify(ty, TVariant(variant), node)
            self.pattern(p.sub, self.variants[variant].cons[p.name], node)
            return
        if isinstance(p, PRecord):
            rty = resolve(ty)
            if not isinstance(rty, TRecord):
                if isinstance(rty, TVar):
                    self.error("the type of a record pattern's target must be known", node)
                self.error(f"record pattern used on a value of type {rty}", node)
            have = dict(rty.fields)
            for label, sub in p.fields:
                if label not in have:
                    self.error(f"record of type {rty} has no label {label}", node)
                self.pattern(sub, have[label], node)
            return
        raise TypeError(p)

    # results -------------------------------------------------------------
    def final(self, ty, node=None):
        ty = resolve(ty)
        return self._default(ty, node)

    def _default(self, ty, node):
        if isinstance(ty, TVar):
            return TUNIT
        if isinstance(ty, TRecord):
            return TRecord(tuple((l, self._default(t, node)) for l, t in ty.fields))
        if isinstance(ty, TSeq):
            if not isinstance(ty.length, int):
                self.error("cannot determine the length of a sequence at compile time", node)
            return TSeq(self._default(ty.elem, node), ty.length)
        if isinstance(ty, TFun):
            return TFun(tuple(self._default(p, node) for p in ty.params),
                        self._default(ty.ret, node))
        return ty


def _annotate(t, ck: _Checker):
    a = lambda x: _annotate(x, ck)  # noqa: E731
    if isinstance(t, Let):
        if isinstance(t.rhs, Lam):
            return Let(t.name, _annotate_lam(t.rhs, ck), a(t.body), ck.final(ck.funs[t.name]),
                       loc=t.loc)
        return Let(t.name, a(t.rhs), a(t.body), ck.final(ck.types[t.name], t), loc=t.loc)
    if isinstance(t, RecLet):
        binds = tuple(RecBinding(b.name, _annotate_lam(b.rhs, ck), ck.final(ck.funs[b.name]))
                      for b in t.bindings)
        return RecLet(binds, a(t.body), loc=t.loc)
    if isinstance(t, Match):
        return Match(a(t.target), t.pat, a(t.thn), a(t.els), loc=t.loc)
    return _map_children(t, a)


def _annotate_lam(t, ck):
    if isinstance(t, Lam):
        return Lam(t.param, _annotate_lam(t.body, ck), ck.final(ck.types[t.param]), loc=t.loc)
    return _annotate(t, ck)


def _contains_recursive(ty, variants, seen=()) -> bool:
    if isinstance(ty, TVariant):
        if ty.name in seen:
            return True
        return any(_contains_recursive(p, variants, seen + (ty.name,))
                   for p in variants[ty.name].cons.values())
    if isinstance(ty, TRecord):
        return any(_contains_recursive(t, variants, seen) for _, t in ty.fields)
    if isinstance(ty, TSeq):
        return _contains_recursive(ty.elem, variants, seen)
    return False


def _mark_recursive(variants):
    for info in variants.values():
        info.recursive = any(_contains_recursive(p, variants, (info.name,))
                             for p in info.cons.values())


def _check_no_runtime_recursive_data(t, variants, cons):
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Con) and variants[cons[t.name]].recursive:
            raise TypeCheckError(
                f"dynamically sized return value: constructing {t.name} of the recursive "
                f"type {cons[t.name]} at run time needs heap allocation; only constant "
                "data of recursive types is supported", t.loc)
        if isinstance(t, Let):
            stack += [t.rhs, t.body]
        elif isinstance(t, Lam):
            stack.append(t.body)
        elif isinstance(t, Match):
            stack += [t.target, t.thn, t.els]
        elif isinstance(t, RecLet):
            stack += [b.rhs for b in t.bindings] + [t.body]
        else:
            from .syntax import children

            stack.extend(children(t))


def _run_checker(t):
    ck = _Checker()
    ck.program(t)
    for info in ck.variants.values():
        info.cons = {c: ck.final(p) for c, p in info.cons.items()}
    _mark_recursive(ck.variants)
    for kind, node in top_level_chain(t):
        if kind in ("fun", "rec", "let", "main"):
            target = node.rhs if kind in ("fun", "let") else node
            _check_no_runtime_recursive_data(target, ck.variants, ck.cons)
            if kind == "rec":
                for b in node.bindings:
                    _check_no_runtime_recursive_data(b.rhs, ck.variants, ck.cons)
    for name, fty in ck.funs.items():
        for p in ck.final(fty).params:
            if isinstance(p, TFun):
                raise TypeCheckError(f"function {name} takes a function argument; "
                                     "passing functions as arguments is not supported")
    return ck


def typecheck_lite(t):
    """Infer monomorphic types; returns ``t`` (uniquified) with every binder annotated."""
    t = uniquify(t)
    ck = _run_checker(t)
    return _annotate(t, ck)


def result_type(t):
    t = uniquify(t)
    ck = _run_checker(t)
    return ck.final(ck.result)


# ------------------------------------------------------------------ split


def _collect_types(body, ck, out):
    """Binder types for every let/pattern binder inside ``body``."""
    stack = [body]
    from .syntax import children

    while stack:
        t = stack.pop()
        if isinstance(t, Let):
            out[t.name] = ck.final(ck.types[t.name], t)
            stack += [t.rhs, t.body]
        elif isinstance(t, Match):
            for v in pattern_vars(t.pat):
                out[v] = ck.final(ck.types[v], t)
            stack += [t.target, t.thn, t.els]
        else:
            stack.extend(children(t))
    return out


def eval_static(t, consts, variants_cons):
    """Evaluate closed constant data to its runtime representation."""
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        return consts[t.name][1]
    if isinstance(t, RecordLit):
        return tuple(eval_static(v, consts, variants_cons) for _, v in sorted(t.fields,
                                                                             key=lambda f: f[0]))
    if isinstance(t, SeqLit):
        return tuple(eval_static(v, consts, variants_cons) for v in t.items)
    if isinstance(t, Con):
        return (t.name, eval_static(t.arg, consts, variants_cons))
    if isinstance(t, App):
        fn, args = _spine(t)
        vals = [eval_static(a, consts, variants_cons) for a in args]
        return PRIM_FUNCS[fn.value.name](*vals)
    raise TypeError(t)


def check_program(t) -> Program:
    """Typecheck a desugared term and split it into declarations, constants,
    top-level functions and the main body."""
    t = uniquify(t)
    ck = _run_checker(t)
    consts: dict = {}
    funcs: dict = {}
    main_lets = []
    main_body = None
    for kind, node in top_level_chain(t):
        if kind == "const":
            consts[node.name] = (ck.final(ck.types[node.name], node),
                                 eval_static(node.rhs, consts, ck.cons))
        elif kind in ("fun", "rec"):
            binds = [node] if kind == "fun" else node.bindings
            for b in binds:
                funcs[b.name] = _fundef(b.name, b.rhs, ck)
        elif kind == "let":
            main_lets.append(node)
        elif kind == "main":
            main_body = node
    globals_ = set(consts) | set(funcs)
    for f in funcs.values():
        local = set(f.params) | set(f.types)
        bad = free_vars(f.body) - local - globals_
        if bad:
            raise TypeCheckError(
                f"function {f.name} refers to {', '.join(sorted(bad))}, which is neither a "
                "parameter nor top-level constant data; closures are not supported")
    body = main_body
    for node in reversed(main_lets):
        body = Let(node.name, node.rhs, body, ck.final(ck.types[node.name], node), loc=node.loc)
    main_types = _collect_types(body, ck, {})
    main = FunDef(MAIN, (), (), ck.final(ck.result), body, main_types)
    return Program(ck.variants, dict(ck.cons), consts, funcs, main)


def _fundef(name, lam, ck) -> FunDef:
    params, body = _lam_params(lam)
    fty = ck.final(ck.funs[name])
    types = {lam_.param: pt for lam_, pt in zip(params, fty.params)}
    _collect_types(body, ck, types)
    return FunDef(name, tuple(p.param for p in params), fty.params, fty.ret, body, types)


def compile_frontend(source: str) -> Program:
    from .parser import parse

    return check_program(parse(source))
