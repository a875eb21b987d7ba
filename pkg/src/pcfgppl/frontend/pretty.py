"""Canonical pretty-printer; ``parse_raw(pretty(t)) == t`` for every term."""

from __future__ import annotations

from .syntax import (
    App, Assume, Builtin, Con, ConDecl, Const, Dist, If, Lam, Let, Match, Observe, PCon,
    PLit, PRecord, PVar, PWild, RecLet, RecordLit, Resample, Seq, SeqLit, TFun, TVariant,
    TypeDecl, Var, Weight,
)

_CTL = (Let, RecLet, Lam, If, Match, TypeDecl, ConDecl, Seq)


def fmt_const(v) -> str:
    if isinstance(v, Builtin):
        return v.name
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        r = repr(v)
        if r in ("inf", "-inf", "nan"):
            raise ValueError(f"float literal {r} has no source form")
        return r
    return str(v)


def fmt_pattern(p, nested: bool = False) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PWild):
        return "_"
    if isinstance(p, PLit):
        return fmt_const(p.value)
    if isinstance(p, PRecord):
        if not p.fields:
            return "()"
        return "{" + ", ".join(f"{l} = {fmt_pattern(s)}" for l, s in p.fields) + "}"
    if isinstance(p, PCon):
        if isinstance(p.sub, PWild):
            s = p.name
        else:
            s = f"{p.name} {fmt_pattern(p.sub, True)}"
        return f"({s})" if nested else s
    raise TypeError(f"unknown pattern {p!r}")


def _ann(ty) -> str:
    return f": {ty}" if ty is not None else ""


def _is_atom(t) -> bool:
    return isinstance(t, (Var, Const, RecordLit, SeqLit))


def _atom(t, ind: int) -> str:
    s = _pp(t, ind)
    return s if _is_atom(t) else f"({s})"


def _pp(t, ind: int) -> str:
    pad = " " * ind
    inner = " " * (ind + 2)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return fmt_const(t.value)
    if isinstance(t, Resample):
        return "resample"
    if isinstance(t, RecordLit):
        if not t.fields:
            return "()"
        return "{" + ", ".join(f"{l} = {_pp(v, ind + 2)}" for l, v in t.fields) + "}"
    if isinstance(t, SeqLit):
        return "[" + ", ".join(_pp(v, ind + 2) for v in t.items) + "]"
    if isinstance(t, App):
        return " ".join(_atom(x, ind) for x in (t.fn,) + tuple(t.args))
    if isinstance(t, Dist):
        return " ".join([t.name] + [_atom(a, ind) for a in t.args])
    if isinstance(t, Con):
        if isinstance(t.arg, RecordLit) and not t.arg.fields:
            return t.name
        return f"{t.name} {_atom(t.arg, ind)}"
    if isinstance(t, Assume):
        return f"assume {_atom(t.dist, ind)}"
    if isinstance(t, Weight):
        return f"weight {_atom(t.arg, ind)}"
    if isinstance(t, Observe):
        return f"observe {_atom(t.value, ind)} {_atom(t.dist, ind)}"
    if isinstance(t, Lam):
        return f"lam {t.param}{_ann(t.ty)}.\n{inner}{_pp(t.body, ind + 2)}"
    if isinstance(t, Let):
        if isinstance(t.rhs, (If, Match, Let, Seq)):
            rhs = f"\n{inner}{_pp(t.rhs, ind + 2)}\n{pad}"
        else:
            rhs = f" {_pp(t.rhs, ind + 2)} "
        return f"let {t.name}{_ann(t.ty)} ={rhs}in\n{pad}{_pp(t.body, ind)}"
    if isinstance(t, RecLet):
        parts = ["recursive"]
        for b in t.bindings:
            parts.append(f"{inner}let {b.name}{_ann(b.ty)} = {_pp(b.rhs, ind + 4)}")
        parts.append(f"{pad}in")
        parts.append(f"{pad}{_pp(t.body, ind)}")
        return "\n".join(parts)
    if isinstance(t, (If, Match)):
        if isinstance(t, If):
            head = f"if {_pp(t.cond, ind + 2)} then"
        else:
            head = f"match {_pp(t.target, ind + 2)} with {fmt_pattern(t.pat)} then"
        return (f"{head}\n{inner}{_pp(t.thn, ind + 2)}\n{pad}else\n"
                f"{inner}{_pp(t.els, ind + 2)}")
    if isinstance(t, Seq):
        first = _pp(t.first, ind)
        if isinstance(t.first, _CTL):
            first = f"({first})"
        return f"{first};\n{pad}{_pp(t.second, ind)}"
    if isinstance(t, TypeDecl):
        return f"type {t.name} in\n{pad}{_pp(t.body, ind)}"
    if isinstance(t, ConDecl):
        ty = TFun((t.payload,), TVariant(t.variant))
        return f"con {t.name} : {ty} in\n{pad}{_pp(t.body, ind)}"
    raise TypeError(f"unknown term {t!r}")


def pretty(t) -> str:
    """Render a term as source text in the canonical layout."""
    return _pp(t, 0)
