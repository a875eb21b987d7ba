"""Which functions can reach a ``resample``.

Only those functions are split into blocks; everything else compiles to
ordinary straight-line code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .frontend.syntax import (
    App, ConDecl, Lam, Let, Match, RecLet, Resample, TypeDecl, Var, children,
)


@dataclass
class CallGraph:
    nodes: tuple
    edges: dict = field(default_factory=dict)  # caller -> set of callees
    direct_resample: dict = field(default_factory=dict)

    def callees(self, name):
        return self.edges.get(name, set())


def _scan(body, funcs):
    """(set of called user functions, whether ``resample`` occurs) for ``body``."""
    calls, resample = set(), False
    stack = [body]
    while stack:
        t = stack.pop()
        if isinstance(t, Resample):
            resample = True
        elif isinstance(t, App):
            fn = t.fn
            while isinstance(fn, App):
                stack.extend(fn.args)
                fn = fn.fn
            if isinstance(fn, Var) and fn.name in funcs:
                calls.add(fn.name)
            stack.extend(t.args)
        elif isinstance(t, Let):
            stack += [t.rhs, t.body]
        elif isinstance(t, Match):
            stack += [t.target, t.thn, t.els]
        elif isinstance(t, Lam):
            stack.append(t.body)
        elif isinstance(t, RecLet):
            stack += [b.rhs for b in t.bindings] + [t.body]
        else:
            stack.extend(children(t))
    return calls, resample


def _term_functions(t) -> dict:
    """Top-level functions of a program term, as ``name -> body``."""
    out = {}
    while True:
        if isinstance(t, (TypeDecl, ConDecl)):
            t = t.body
        elif isinstance(t, RecLet):
            for b in t.bindings:
                out[b.name] = _lam_body(b.rhs)
            t = t.body
        elif isinstance(t, Let):
            if isinstance(t.rhs, Lam):
                out[t.name] = _lam_body(t.rhs)
            t = t.body
        else:
            return out


def _lam_body(t):
    while isinstance(t, Lam):
        t = t.body
    return t


def build_call_graph(program) -> CallGraph:
    """Call graph over the declared functions; builtins are not nodes.

    Accepts a checked :class:`~pcfgppl.frontend.typecheck.Program` or a
    program term whose functions are bound at top level.
    """
    if hasattr(program, "funcs"):
        bodies = {name: f.body for name, f in program.funcs.items()}
    else:
        bodies = _term_functions(program)
    g = CallGraph(tuple(bodies))
    for name, body in bodies.items():
        calls, res = _scan(body, bodies)
        g.edges[name] = calls
        g.direct_resample[name] = res
    return g


def resample_set(g: CallGraph) -> set:
    """Least set containing every function with a direct ``resample`` and
    closed under "calls a member"."""
    callers: dict = {n: set() for n in g.nodes}
    for src, dsts in g.edges.items():
        for d in dsts:
            callers[d].add(src)
    result = {n for n in g.nodes if g.direct_resample.get(n)}
    work = list(result)
    while work:
        n = work.pop()
        for c in callers[n]:
            if c not in result:
                result.add(c)
                work.append(c)
    return result


def calls_and_resample(body, funcs):
    """Direct calls and resample flag of an arbitrary body (used for main)."""
    return _scan(body, funcs)


def dump_analysis(g: CallGraph, rs: set) -> str:
    """The call graph, one function per line, then the resample set one name
    per line."""
    lines = []
    for n in g.nodes:
        calls = ", ".join(sorted(g.callees(n))) or "-"
        flag = "  resample" if g.direct_resample.get(n) else ""
        lines.append(f"{n}: calls {calls}{flag}")
    lines.append("resample set:")
    lines += [f"  {n}" for n in sorted(rs)]
    return "\n".join(lines)


def parse_analysis(text: str) -> tuple[CallGraph, set]:
    """Inverse of :func:`dump_analysis`."""
    nodes, edges, direct, rs = [], {}, {}, set()
    in_set = False
    for line in text.strip().splitlines():
        if line == "resample set:":
            in_set = True
            continue
        if in_set:
            rs.add(line.strip())
            continue
        name, rest = line.split(": calls ", 1)
        flag = rest.endswith("  resample")
        rest = rest[: -len("  resample")] if flag else rest
        nodes.append(name)
        edges[name] = set() if rest.strip() == "-" else {x.strip() for x in rest.split(",")}
        direct[name] = flag
    return CallGraph(tuple(nodes), edges, direct), rs


def validate_analysis(g: CallGraph, rs: set) -> bool:
    """The stated resample set is the least closed set for the graph."""
    return all(c in g.nodes for cs in g.edges.values() for c in cs) and resample_set(g) == rs
