import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from pcfgppl.analysis import (
    CallGraph, build_call_graph, dump_analysis, parse_analysis, resample_set, validate_analysis,
)
from pcfgppl.frontend.parser import parse
from pcfgppl.frontend.typecheck import check_program

from conftest import compiled


def _graph(src):
    return build_call_graph(check_program(parse(src)))


def test_fig5_graph():
    c = compiled("fig5")
    assert c.graph.callees("f") == {"f"}
    assert c.graph.direct_resample["f"]
    assert c.resample_set == {"f"}


def test_no_calls_no_resample():
    g = _graph("let a = lam x. addi x 1 in let b = lam y. subi y 1 in 0")
    assert all(not g.callees(n) for n in g.nodes)
    assert not any(g.direct_resample.values())
    assert resample_set(g) == set()


def test_builtins_are_not_nodes():
    g = _graph("let f = lam x. geqf x 1. in let g = lam y. f y in g 2.")
    assert g.callees("g") == {"f"}
    assert g.callees("f") == set()


def test_mutual_recursion():
    src = """recursive
  let f = lam n. resample; if eqi n 0 then 0 else g (subi n 1)
  let g = lam n. if eqi n 0 then 1 else f (subi n 1)
in f 3"""
    assert resample_set(_graph(src)) == {"f", "g"}


def test_resample_free_function_not_in_set():
    rs = compiled("crbd_toy").resample_set
    assert rs == {"simTree"}


def _brute(g):
    """Members: functions from which a directly-resampling function is reachable."""
    out = set()
    for n in g.nodes:
        seen, work = {n}, [n]
        while work:
            for c in g.callees(work.pop()):
                if c not in seen:
                    seen.add(c)
                    work.append(c)
        if any(g.direct_resample[m] for m in seen):
            out.add(n)
    return out


@st.composite
def graphs(draw):
    names = [f"f{i}" for i in range(draw(st.integers(1, 6)))]
    edges = {n: set(draw(st.lists(st.sampled_from(names), max_size=3))) for n in names}
    flags = {n: draw(st.booleans()) for n in names}
    return CallGraph(tuple(names), edges, flags)


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_resample_set_matches_reachability(g):
    assert resample_set(g) == _brute(g)


@settings(max_examples=200, deadline=None)
@given(graphs(), st.data())
def test_monotone_in_flags(g, data):
    n = data.draw(st.sampled_from(g.nodes))
    more = CallGraph(g.nodes, g.edges, {**g.direct_resample, n: True})
    assert resample_set(g) <= resample_set(more)


def test_dump_round_trip(corpus_name):
    c = compiled(corpus_name)
    g, rs = parse_analysis(c.emit("analysis"))
    assert validate_analysis(g, rs)
    assert rs == c.resample_set
    assert {n: g.callees(n) for n in g.nodes} == {n: c.graph.callees(n) for n in c.graph.nodes}


def test_validate_rejects_wrong_set():
    g = CallGraph(("a", "b"), {"a": {"b"}, "b": set()}, {"a": False, "b": True})
    assert validate_analysis(g, {"a", "b"})
    assert not validate_analysis(g, {"b"})
    for subset in itertools.combinations(("a", "b"), 1):
        assert not validate_analysis(g, set(subset))
