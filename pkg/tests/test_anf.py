from hypothesis import given, settings
from hypothesis import strategies as st

from pcfgppl.anf import normalize, normalize_program, validate_anf
from pcfgppl.frontend.parser import parse
from pcfgppl.frontend.pretty import pretty
from pcfgppl.frontend.syntax import Let
from pcfgppl.frontend.typecheck import check_program
from pcfgppl.oracles import interpret_direct
from pcfgppl.rng import TapeRng

from conftest import compiled
from gen import program


def _body(src):
    return parse(src).body  # skip the function binding of the prelude


def test_nested_call_is_let_bound():
    t = parse("let geometric = lam p. 1 in let p = 0.5 in addi 1 (geometric p)")
    out = normalize(t.body)
    assert pretty(out) == "let p = 0.5 in\nlet _t0 = geometric p in\naddi 1 _t0"


def test_trivial_unchanged():
    t = parse("let x = 1 in x")
    assert normalize(t) == t


def test_fig5_condition_lifted():
    f = compiled("fig5").anf.funcs["f"]
    text = pretty(f.body)
    assert "let _t0 = geqf s1 1.0 in" in text
    assert validate_anf(f.body)


def test_validate_rejects_nested_application():
    assert not validate_anf(_body("let f = lam y. y in let x = addi 1 (f 2) in x"))


def test_validate_accepts_normalized_geometric():
    for f in compiled("geometric").anf.all_functions():
        assert validate_anf(f.body)


def test_temporaries_avoid_source_names():
    t = parse("let g = lam a. a in let _t0 = 1 in addi (g _t0) (g 2)")
    out = normalize(t)
    names = []
    body = out.body
    while isinstance(body, Let):
        names.append(body.name)
        body = body.body
    assert names.count("_t0") == 1


@settings(max_examples=1000, deadline=None)
@given(program())
def test_normalize_always_valid(src):
    p = normalize_program(check_program(parse(src)))
    assert all(validate_anf(f.body) for f in p.all_functions())


@settings(max_examples=200, deadline=None)
@given(program())
def test_normalize_idempotent(src):
    once = normalize(parse(src))
    assert normalize(once) == once


@settings(max_examples=300, deadline=None)
@given(program(), st.integers(0, 2**32))
def test_normalize_preserves_semantics(src, seed):
    checked = check_program(parse(src))
    anf = normalize_program(checked)
    r1, r2 = TapeRng(seed=seed), TapeRng(seed=seed)
    assert interpret_direct(checked, r1) == interpret_direct(anf, r2)
    assert r1.log == r2.log
