import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcfgppl.frames import (
    FrameLayout, cell_size, compute_layout, cross_block_locals, flatten, lower_call,
    lower_return, parse_layouts, unflatten, validate_layout,
)
from pcfgppl.frontend.syntax import FLOAT, INT, App, Const, Builtin, Var
from pcfgppl.pcfgvm import (
    STOP, FrameAddr, JumpDirect, Lit, LoadFrame, PopFrame, PushFrame, Reserve, StoreCallee,
    WriteRel, copy_state, initial_state, result_value, run_single, sim, walk_frames,
)
from pcfgppl.rng import Rng, TapeRng
from pcfgppl.stmtir import RETURN, Bind, Jump, TCheckpoint, TOther

from conftest import compiled, compiled_src

COUNTDOWN = """recursive let f = lam n.
  resample;
  if eqi n 0 then 0 else addi 1 (f (subi n 1))
in f 3"""

DISCARD = """recursive let f = lam n.
  resample;
  if eqi n 0 then 0 else
    f (subi n 1);
    1
in f 3"""


def _add(a, b):
    return App(Const(Builtin("addi")), (Var(a), Var(b)))


def test_fig5_cross_block_locals():
    live = cross_block_locals(compiled("fig5").blocks["f"])
    assert live >= {"s1", "s3", "s4"}
    assert "s2" not in live and "_t0" not in live


def test_single_block_has_no_cross_block_locals():
    assert cross_block_locals(compiled("geometric").blocks.get("<main>", {0: ()})) == set()


def test_def_in_one_block_use_in_another():
    blocks = {
        0: (TOther(Bind("a", Const(1))), TCheckpoint(1)),
        1: (TOther(Bind("b", Const(2))), Jump(2)),
        2: (TOther(Bind("c", _add("a", "b"))), Jump(RETURN)),
    }
    assert cross_block_locals(blocks) == {"a", "b"}


def test_fig5_layout():
    lay = compiled("fig5").layouts["f"]
    assert lay.slots() == {"ra": 0, "retValLoc": 1, "p": 2, "s1": 3, "s3": 4, "s4": 5}
    assert lay.size == 6


def test_minimum_frame():
    lay = compute_layout("g", (), (), {0: (TOther(Bind("x", Const(1))), Jump(RETURN))}, {}, {})
    assert lay.size == 2


def test_three_params_two_locals():
    blocks = {
        0: (TOther(Bind("a", _add("p", "q"))), TOther(Bind("b", _add("a", "r"))),
            TCheckpoint(1)),
        1: (TOther(Bind("c", _add("a", "b"))), Jump(RETURN)),
    }
    types = {"a": INT, "b": INT, "c": INT}
    lay = compute_layout("g", ("p", "q", "r"), (INT, INT, INT), blocks, types, {})
    assert lay.size == 7
    assert validate_layout(lay.slots(), lay.size)


def test_lower_call_writes_whole_frame_then_jumps():
    lay = compiled("fig5").layouts["f"]
    code = lower_call(lay, 1, 3, "%a", {"p": (Lit(7.0), FLOAT)})
    assert code[0] == Reserve(6)
    assert code[1] == StoreCallee(0, Lit(3), INT)
    assert code[2] == StoreCallee(1, "%a", INT)
    assert code[3] == StoreCallee(2, Lit(7.0), FLOAT, 1)
    assert code[-2:] == [PushFrame(6), JumpDirect(1)]


def test_fig5_call_site_in_pcfg():
    text = compiled("fig5").emit("pcfg")
    assert "callsf[0] = 3\n      callsf[1] = %a1\n      callsf[2] = 7.0" in text
    assert "%a1 = &sf[5]" in text  # address of s4's slot


def test_lower_return_sequence():
    lay = compiled("fig5").layouts["f"]
    code = lower_return(lay, "t", FLOAT, 1)
    assert code == [LoadFrame("%rvl", 1, INT), WriteRel("%rvl", "t", FLOAT, 1),
                    LoadFrame("%ra", 0, INT), PopFrame(6), JumpDirect("%ra")]


def test_discarded_result_uses_scratch_slot():
    c = compiled_src(DISCARD)
    lay = c.layouts["f"]
    assert lay.scratch_width == 1
    assert f"&sf[{lay.scratch}]" in c.emit("pcfg")
    s = run_single(c.pcfg, initial_state(c.pcfg, Rng(1)))
    assert result_value(c.pcfg, s) == 1


def test_nested_depth_three_stack_pointer():
    prog = compiled("fig5").pcfg
    s = initial_state(prog, Rng(5))
    # main tail-calls f, so f's frames start right above the result area
    base = prog.result_width
    b = s.next
    for _ in range(3):
        b, s, flag = sim(prog, b, s)
        assert flag
    assert s.sp - base == 18
    assert walk_frames(prog, s) == [13, 7, 1]


def test_returns_restore_stack_pointer():
    prog = compiled_src(COUNTDOWN).pcfg
    s = initial_state(prog, Rng(0))
    entry_sp = s.sp
    lay = prog.layouts["f"]
    b, depth_sps = s.next, []
    while b != STOP:
        b, s, _ = sim(prog, b, s)
        depth_sps.append(s.sp)
    # f 3 .. f 0 are live at once, above the result area (main tail-called f)
    assert max(depth_sps) == prog.result_width + 4 * lay.size
    assert result_value(prog, s) == 3
    # every frame is popped, main's included: only the result area remains
    assert entry_sp == prog.result_width + prog.layouts["<main>"].size
    assert s.sp == prog.result_width


def test_addresses_relative_across_copies():
    prog = compiled("crbd_toy").pcfg
    s = initial_state(prog, TapeRng(seed=3, limit=10_000))
    b = s.next
    while b != STOP:
        b, s, _ = sim(prog, b, s)
        walk_frames(prog, s)
        c = copy_state(s, s.rng.copy())
        # the copy is a different list object; its frame chain must still resolve
        assert c.stack is not s.stack
        walk_frames(prog, c)


def test_layout_dump_round_trip(corpus_name):
    text = compiled(corpus_name).emit("frames")
    parsed = parse_layouts(text)
    for name, lay in compiled(corpus_name).layouts.items():
        slots, size = parsed[name]
        assert slots == lay.slots() and size == lay.size
        assert validate_layout(slots, size)


def test_validate_layout_rejects_overlap():
    assert not validate_layout({"ra": 0, "retValLoc": 1, "x": 1}, 3)
    assert not validate_layout({"ra": 0, "retValLoc": 1, "x": 3}, 3)


def test_layout_str():
    lay = FrameLayout("g", 0, 1, (("p", 2, 1),), (), 3, 0, 3)
    assert str(lay) == "g: {ra: 0, retValLoc: 1, p: 2}  -- frameSize 3"


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False), st.integers(-5, 5), st.booleans())
def test_flatten_round_trip(x, n, flag):
    c = compiled_src("type T in con A : {u: Float, v: Int} -> T in con B : Bool -> T in "
                     "let a = assume (Bernoulli 0.5) in if a then A {u = 1., v = 2} else B true")
    ty = c.pcfg.result_type
    for v in (("A", (x, n)), ("B", flag)):
        cells = flatten(ty, v, c.pcfg.variants)
        assert len(cells) == cell_size(ty, c.pcfg.variants) == 3
        assert unflatten(ty, cells, c.pcfg.variants) == v


def test_frame_addr_instruction():
    assert str(FrameAddr("%a", 5)) == "%a = &sf[5]"
    with pytest.raises(KeyError):
        FrameLayout("g", 0, 1, (), (), 2, 0, 2).slot("nope")
