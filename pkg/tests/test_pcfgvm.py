import dataclasses
import math
import pickle

import pytest

from pcfgppl import corpus_path
from pcfgppl.errors import CompileError, InvalidBlock, NaNWeight, StackOverflow
from pcfgppl.pcfgvm import (
    STOP, BlockInfo, CopyStats, HaltCheckpoint, Lit, Move, SetNext, copy_state, initial_state,
    mangle, parse_dump, result_value, run_single, sim, validate_dump,
)
from pcfgppl.rng import Rng, TapeRng
from pcfgppl.codegen import compile_source

from conftest import compiled, compiled_src

GEOMETRIC_RESAMPLE = """recursive let geometric = lam p.
  let x = assume (Bernoulli p) in
  if x then
    weight (log 1.5);
    resample;
    addi 1 (geometric p)
  else 1
in
geometric 0.5"""


def _hand_built(blocks):
    """A program with the given instruction lists, all in main's frame."""
    base = compiled("geometric").pcfg
    info = [BlockInfo("<main>", k, base.main_frame_size) for k in range(len(blocks))]
    return dataclasses.replace(base, blocks=blocks, info=info, return_targets={},
                               _fns=None)


def test_trace_shape_yield_then_checkpoint():
    prog = _hand_built([(Move("x", Lit(1)), SetNext(1)), (SetNext(STOP), HaltCheckpoint())])
    s = initial_state(prog, Rng(0))
    assert sim(prog, 0, s)[::2] == (1, False)
    assert sim(prog, 1, s)[::2] == (STOP, True)


def test_sim_stop_is_identity():
    prog = compiled("fig5").pcfg
    s = initial_state(prog, Rng(3))
    before = (list(s.stack), s.sp, s.logw, s.rng.copy())
    b, s2, flag = sim(prog, STOP, s)
    assert (b, flag) == (STOP, True) and s2 is s
    assert (s.stack, s.sp, s.logw, s.rng) == before


def test_weight_only_changes_log_weight():
    a = compiled_src("let x = assume (Normal 0. 1.) in resample; x")
    b = compiled_src("let x = assume (Normal 0. 1.) in weight (log 1.5); resample; x")
    sa = run_single(a.pcfg, initial_state(a.pcfg, TapeRng([0.25])))
    sb = run_single(b.pcfg, initial_state(b.pcfg, TapeRng([0.25])))
    assert sa.stack == sb.stack and sa.sp == sb.sp
    assert sb.logw - sa.logw == pytest.approx(math.log(1.5), abs=1e-15)


@pytest.mark.parametrize("tape, value, logw", [
    ([False], 1, 0.0),
    ([True, False], 2, math.log(1.5)),
    ([True, True, False], 3, 2 * math.log(1.5)),
])
def test_geometric_forced(tape, value, logw):
    prog = compiled("geometric").pcfg
    s = run_single(prog, initial_state(prog, TapeRng(tape)))
    assert result_value(prog, s) == value
    assert s.logw == pytest.approx(logw, abs=1e-15)


def test_zero_noise_ssm_rejected_at_compile_time():
    src = corpus_path("ssm").read_text().replace("(sqrt 5.)", "0.")
    with pytest.raises(CompileError, match="stddev"):
        compile_source(src)


def test_copy_state_counts_cells():
    prog = compiled("fig5").pcfg
    s = initial_state(prog, Rng(1))
    stats = CopyStats()
    s.sp = 0
    c = copy_state(s, stats=stats)
    assert stats.cells == 0 and c.stack == []
    s = initial_state(prog, Rng(1))
    sim(prog, s.next, s)
    assert s.sp == 7 and s.cap == 4096  # result cell plus one frame of f
    stats = CopyStats()
    copy_state(s, stats=stats)
    assert (stats.copies, stats.cells) == (1, 7)


def test_copy_six_cells():
    prog = compiled("fig5").pcfg
    s = initial_state(prog, Rng(1))
    sim(prog, s.next, s)
    s.stack, s.sp = s.stack[1:], 6  # a lone 6-cell frame
    stats = CopyStats()
    c = copy_state(s, stats=stats)
    assert stats.cells == 6 and len(c.stack) == 6


def test_copy_does_not_alias():
    prog = compiled("fig5").pcfg
    s = initial_state(prog, Rng(1))
    sim(prog, s.next, s)
    snapshot = list(s.stack)
    c = copy_state(s)
    c.stack[3] = 99.0
    c.logw = -5.0
    c.rng.uniform()
    assert s.stack == snapshot and s.logw == 0.0 and s.rng.ctr != c.rng.ctr


def test_particles_in_different_blocks():
    prog = compiled_src(GEOMETRIC_RESAMPLE).pcfg
    a = initial_state(prog, TapeRng([True, False]))
    b = initial_state(prog, TapeRng([False]))
    na, _, fa = sim(prog, a.next, a)
    nb, _, fb = sim(prog, b.next, b)
    assert fa and fb
    assert na != nb and nb == STOP


@pytest.mark.parametrize("name", ["fig5", "ssm", "crbd_toy"])
def test_pause_resume_fidelity(name):
    prog = compiled(name).pcfg
    s = initial_state(prog, Rng(11))
    b, s, _ = sim(prog, s.next, s)
    assert b != STOP
    c = copy_state(s)
    for st in (s, c):
        for _ in range(3):
            if st.next != STOP:
                sim(prog, st.next, st)
    assert (c.stack[:c.sp], c.sp, c.logw, c.next) == (s.stack[:s.sp], s.sp, s.logw, s.next)


def test_checkpoint_flag_only_from_checkpoint():
    prog = compiled("crbd_toy").pcfg
    s = initial_state(prog, Rng(2))
    b = s.next
    while b != STOP:
        trace = []
        b, s, flag = sim(prog, b, s, trace)
        assert flag
        assert all(kind == 0 for _, kind in trace[:-1])
        assert trace[-1][1] == 1 or trace[-1][0] == STOP


def test_checkpoints_only_in_resample_set():
    c = compiled("crbd_toy")
    prog = c.pcfg
    for seed in range(20):
        s = initial_state(prog, Rng(seed))
        b = s.next
        while b != STOP:
            prev = b
            b, s, _ = sim(prog, b, s)
            assert prog.info[prev].function in c.resample_set | {"<main>"}
    assert "checkpoint" not in prog.direct_source and "(nxt, 1)" not in prog.direct_source


def test_nan_weight():
    prog = compiled_src("weight (subf (log 0.) (log 0.)); 1").pcfg
    with pytest.raises(NaNWeight):
        run_single(prog, initial_state(prog, Rng(0)))


def test_negative_infinite_weight_allowed():
    prog = compiled_src("weight (log 0.); 1").pcfg
    assert run_single(prog, initial_state(prog, Rng(0))).logw == -math.inf


def test_stack_overflow():
    from test_frames import COUNTDOWN
    prog = compiled_src(COUNTDOWN).pcfg
    with pytest.raises(StackOverflow):
        run_single(prog, initial_state(prog, Rng(0), capacity=10))


def test_invalid_block():
    prog = compiled("fig5").pcfg
    with pytest.raises(InvalidBlock):
        sim(prog, 99, initial_state(prog, Rng(0)))


def test_validate_detects_unreachable_stop():
    prog = _hand_built([(SetNext(0), HaltCheckpoint())])
    with pytest.raises(InvalidBlock, match="unreachable"):
        prog.validate()


def test_validate_detects_bad_target():
    prog = _hand_built([(SetNext(7), HaltCheckpoint())])
    with pytest.raises(InvalidBlock, match="out of range"):
        prog.validate()


def test_corpus_programs_validate(corpus_name):
    compiled(corpus_name).pcfg.validate()


def test_dump_round_trip(corpus_name):
    prog = compiled(corpus_name).pcfg
    blocks, direct = parse_dump(prog.dump())
    assert validate_dump(blocks)
    assert [(b.function, b.local_index, b.frame_size) for b in blocks] == [
        (i.function, i.local_index, i.frame_size) for i in prog.info]
    assert direct == prog.direct_functions


def test_validate_dump_rejects_missing_transfer():
    blocks, _ = parse_dump("block 0  (<main> #0, frame 2):\n  x = 1")
    assert not validate_dump(blocks)
    blocks, _ = parse_dump("block 0  (<main> #0, frame 2):\n  jump 4")
    assert not validate_dump(blocks)


def test_mangle_injective():
    names = ["a", "a_", "a__", "_a", "x'1", "x_27_1", "%ret", "<main>", "s1"]
    assert len({mangle(n) for n in names}) == len(names)
    assert all(mangle(n).isidentifier() for n in names)


def test_state_and_program_pickle():
    prog = compiled("crbd_toy").pcfg
    s = initial_state(prog, Rng(4))
    sim(prog, s.next, s)
    prog2, s2 = pickle.loads(pickle.dumps((prog, s)))
    r1 = run_single(prog, s)
    r2 = run_single(prog2, s2)
    assert result_value(prog, r1) == result_value(prog2, r2) and r1.logw == r2.logw
