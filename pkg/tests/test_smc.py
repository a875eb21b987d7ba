import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcfgppl.errors import AllParticlesRejected, InferenceError
from pcfgppl.oracles import kalman_filter, SsmParams
from pcfgppl.pcfgvm import STOP, initial_state
from pcfgppl.rng import Rng
from pcfgppl.smc import (
    SmcConfig, ess, normalize, propagate, propagate_parallel, run_smc, systematic_resample,
)

from conftest import CORPUS, compiled, compiled_src

CONSTANT = "weight (log 3.0); resample; 0"

EARLY_STOP = """let x = assume (Bernoulli 0.5) in
resample;
if x then 1 else
  weight (log 3.);
  resample;
  2"""

REJECT_HALF = """let x = assume (Bernoulli 0.5) in
(if x then weight (log 0.) else ());
resample;
x"""


def _run(src_or_name, **kw):
    c = compiled(src_or_name) if src_or_name in CORPUS else compiled_src(src_or_name)
    prog = c.pcfg
    return prog, run_smc(prog, SmcConfig(**kw))


# ------------------------------------------------------------------ resampling


def test_uniform_weights():
    assert systematic_resample([0.25] * 4, 0.5).tolist() == [0, 1, 2, 3]


def test_degenerate_weights():
    assert systematic_resample([1.0, 0.0, 0.0, 0.0], 0.3).tolist() == [0, 0, 0, 0]


def test_two_particles_by_hand():
    assert systematic_resample([0.5, 0.5], 0.25).tolist() == [0, 1]


def test_trailing_zero_weight_never_selected():
    # rounding in the cumulative sum must not leak into a zero-weight tail
    w = np.array([0.1] * 10 + [0.0])
    for u in (0.999999, 0.5):
        assert 10 not in systematic_resample(w, u)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30).filter(lambda w: sum(w) > 0),
       st.floats(0.001, 0.999))
def test_offspring_counts(w, u):
    w = np.array(w) / sum(w)
    anc = systematic_resample(w, u)
    n = len(w)
    assert len(anc) == n and np.all(np.diff(anc) >= 0)
    counts = np.bincount(anc, minlength=n)
    assert np.all(np.abs(counts - n * w) < 1 + 1e-9)
    assert np.all(w[anc] > 0)


# ------------------------------------------------------------------ ESS


def test_ess_uniform():
    assert ess(np.zeros(7)) == pytest.approx(7.0, abs=1e-12)


def test_ess_single_finite():
    assert ess([-math.inf, 2.0, -math.inf]) == pytest.approx(1.0, abs=1e-12)


def test_ess_two_weights():
    assert ess(np.log([0.75, 0.25])) == pytest.approx(1.6, abs=1e-12)


def test_ess_all_rejected():
    with pytest.raises(AllParticlesRejected):
        ess([-math.inf, -math.inf])


def test_normalize_sums_to_one():
    w, lse = normalize(np.array([-1000.0, -1001.0, -math.inf]))
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert lse == pytest.approx(-1000.0 + math.log1p(math.exp(-1.0)))


# ------------------------------------------------------------------ engine


@pytest.mark.parametrize("n", [1, 7, 1000])
@pytest.mark.parametrize("tau", [0.0, 0.5, 1.0])
def test_constant_weight_log_z_exact(n, tau):
    _, r = _run(CONSTANT, particles=n, seed=n, ess_threshold=tau)
    assert r.log_z == pytest.approx(math.log(3.0), abs=1e-12)


def test_config_validation():
    for bad in ({"particles": 0}, {"ess_threshold": 1.5}, {"threads": 0}):
        with pytest.raises(ValueError):
            SmcConfig(**bad)


def test_result_invariants():
    prog, r = _run("geometric", particles=2000, seed=3)
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert math.isfinite(r.log_z)
    assert all(s.next == STOP for s in r.states)


def test_early_termination():
    prog, r = _run(EARLY_STOP, particles=20_000, seed=5)
    # Z = 0.5 * 1 + 0.5 * 3; posterior P(result = 1) = 0.25
    assert r.log_z == pytest.approx(math.log(2.0), abs=0.03)
    vals = np.array(r.values(prog))
    assert np.dot(vals == 1, r.weights) == pytest.approx(0.25, abs=0.015)
    assert r.resample_count == 2


def test_rejected_particles_never_resampled():
    prog, r = _run(REJECT_HALF, particles=5000, seed=1)
    assert not any(r.values(prog))
    assert r.log_z == pytest.approx(math.log(0.5), abs=0.05)


def test_all_rejected():
    with pytest.raises(AllParticlesRejected):
        _run("weight (log 0.); resample; 1", particles=10)


def test_stack_overflow_reports_particle():
    from test_frames import COUNTDOWN
    with pytest.raises(InferenceError, match="particle 0") as e:
        _run(COUNTDOWN, particles=3, stack_cells=8)
    assert e.value.particle == 0


def test_ess_gate_skips_resampling():
    prog, r = _run("ssm", particles=2000, seed=2, ess_threshold=0.0)
    assert r.resample_count == 0
    assert len(r.ess_trace) == 10


def test_adaptive_resampling_close_to_kalman():
    data = compiled("ssm").checked.consts["data"][1]
    kz = kalman_filter(SsmParams(), data)[0]
    prog, r = _run("ssm", particles=20_000, seed=4, ess_threshold=0.5)
    assert 0 < r.resample_count < 10
    assert r.log_z == pytest.approx(kz, abs=0.15)


def test_resampling_copies_only_live_cells():
    prog, r = _run("ssm", particles=500, seed=0)
    assert r.copy_stats.copies > 0
    # every copied particle is paused inside one frame of `step`
    per_copy = r.copy_stats.cells / r.copy_stats.copies
    assert per_copy == prog.result_width + prog.layouts["step"].size


def test_same_seed_same_result():
    p1, a = _run("crbd_toy", particles=300, seed=9)
    p2, b = _run("crbd_toy", particles=300, seed=9)
    assert a.log_z == b.log_z and a.values(p1) == b.values(p2)
    _, c = _run("crbd_toy", particles=300, seed=10)
    assert c.log_z != a.log_z


@pytest.mark.parametrize("name", ["geometric", "crbd_toy"])
def test_parallel_matches_sequential(name):
    prog, a = _run(name, particles=400, seed=1, threads=1)
    _, b = _run(name, particles=400, seed=1, threads=2)
    assert a.log_z == b.log_z
    assert np.array_equal(a.weights, b.weights)
    assert a.values(prog) == b.values(prog)
    assert [s.stack for s in a.states] == [s.stack for s in b.states]


def test_propagate_all_at_checkpoint_is_noop():
    prog = compiled("ssm").pcfg
    states = [initial_state(prog, Rng(k)) for k in range(4)]
    flags = [True] * 4
    before = [list(s.stack) for s in states]
    propagate(prog, states, flags)
    propagate_parallel(prog, states, flags, 2)
    assert [s.stack for s in states] == before


def test_propagate_parallel_sets_flags():
    prog = compiled("ssm").pcfg
    states = [initial_state(prog, Rng(k)) for k in range(40)]
    ref = [initial_state(prog, Rng(k)) for k in range(40)]
    flags, ref_flags = [False] * 40, [False] * 40
    propagate_parallel(prog, states, flags, 3)
    propagate(prog, ref, ref_flags)
    assert all(flags) and all(ref_flags)
    assert [s.stack for s in states] == [s.stack for s in ref]
    assert [s.next for s in states] == [s.next for s in ref]
