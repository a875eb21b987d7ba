"""One test per acceptance criterion. Seeds are fixed in advance."""

import itertools
import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings

from pcfgppl import corpus_path
from pcfgppl.cli import main
from pcfgppl.errors import TapeExhausted
from pcfgppl.oracles import SsmParams, interpret_direct, kalman_filter, weighted_geometric_pmf
from pcfgppl.pcfgvm import initial_state, result_value, run_single
from pcfgppl.rng import TapeRng
from pcfgppl.smc import SmcConfig, ess, run_smc, systematic_resample
from pcfgppl.stmtir import RETURN, check_tail_position, decompose, transitions

from conftest import CORPUS, compiled, compiled_src
from test_stmtir import plain_lists, stmt_lists

RUNS = 50


def _pmf_by_value(result, values):
    out = {}
    for v, w in zip(values, result.weights):
        out[v] = out.get(v, 0.0) + float(w)
    return out


def test_1_weighted_geometric_posterior():
    prog = compiled("geometric").pcfg
    t = time.perf_counter()
    r = run_smc(prog, SmcConfig(particles=100_000, seed=101, threads=1))
    elapsed = time.perf_counter() - t
    pmf = _pmf_by_value(r, r.values(prog))
    for n in range(1, 9):
        assert abs(pmf.get(n, 0.0) - weighted_geometric_pmf(n)) <= 0.01, n
    assert abs(r.log_z - math.log(2)) <= 0.02
    assert elapsed < 10.0


def test_2_standard_geometric_control():
    src = corpus_path("geometric").read_text()
    assert "weight (log 1.5);" in src
    prog = compiled_src(src.replace("weight (log 1.5);", "")).pcfg
    r = run_smc(prog, SmcConfig(particles=100_000, seed=202, threads=1))
    pmf = _pmf_by_value(r, r.values(prog))
    for n in range(1, 9):
        assert abs(pmf.get(n, 0.0) - 0.5 ** n) <= 0.01, n
    assert abs(r.log_z) <= 0.02


def test_3_ssm_matches_kalman():
    c = compiled("ssm")
    data = c.checked.consts["data"][1]
    want_z, want_mean, _ = kalman_filter(SsmParams(), data)
    zs, means = [], []
    for k in range(RUNS):
        t = time.perf_counter()
        r = run_smc(c.pcfg, SmcConfig(particles=50_000, seed=3000 + k, threads=1))
        assert time.perf_counter() - t < 30.0
        zs.append(r.log_z)
        means.append(float(np.dot(r.values(c.pcfg), r.weights)))
    for xs, want in ((zs, want_z), (means, want_mean)):
        se = np.std(xs, ddof=1) / math.sqrt(RUNS)
        assert abs(np.mean(xs) - want) <= 3 * se, (np.mean(xs), want, se)


def test_4_fig5_decomposition():
    blocks = compiled("fig5").blocks["f"]
    assert len(blocks) == 4
    # indices here start at 0; the listing numbers blocks from 1
    assert [transitions(blocks[k]) for k in range(4)] == [
        [("checkpoint", 1)],
        [("jump", 2), ("call", 2), ("jump", 3)],
        [("jump", 3)],
        [("jump", RETURN)],
    ]


@settings(max_examples=1000, deadline=None, derandomize=True)
@given(stmt_lists())
def test_5a_tail_position(ss):
    assert check_tail_position(decompose(ss))


@settings(max_examples=1000, deadline=None, derandomize=True)
@given(plain_lists())
def test_5b_no_checkpoint_one_block(ss):
    assert len(decompose(ss)) == 1


# fig5 never terminates; its draw limit stops it well before the stack fills
DRAW_LIMIT = {"geometric": 2000, "fig5": 100, "ssm": 2000, "crbd_toy": 2000}


@pytest.mark.parametrize("name", CORPUS)
def test_6_semantic_preservation(name):
    c = compiled(name)
    limit = DRAW_LIMIT[name]
    finished = 0
    for k in range(1000):
        r1, r2 = TapeRng(seed=k, limit=limit), TapeRng(seed=k, limit=limit)
        try:
            want = interpret_direct(c.anf, r1)
        except TapeExhausted:
            with pytest.raises(TapeExhausted):
                run_single(c.pcfg, initial_state(c.pcfg, r2))
            assert r1.log == r2.log
            continue
        s = run_single(c.pcfg, initial_state(c.pcfg, r2))
        assert (result_value(c.pcfg, s), s.logw) == want
        assert r1.log == r2.log
        # only the result area is left once main's frame is gone
        assert s.sp == c.pcfg.result_width
        finished += 1
    assert finished > 0 or name == "fig5"


def _report(name, threads, particles):
    import io
    from contextlib import redirect_stdout
    buf = io.StringIO()
    with redirect_stdout(buf):
        rc = main(["run", str(corpus_path(name)), "--particles", str(particles), "--seed", "7",
                   "--threads", str(threads), "--no-timings"])
    assert rc == 0
    return buf.getvalue()


@pytest.mark.parametrize("name", ["geometric", "ssm", "crbd_toy"])
def test_7a_reports_independent_of_threads(name):
    reports = [_report(name, t, 2000) for t in (1, 2, 8)]
    assert reports[0] == reports[1] == reports[2]
    assert json.loads(reports[0])["schema"] == 1


def test_7b_parallel_speedup():
    prog = compiled("crbd_toy").pcfg
    times = {}
    for threads in (1, 4):
        r = run_smc(prog, SmcConfig(particles=100_000, seed=77, threads=threads))
        times[threads] = r.timings["propagate"]
    assert times[1] / times[4] >= 1.7, times


def _brute_force(weights, u):
    """Ancestor of position j: the k with cum[k-1] <= (j + u)/N < cum[k], by a
    linear scan in double precision."""
    n = len(weights)
    total = 0.0
    for w in weights:
        total += w
    cum, acc = [], 0.0
    for w in weights:
        acc += w
        cum.append(acc / total)
    last = max(k for k in range(n) if weights[k] > 0)
    out = []
    for j in range(n):
        pos = (j + u) / n
        lo = 0.0
        for k in range(n):
            hi = 1.0 if k >= last else cum[k]
            if lo <= pos < hi:
                out.append(k)
                break
            lo = hi
    return out


def test_8a_systematic_resampling_grid():
    us = [k / 10 for k in range(1, 10)]
    checked = 0
    for n in range(1, 6):
        for ks in itertools.product(range(9), repeat=n):
            if not any(ks):
                continue
            w = [k / 8 for k in ks]
            for u in us:
                assert systematic_resample(w, u).tolist() == _brute_force(w, u), (w, u)
                checked += 1
    assert checked == 9 * sum(9 ** n - 1 for n in range(1, 6))


def test_8b_ess_formula():
    rng = np.random.default_rng(8)
    for n in range(1, 6):
        for ks in itertools.product(range(9), repeat=min(n, 3)):
            if not any(ks):
                continue
            w = np.array([k / 8 for k in ks], dtype=float)
            with np.errstate(divide="ignore"):
                got = ess(np.log(w))
            assert abs(got - w.sum() ** 2 / (w * w).sum()) <= 1e-12
        for _ in range(200):
            lw = rng.normal(0.0, 3.0, n)
            w = np.exp(lw)
            assert abs(ess(lw) - w.sum() ** 2 / (w * w).sum()) <= 1e-12


def test_9_log_z_std_slope():
    prog = compiled("geometric").pcfg
    sizes = [1_000, 10_000, 100_000]
    stds = []
    for n in sizes:
        zs = [run_smc(prog, SmcConfig(particles=n, seed=9000 + k, threads=1)).log_z
              for k in range(RUNS)]
        stds.append(np.std(zs, ddof=1))
    slope = np.polyfit(np.log(sizes), np.log(stds), 1)[0]
    assert abs(slope + 0.5) <= 0.15, slope
