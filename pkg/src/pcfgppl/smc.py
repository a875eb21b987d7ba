"""Sequential Monte Carlo over compiled PCFGs.

Each particle runs until its next checkpoint (or until it stops). The engine
then either stops (every particle finished) or resamples the population
systematically and continues. The log normalizing constant accumulates
``logsumexp(w) - log N`` at every resampling step and once more at the end.

Randomness: particle ``j`` after resampling step ``e`` uses a generator keyed
by ``(seed, e, j)``, and the resampling offsets come from their own stream.
Results therefore do not depend on how particles are spread over workers.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllParticlesRejected, InferenceError, VMError
from .pcfgvm import STOP, BlockProgram, CopyStats, copy_state, initial_state, result_value, sim
from .rng import Rng, derive_key, derive_keys

ENGINE_STREAM = 0xE5A


@dataclass
class SmcConfig:
    particles: int = 10_000
    seed: int = 0
    ess_threshold: float = 1.0
    threads: int = 1
    stack_cells: int = 4096

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if not 0.0 <= self.ess_threshold <= 1.0:
            raise ValueError("ESS threshold must lie in [0, 1]")
        if self.threads < 1:
            raise ValueError("need at least one thread")


@dataclass
class SmcResult:
    states: list
    weights: np.ndarray  # normalized final weights
    log_z: float
    resample_count: int
    ess_trace: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    copy_stats: CopyStats | None = None

    def values(self, program: BlockProgram) -> list:
        return [result_value(program, s) for s in self.states]


# ------------------------------------------------------------------ weights


def log_sum_exp(lw: np.ndarray) -> float:
    m = float(np.max(lw))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(lw - m))))


def normalize(lw: np.ndarray) -> tuple[np.ndarray, float]:
    """(normalized weights, log of the unnormalized sum)."""
    lse = log_sum_exp(lw)
    if lse == -math.inf:
        raise AllParticlesRejected("every particle has weight zero")
    if lse == math.inf:
        raise InferenceError("a particle has infinite weight")
    return np.exp(lw - lse), lse


def ess(log_weights) -> float:
    """(sum w)^2 / sum w^2, computed from log-weights."""
    lw = np.asarray(log_weights, dtype=float)
    m = float(np.max(lw)) if lw.size else -math.inf
    if m == -math.inf:
        raise AllParticlesRejected("ESS is undefined when every weight is zero")
    w = np.exp(lw - m)
    return float(np.sum(w) ** 2 / np.sum(w * w))


def systematic_resample(weights, u: float) -> np.ndarray:
    """Ancestor of position ``j`` is the ``k`` with
    ``cum[k-1] <= (j + u) / N < cum[k]``."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    cum = np.cumsum(w)
    cum /= cum[-1]
    last = int(np.flatnonzero(w > 0)[-1])
    cum[last:] = 1.0
    pos = (np.arange(n) + u) / n
    # (n - 1 + u) / n can round up to 1.0
    return np.minimum(np.searchsorted(cum, pos, side="right"), last)


# ------------------------------------------------------------------ propagation


def _advance(program, s, index):
    try:
        b = s.next
        while True:
            b, s, done = sim(program, b, s)
            if done:
                return s
    except VMError as e:
        raise InferenceError(f"particle {index}: {type(e).__name__}: {e}", index) from e


def propagate(program, states, flags) -> None:
    """Run every particle whose flag is unset to its next checkpoint."""
    for i, s in enumerate(states):
        if not flags[i]:
            states[i] = _advance(program, s, i)
            flags[i] = True


_WORKER_PROGRAM = None


def _worker_chunk(start, chunk):
    out = []
    for k, s in enumerate(chunk):
        out.append(_advance(_WORKER_PROGRAM, s, start + k))
    return out


def make_pool(program, threads: int):
    """A fork-based worker pool that inherits the compiled program."""
    global _WORKER_PROGRAM
    _WORKER_PROGRAM = program
    program.fns  # translate before forking so workers inherit the code
    return ProcessPoolExecutor(threads, mp_context=multiprocessing.get_context("fork"))


def propagate_parallel(program, states, flags, threads: int, pool=None):
    """Like :func:`propagate`, with particles split into contiguous chunks
    across ``threads`` worker processes. Results are identical to the
    sequential version."""
    pending = [i for i, f in enumerate(flags) if not f]
    if not pending:
        return states, flags
    if threads <= 1 or len(pending) < 2 * threads:
        propagate(program, states, flags)
        return states, flags
    own = pool is None
    pool = pool or make_pool(program, threads)
    try:
        size = -(-len(pending) // threads)
        jobs = []
        for c in range(0, len(pending), size):
            idx = pending[c:c + size]
            if idx == list(range(idx[0], idx[0] + len(idx))):
                chunk = states[idx[0]:idx[0] + len(idx)]
            else:
                chunk = [states[i] for i in idx]
            jobs.append((idx, pool.submit(_worker_chunk, idx[0], chunk)))
        for idx, fut in jobs:
            try:
                res = fut.result()
            except InferenceError:
                raise
            except Exception as e:  # a crashed worker
                raise InferenceError(f"worker for particles {idx[0]}..{idx[-1]} failed: {e}",
                                     idx[0]) from e
            for i, s in zip(idx, res):
                states[i] = s
                flags[i] = True
    finally:
        if own:
            pool.shutdown()
    return states, flags


# ------------------------------------------------------------------ engine


def run_smc(program: BlockProgram, cfg: SmcConfig) -> SmcResult:
    n = cfg.particles
    log_n = math.log(n)
    t0 = time.perf_counter()
    states = [initial_state(program, Rng(k), cfg.stack_cells)
              for k in derive_keys((cfg.seed, 0), n)]
    program.fns
    engine = Rng(derive_key(cfg.seed, ENGINE_STREAM))
    stats = CopyStats()
    log_z = 0.0
    resamples = 0
    ess_trace = []
    t_prop = t_res = 0.0
    pool = make_pool(program, cfg.threads) if cfg.threads > 1 else None
    try:
        while True:
            t = time.perf_counter()
            flags = [s.next == STOP for s in states]
            if pool is None:
                propagate(program, states, flags)
            else:
                propagate_parallel(program, states, flags, cfg.threads, pool)
            t_prop += time.perf_counter() - t

            t = time.perf_counter()
            # termination: look at particle 0 first, the rest only if it stopped
            if states[0].next == STOP and all(s.next == STOP for s in states):
                t_res += time.perf_counter() - t
                break
            lw = np.fromiter((s.logw for s in states), dtype=float, count=n)
            e = ess(lw)
            ess_trace.append(e)
            if cfg.ess_threshold >= 1.0 or e < cfg.ess_threshold * n:
                w, lse = normalize(lw)
                log_z += lse - log_n
                anc = systematic_resample(w, engine.uniform())
                resamples += 1
                used = [False] * n
                new = []
                keys = derive_keys((cfg.seed, resamples), n)
                for a, key in zip(anc.tolist(), keys):
                    rng = Rng(key)
                    if used[a]:
                        c = copy_state(states[a], rng, stats)
                    else:
                        used[a] = True
                        c = states[a]
                        c.rng = rng
                    c.logw = 0.0
                    new.append(c)
                states = new
            t_res += time.perf_counter() - t
    finally:
        if pool is not None:
            pool.shutdown()
    lw = np.fromiter((s.logw for s in states), dtype=float, count=n)
    w, lse = normalize(lw)
    log_z += lse - log_n
    total = time.perf_counter() - t0
    return SmcResult(states, w, log_z, resamples, ess_trace,
                     {"propagate": t_prop, "resample": t_res, "total": total}, stats)
