"""Reference implementations used to check the compiler and the engine.

* :func:`interpret_direct` evaluates a program's terms by structural
  recursion, with no decomposition, frames or blocks; ``resample`` is a no-op.
* :func:`kalman_filter` gives the exact marginal likelihood and filtered
  mean of the linear-Gaussian state-space model.
* A few closed forms for the geometric programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dists
from .errors import VMError
from .frontend.syntax import (
    App, Assume, Builtin, Con, Const, Let, Match, Observe, PCon, PLit, PRecord, PVar, PWild,
    RecordLit, Resample, SeqLit, Var, Weight,
)
from .frontend.typecheck import Program
from .prims import PRIM_FUNCS

# ------------------------------------------------------------------ interpreter


class _Interp:
    def __init__(self, program: Program, rng):
        self.program = program
        self.rng = rng
        self.logw = 0.0
        self.consts = {n: v for n, (_, v) in program.consts.items()}

    def atom(self, t, env, types):
        if isinstance(t, Var):
            if t.name in env:
                return env[t.name]
            return self.consts[t.name]
        if isinstance(t, Const):
            return t.value
        return self.eval(t, env, types)

    def call(self, name, args):
        f = self.program.funcs[name]
        return self.eval(f.body, dict(zip(f.params, args)), f.types)

    def type_of_target(self, t, types):
        if isinstance(t, Var):
            if t.name in types:
                return types[t.name]
            if t.name in self.program.consts:
                return self.program.consts[t.name][0]
        return None

    def eval(self, t, env, types):
        while True:
            if isinstance(t, Let):
                env = {**env, t.name: self.eval(t.rhs, env, types)}
                t = t.body
                continue
            if isinstance(t, Match):
                v = self.atom(t.target, env, types)
                binds = match(t.pat, v, self.type_of_target(t.target, types), self.program)
                if binds is None:
                    t = t.els
                else:
                    env = {**env, **binds}
                    t = t.thn
                continue
            break
        if isinstance(t, (Var, Const)):
            return self.atom(t, env, types)
        if isinstance(t, App):
            fn, args = t.fn, list(t.args)
            while isinstance(fn, App):
                args = list(fn.args) + args
                fn = fn.fn
            vals = [self.atom(a, env, types) for a in args]
            if isinstance(fn, Const) and isinstance(fn.value, Builtin):
                return PRIM_FUNCS[fn.value.name](*vals)
            return self.call(fn.name, vals)
        if isinstance(t, Assume):
            args = [self.atom(a, env, types) for a in t.dist.args]
            return getattr(self.rng, t.dist.name)(*args)
        if isinstance(t, Observe):
            x = self.atom(t.value, env, types)
            args = [self.atom(a, env, types) for a in t.dist.args]
            self.logw += dists.log_density(t.dist.name, args, x)
            return ()
        if isinstance(t, Weight):
            self.logw += self.atom(t.arg, env, types)
            return ()
        if isinstance(t, Resample):
            return ()
        if isinstance(t, Con):
            return (t.name, self.atom(t.arg, env, types))
        if isinstance(t, RecordLit):
            return tuple(self.atom(v, env, types) for _, v in sorted(t.fields, key=lambda f: f[0]))
        if isinstance(t, SeqLit):
            return tuple(self.atom(v, env, types) for v in t.items)
        raise VMError(f"cannot evaluate {type(t).__name__}")


def match(pat, v, ty, program):
    """Bindings if ``v`` (of type ``ty``, when known) matches ``pat``, else None."""
    if isinstance(pat, PWild):
        return {}
    if isinstance(pat, PVar):
        return {pat.name: v}
    if isinstance(pat, PLit):
        return {} if v == pat.value else None
    if isinstance(pat, PCon):
        if v[0] != pat.name:
            return None
        return match(pat.sub, v[1], program.con_payload(pat.name), program)
    if isinstance(pat, PRecord):
        out = {}
        if ty is not None:
            have = dict(ty.fields)
            labels = ty.labels()
        else:
            have = {}
            labels = sorted(l for l, _ in pat.fields)
            if len(labels) != len(v):
                raise VMError("record pattern on a value of unknown type must name every field")
        for label, sub in pat.fields:
            b = match(sub, v[labels.index(label)], have.get(label), program)
            if b is None:
                return None
            out.update(b)
        return out
    raise VMError(f"unknown pattern {pat!r}")


def interpret_direct(program: Program, rng) -> tuple:
    """Evaluate ``program``'s main body; returns ``(value, logWeight)``.

    ``rng`` supplies one method per distribution (an :class:`~pcfgppl.rng.Rng`
    or a :class:`~pcfgppl.rng.TapeRng`).
    """
    it = _Interp(program, rng)
    value = it.eval(program.main.body, {}, program.main.types)
    return value, it.logw


# ------------------------------------------------------------------ state-space model


@dataclass(frozen=True)
class SsmParams:
    """``X0 ~ N(m0, v0)``, ``X_t ~ N(X_{t-1} + drift, q)``, ``Y_t ~ N(X_t, r)``;
    every second argument is a variance."""

    prior_mean: float = 0.0
    prior_var: float = 100.0
    drift: float = 2.0
    trans_var: float = 1.0
    obs_var: float = 5.0

    def check(self):
        for name in ("prior_var", "trans_var", "obs_var"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def kalman_filter(params: SsmParams, observations, transition_first: bool = True):
    """Exact ``(logZ, filtered mean of X_T, filtered variance of X_T)``.

    With ``transition_first`` (the model above) the first observation sees
    ``X_1``; otherwise the prior describes the first observed state directly.
    """
    params.check()
    m, p = params.prior_mean, params.prior_var
    log_z = 0.0
    for k, y in enumerate(observations):
        if transition_first or k > 0:
            m, p = m + params.drift, p + params.trans_var
        s = p + params.obs_var
        log_z += -0.5 * (math.log(2.0 * math.pi * s) + (y - m) ** 2 / s)
        gain = p / s
        m, p = m + gain * (y - m), (1.0 - gain) * p
    return log_z, m, p


def kalman_logz(params: SsmParams, observations, transition_first: bool = True) -> float:
    return kalman_filter(params, observations, transition_first)[0]


def simulate_ssm(params: SsmParams, steps: int, seed: int):
    """Forward simulation; returns ``(states X_0..X_T, observations Y_1..Y_T)``."""
    if steps < 1:
        raise ValueError("need at least one time step")
    rng = np.random.default_rng(seed)
    xs = [rng.normal(params.prior_mean, math.sqrt(params.prior_var))]
    ys = []
    for _ in range(steps):
        xs.append(xs[-1] + params.drift + rng.normal(0.0, math.sqrt(params.trans_var))
                  if params.trans_var > 0 else xs[-1] + params.drift)
        ys.append(rng.normal(xs[-1], math.sqrt(params.obs_var)))
    return xs, ys


# ------------------------------------------------------------------ closed forms


def weighted_geometric_pmf(n: int, p: float = 0.5, factor: float = 1.5) -> float:
    """Posterior of the geometric program that multiplies the weight by
    ``factor`` on every success: proportional to ``(1-p) p^(n-1) factor^(n-1)``."""
    q = p * factor
    if q >= 1.0:
        raise ValueError("weights do not normalize")
    return (1.0 - q) * q ** (n - 1)


def weighted_geometric_log_z(p: float = 0.5, factor: float = 1.5) -> float:
    """log of sum_n (1-p) p^(n-1) factor^(n-1)."""
    return math.log((1.0 - p) / (1.0 - p * factor))
