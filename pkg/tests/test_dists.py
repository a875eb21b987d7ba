import math
import zlib

import numpy as np
import pytest
from scipy import stats

from pcfgppl import dists
from pcfgppl.errors import DistParamError
from pcfgppl.rng import Rng, derive_key
from pcfgppl.pcfgvm import initial_state, run_single

from conftest import compiled_src

CASES = [
    ("Bernoulli", (0.3,)),
    ("Normal", (1.5, 2.0)),
    ("Gamma", (0.5, 2.0)),
    ("Gamma", (3.0, 0.5)),
    ("Exponential", (2.0,)),
    ("Poisson", (3.0,)),
    ("Poisson", (50.0,)),
    ("Binomial", (20, 0.3)),
    ("Binomial", (1000, 0.4)),
    ("Binomial", (1000, 0.9)),
    ("Uniform", (-1.0, 3.0)),
    ("Beta", (2.0, 5.0)),
]


def _draws(name, args, n=100_000, seed=0):
    # fixed streams: the seed depends only on the case, never on the process
    rng = Rng(derive_key(seed, zlib.crc32(repr((name, args)).encode())))
    return np.array([float(dists.sample(name, args, rng)) for _ in range(n)])


def test_bernoulli_one_always_true():
    rng = Rng(1)
    assert all(dists.sample_bernoulli(rng, 1.0) for _ in range(10_000))


def test_bernoulli_zero_always_false():
    rng = Rng(1)
    assert not any(dists.sample_bernoulli(rng, 0.0) for _ in range(10_000))


@pytest.mark.parametrize("sd", [0.0, -1.0, math.inf, math.nan])
def test_normal_bad_stddev(sd):
    with pytest.raises(DistParamError):
        dists.sample_normal(Rng(0), 0.0, sd)


@pytest.mark.parametrize("name, args", [
    ("Bernoulli", (1.5,)), ("Gamma", (0.0, 1.0)), ("Exponential", (-1.0,)),
    ("Poisson", (-0.5,)), ("Binomial", (3.5, 0.5)), ("Binomial", (3, 1.2)),
    ("Uniform", (2.0, 1.0)), ("Beta", (1.0, 0.0)),
])
def test_parameter_domains(name, args):
    with pytest.raises(DistParamError):
        dists.sample(name, args, Rng(0))


def test_known_params_skips_unknown():
    dists.check_known_params("Normal", (None, 1.0))
    with pytest.raises(DistParamError, match="stddev"):
        dists.check_known_params("Normal", (None, 0.0))


def test_normal_0_100_mean():
    assert abs(_draws("Normal", (0.0, 100.0)).mean()) <= 1.0


def test_log_density_examples():
    assert dists.log_density("Bernoulli", (0.5,), True) == pytest.approx(math.log(0.5))
    assert dists.log_density("Normal", (0.0, 1.0), 0.0) == pytest.approx(-0.918939, abs=1e-6)
    assert dists.log_density("Normal", (0.0, 1.0), 0.3) == pytest.approx(-0.963939, abs=1e-6)


@pytest.mark.parametrize("name, args, ref, xs", [
    ("Normal", (1.5, 2.0), lambda x: stats.norm(1.5, 2.0).logpdf(x), [-3.0, 0.0, 1.5, 7.0]),
    ("Gamma", (3.0, 0.5), lambda x: stats.gamma(3.0, scale=0.5).logpdf(x), [0.1, 1.0, 4.0]),
    ("Exponential", (2.0,), lambda x: stats.expon(scale=0.5).logpdf(x), [0.0, 0.3, 5.0]),
    ("Uniform", (-1.0, 3.0), lambda x: stats.uniform(-1.0, 4.0).logpdf(x), [-1.0, 0.0, 2.9]),
    ("Beta", (2.0, 5.0), lambda x: stats.beta(2.0, 5.0).logpdf(x), [0.01, 0.3, 0.99]),
    ("Poisson", (3.0,), lambda k: stats.poisson(3.0).logpmf(k), [0, 1, 5, 20]),
    ("Binomial", (20, 0.3), lambda k: stats.binom(20, 0.3).logpmf(k), [0, 6, 20]),
])
def test_log_density_matches_reference(name, args, ref, xs):
    for x in xs:
        assert dists.log_density(name, args, x) == pytest.approx(float(ref(x)), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("name, args, x", [
    ("Poisson", (3.0,), -1), ("Binomial", (5, 0.5), 6), ("Gamma", (2.0, 1.0), -1.0),
    ("Uniform", (0.0, 1.0), 2.0), ("Exponential", (1.0,), -0.1),
])
def test_off_support_is_negative_infinity(name, args, x):
    assert dists.log_density(name, args, x) == -math.inf


@pytest.mark.parametrize("name, args, support", [
    ("Bernoulli", (0.3,), [True, False]),
    ("Binomial", (10, 0.3), range(11)),
    ("Binomial", (60, 0.7), range(61)),
    ("Poisson", (3.0,), range(200)),
])
def test_pmf_sums_to_one(name, args, support):
    total = math.fsum(math.exp(dists.log_density(name, args, x)) for x in support)
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name, args", CASES)
def test_moments_within_five_standard_errors(name, args):
    xs = _draws(name, args)
    n = xs.size
    mean, var = dists.mean_var(name, args)
    assert abs(xs.mean() - mean) <= 5 * math.sqrt(var / n)
    m4 = np.mean((xs - xs.mean()) ** 4)
    assert abs(xs.var(ddof=1) - var) <= 5 * math.sqrt(max(m4 - var * var, 0.0) / n)


def test_observe_equals_weight_of_log_density():
    observe = compiled_src(
        "let x = assume (Normal 0. 1.) in observe 0.3 (Normal x 2.); x")
    weight = compiled_src(
        "let x = assume (Normal 0. 1.) in\n"
        "let z = divf (subf 0.3 x) 2. in\n"
        "weight (subf (mulf (negf 0.5) (mulf z z))\n"
        "             (addf (log 2.) (mulf 0.5 (log (mulf 2. 3.141592653589793)))));\n"
        "x")
    for seed in range(20):
        a = run_single(observe.pcfg, initial_state(observe.pcfg, Rng(seed)))
        b = run_single(weight.pcfg, initial_state(weight.pcfg, Rng(seed)))
        x = a.stack[0]
        assert a.logw == pytest.approx(b.logw, abs=1e-12)
        assert a.logw == dists.log_density("Normal", (x, 2.0), 0.3)
