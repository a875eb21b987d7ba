"""Sampling and log-densities for the built-in distributions.

Parameterizations: ``Normal mean stddev``, ``Gamma shape scale``,
``Exponential rate``, ``Poisson rate``, ``Binomial n p``,
``Uniform low high``, ``Beta a b``, ``Bernoulli p``.

Samplers take an object with a ``uniform()`` method returning floats in the
open interval (0, 1).
"""

from __future__ import annotations

import math

from .errors import DistParamError

LOG_2PI = math.log(2.0 * math.pi)
_NEG_INF = -math.inf
_INF = math.inf
_TWO_PI = 2.0 * math.pi


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _prob(name, p):
    if not (_finite(p) and 0.0 <= p <= 1.0):
        raise DistParamError(f"{name}: probability must be in [0, 1], got {p!r}")


def _positive(name, what, x):
    if not (_finite(x) and x > 0.0):
        raise DistParamError(f"{name}: {what} must be positive and finite, got {x!r}")


def check_params(name: str, args) -> None:
    """Raise :class:`DistParamError` unless ``args`` lie in the parameter domain."""
    if name == "Bernoulli":
        _prob(name, args[0])
    elif name == "Normal":
        if not _finite(args[0]):
            raise DistParamError(f"Normal: mean must be finite, got {args[0]!r}")
        _positive(name, "stddev", args[1])
    elif name == "Gamma":
        _positive(name, "shape", args[0])
        _positive(name, "scale", args[1])
    elif name == "Exponential":
        _positive(name, "rate", args[0])
    elif name == "Poisson":
        if not (_finite(args[0]) and args[0] >= 0.0):
            raise DistParamError(f"Poisson: rate must be non-negative, got {args[0]!r}")
    elif name == "Binomial":
        n, p = args
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise DistParamError(f"Binomial: n must be a non-negative integer, got {n!r}")
        _prob(name, p)
    elif name == "Uniform":
        a, b = args
        if not (_finite(a) and _finite(b) and a < b):
            raise DistParamError(f"Uniform: need finite low < high, got {a!r}, {b!r}")
    elif name == "Beta":
        _positive(name, "a", args[0])
        _positive(name, "b", args[1])
    else:
        raise DistParamError(f"unknown distribution {name}")


_ARG_DOMAINS = {
    "Bernoulli": (("p", "prob"),),
    "Normal": (("mean", "finite"), ("stddev", "positive")),
    "Gamma": (("shape", "positive"), ("scale", "positive")),
    "Exponential": (("rate", "positive"),),
    "Poisson": (("rate", "nonneg"),),
    "Binomial": (("n", "count"), ("p", "prob")),
    "Uniform": (("low", "finite"), ("high", "finite")),
    "Beta": (("a", "positive"), ("b", "positive")),
}


def check_known_params(name: str, args) -> None:
    """Like :func:`check_params`, where ``None`` marks an argument not known
    yet; only the known ones are checked."""
    if all(a is not None for a in args):
        check_params(name, args)
        return
    for (what, dom), a in zip(_ARG_DOMAINS[name], args):
        if a is None:
            continue
        if dom == "prob":
            _prob(name, a)
        elif dom == "positive":
            _positive(name, what, a)
        elif dom == "finite" and not _finite(a):
            raise DistParamError(f"{name}: {what} must be finite, got {a!r}")
        elif dom == "nonneg" and not (_finite(a) and a >= 0.0):
            raise DistParamError(f"{name}: {what} must be non-negative, got {a!r}")
        elif dom == "count" and (isinstance(a, bool) or not isinstance(a, int) or a < 0):
            raise DistParamError(f"{name}: {what} must be a non-negative integer, got {a!r}")


# ------------------------------------------------------------------ samplers


def sample_bernoulli(rng, p):
    if not 0.0 <= p <= 1.0:
        _prob("Bernoulli", p)
    return rng.uniform() < p


def _std_normal(rng):
    u1 = rng.uniform()
    u2 = rng.uniform()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def sample_normal(rng, mean, stddev):
    if not (0.0 < stddev < _INF and -_INF < mean < _INF):
        check_params("Normal", (mean, stddev))
    u1 = rng.uniform()
    u2 = rng.uniform()
    return mean + stddev * (math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2))


def _std_gamma(rng, shape):
    if shape < 1.0:
        # boost: Gamma(a) = Gamma(a + 1) * U^(1/a)
        g = _std_gamma(rng, shape + 1.0)
        return g * rng.uniform() ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _std_normal(rng)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.uniform()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def sample_gamma(rng, shape, scale):
    check_params("Gamma", (shape, scale))
    return _std_gamma(rng, shape) * scale


def sample_exponential(rng, rate):
    check_params("Exponential", (rate,))
    return -math.log(rng.uniform()) / rate


def sample_uniform(rng, low, high):
    check_params("Uniform", (low, high))
    return low + (high - low) * rng.uniform()


def sample_beta(rng, a, b):
    check_params("Beta", (a, b))
    x = _std_gamma(rng, a)
    y = _std_gamma(rng, b)
    return x / (x + y)


def sample_poisson(rng, lam):
    check_params("Poisson", (lam,))
    if lam == 0.0:
        return 0
    if lam < 10.0:
        # sequential inversion
        p = math.exp(-lam)
        s = p
        x = 0
        u = rng.uniform()
        while u > s:
            x += 1
            p *= lam / x
            s += p
            if p == 0.0 and u > s:
                break
        return x
    return _poisson_ptrs(rng, lam)


def _poisson_ptrs(rng, lam):
    """Transformed rejection with squeeze (Hormann 1993)."""
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.uniform() - 0.5
        v = rng.uniform()
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + lam + 0.43))
        if us >= 0.07 and v <= vr:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1)):
            return k


def sample_binomial(rng, n, p):
    check_params("Binomial", (n, p))
    if n == 0 or p == 0.0:
        return 0
    if p == 1.0:
        return n
    r = min(p, 1.0 - p)
    if n * r <= 30.0:
        y = _binomial_inversion(rng, n, r)
    else:
        y = _binomial_btpe(rng, n, r)
    return n - y if p > 0.5 else y


def _binomial_inversion(rng, n, p):
    q = 1.0 - p
    qn = math.exp(n * math.log1p(-p))
    r = p / q
    g = r * (n + 1)
    bound = min(n, int(n * p + 10.0 * math.sqrt(n * p * q + 1.0)))
    while True:
        x = 0
        px = qn
        u = rng.uniform()
        while u > px:
            x += 1
            if x > bound:
                break
            u -= px
            px = (g / x - r) * px
        else:
            return x


def _stirling(a, a2):
    return (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / a2) / a2) / a2) / a2) / a / 166320.0


def _binomial_btpe(rng, n, p):
    """Kachitvichyanukul and Schmeiser's BTPE for p <= 0.5 and n * p > 30."""
    r = p
    q = 1.0 - r
    fm = n * r + r
    m = math.floor(fm)
    p1 = math.floor(2.195 * math.sqrt(n * r * q) - 4.6 * q) + 0.5
    xm = m + 0.5
    xl = xm - p1
    xr = xm + p1
    c = 0.134 + 20.5 / (15.3 + m)
    a = (fm - xl) / (fm - xl * r)
    laml = a * (1.0 + a / 2.0)
    a = (xr - fm) / (xr * q)
    lamr = a * (1.0 + a / 2.0)
    p2 = p1 * (1.0 + 2.0 * c)
    p3 = p2 + c / laml
    p4 = p3 + c / lamr
    nrq = n * r * q
    while True:
        u = rng.uniform() * p4
        v = rng.uniform()
        if u <= p1:
            return int(math.floor(xm - p1 * v + u))
        if u <= p2:
            x = xl + (u - p1) / c
            v = v * c + 1.0 - abs(m - x + 0.5) / p1
            if v > 1.0:
                continue
            y = int(math.floor(x))
        elif u <= p3:
            y = int(math.floor(xl + math.log(v) / laml))
            if y < 0:
                continue
            v = v * (u - p2) * laml
        else:
            y = int(math.floor(xr - math.log(v) / lamr))
            if y > n:
                continue
            v = v * (u - p3) * lamr
        k = abs(y - m)
        if not (k > 20 and k < nrq / 2.0 - 1):
            s = r / q
            a = s * (n + 1)
            f = 1.0
            if m < y:
                for i in range(int(m) + 1, y + 1):
                    f *= a / i - s
            elif m > y:
                for i in range(y + 1, int(m) + 1):
                    f /= a / i - s
            if v > f:
                continue
            return y
        rho = (k / nrq) * ((k * (k / 3.0 + 0.625) + 0.16666666666666666) / nrq + 0.5)
        t = -k * k / (2.0 * nrq)
        big_a = math.log(v)
        if big_a < t - rho:
            return y
        if big_a > t + rho:
            continue
        x1 = y + 1.0
        f1 = m + 1.0
        z = n + 1.0 - m
        w = n - y + 1.0
        bound = (xm * math.log(f1 / x1) + (n - m + 0.5) * math.log(z / w)
                 + (y - m) * math.log(w * r / (x1 * q))
                 + _stirling(f1, f1 * f1) + _stirling(z, z * z)
                 + _stirling(x1, x1 * x1) + _stirling(w, w * w))
        if big_a > bound:
            continue
        return y


SAMPLERS = {
    "Bernoulli": sample_bernoulli,
    "Normal": sample_normal,
    "Gamma": sample_gamma,
    "Exponential": sample_exponential,
    "Poisson": sample_poisson,
    "Binomial": sample_binomial,
    "Uniform": sample_uniform,
    "Beta": sample_beta,
}


def sample(name: str, args, rng):
    return SAMPLERS[name](rng, *args)


# ------------------------------------------------------------------ densities


def _xlogy(x, y):
    if x == 0:
        return 0.0
    return x * math.log(y) if y > 0.0 else _NEG_INF


def logpdf_bernoulli(x, p):
    if not 0.0 <= p <= 1.0:
        _prob("Bernoulli", p)
    q = p if x else 1.0 - p
    return math.log(q) if q > 0.0 else _NEG_INF


def logpdf_normal(x, mean, stddev):
    if not (0.0 < stddev < _INF and -_INF < mean < _INF):
        check_params("Normal", (mean, stddev))
    z = (x - mean) / stddev
    return -0.5 * z * z - math.log(stddev) - 0.5 * LOG_2PI


def logpdf_gamma(x, shape, scale):
    check_params("Gamma", (shape, scale))
    if x < 0.0:
        return _NEG_INF
    if x == 0.0:
        if shape < 1.0:
            return math.inf
        return -math.log(scale) if shape == 1.0 else _NEG_INF
    return (shape - 1.0) * math.log(x) - x / scale - math.lgamma(shape) - shape * math.log(scale)


def logpdf_exponential(x, rate):
    check_params("Exponential", (rate,))
    return math.log(rate) - rate * x if x >= 0.0 else _NEG_INF


def logpdf_poisson(k, lam):
    check_params("Poisson", (lam,))
    if k < 0 or k != int(k):
        return _NEG_INF
    if lam == 0.0:
        return 0.0 if k == 0 else _NEG_INF
    return k * math.log(lam) - lam - math.lgamma(k + 1)


def logpdf_binomial(k, n, p):
    check_params("Binomial", (n, p))
    if k < 0 or k > n or k != int(k):
        return _NEG_INF
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + _xlogy(k, p) + _xlogy(n - k, 1.0 - p))


def logpdf_uniform(x, low, high):
    check_params("Uniform", (low, high))
    return -math.log(high - low) if low <= x <= high else _NEG_INF


def logpdf_beta(x, a, b):
    check_params("Beta", (a, b))
    if x < 0.0 or x > 1.0:
        return _NEG_INF
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    if x == 0.0 or x == 1.0:
        edge = a if x == 0.0 else b
        if edge < 1.0:
            return math.inf
        if edge > 1.0:
            return _NEG_INF
        return -lbeta
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - lbeta


LOGPDFS = {
    "Bernoulli": logpdf_bernoulli,
    "Normal": logpdf_normal,
    "Gamma": logpdf_gamma,
    "Exponential": logpdf_exponential,
    "Poisson": logpdf_poisson,
    "Binomial": logpdf_binomial,
    "Uniform": logpdf_uniform,
    "Beta": logpdf_beta,
}


def log_density(name: str, args, x) -> float:
    """Log pdf (continuous) or log pmf (discrete) of ``x``; ``-inf`` off support."""
    return LOGPDFS[name](x, *args)


def mean_var(name: str, args) -> tuple[float, float]:
    """Analytic mean and variance (used by statistical tests)."""
    if name == "Bernoulli":
        p = args[0]
        return float(p), p * (1.0 - p)
    if name == "Normal":
        return args[0], args[1] ** 2
    if name == "Gamma":
        k, s = args
        return k * s, k * s * s
    if name == "Exponential":
        return 1.0 / args[0], 1.0 / args[0] ** 2
    if name == "Poisson":
        return args[0], args[0]
    if name == "Binomial":
        n, p = args
        return n * p, n * p * (1.0 - p)
    if name == "Uniform":
        a, b = args
        return (a + b) / 2.0, (b - a) ** 2 / 12.0
    if name == "Beta":
        a, b = args
        return a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1.0))
    raise KeyError(name)
