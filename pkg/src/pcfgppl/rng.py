"""Per-particle random number generators.

:class:`Rng` is counter based: the i-th uniform of a generator is a pure
function of ``(key, i)`` (SplitMix64 finalizer), so a particle's randomness
does not depend on which worker runs it or in what order. The engine derives
a fresh key for every particle after every resampling step.

:class:`TapeRng` forces the outcome of each ``assume``: either from a fixed
list of values or from an independent stream per draw index. Both engines
(direct interpreter and block VM) see the same value for the k-th draw, which
turns semantic equivalence into an exact comparison.
"""

from __future__ import annotations

import numpy as np

from . import dists
from .errors import DistParamError, TapeExhausted

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _C1) & M64
    z = ((z ^ (z >> 27)) * _C2) & M64
    return z ^ (z >> 31)


_KEY_INIT = 0x6A09E667F3BCC908


def derive_key(*parts: int) -> int:
    """Hash a tuple of non-negative integers into a 64-bit key."""
    h = _KEY_INIT
    for p in parts:
        h = mix64((h + GOLDEN + (p & M64)) & M64)
    return h


def derive_keys(prefix: tuple, n: int) -> list:
    """``[derive_key(*prefix, j) for j in range(n)]``, vectorized."""
    h = derive_key(*prefix) if prefix else _KEY_INIT
    with np.errstate(over="ignore"):
        z = np.arange(n, dtype=np.uint64) + np.uint64((h + GOLDEN) & M64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
        z ^= z >> np.uint64(31)
    return z.tolist()


class Rng:
    __slots__ = ("key", "ctr")

    def __init__(self, key: int, ctr: int = 0):
        self.key = key & M64
        self.ctr = ctr

    def uniform(self) -> float:
        """Uniform double in the open interval (0, 1)."""
        self.ctr = c = self.ctr + 1
        z = (self.key + c * GOLDEN) & M64
        z = ((z ^ (z >> 30)) * _C1) & M64
        z = ((z ^ (z >> 27)) * _C2) & M64
        z ^= z >> 31
        return ((z >> 11) + 0.5) * _TWO_M53

    def copy(self) -> "Rng":
        return Rng(self.key, self.ctr)

    def __eq__(self, other):
        return isinstance(other, Rng) and (self.key, self.ctr) == (other.key, other.ctr)

    def __repr__(self):
        return f"Rng(key={self.key:#x}, ctr={self.ctr})"

    def __getstate__(self):
        return (self.key, self.ctr)

    def __setstate__(self, st):
        self.key, self.ctr = st

    # one method per distribution; generated code calls these
    def Bernoulli(self, p):
        return dists.sample_bernoulli(self, p)

    def Normal(self, mean, stddev):
        return dists.sample_normal(self, mean, stddev)

    def Gamma(self, shape, scale):
        return dists.sample_gamma(self, shape, scale)

    def Exponential(self, rate):
        return dists.sample_exponential(self, rate)

    def Poisson(self, rate):
        return dists.sample_poisson(self, rate)

    def Binomial(self, n, p):
        return dists.sample_binomial(self, n, p)

    def Uniform(self, low, high):
        return dists.sample_uniform(self, low, high)

    def Beta(self, a, b):
        return dists.sample_beta(self, a, b)


class TapeRng:
    """Forced-choice generator.

    ``values``: the k-th draw returns ``values[k]`` (after checking the
    distribution parameters); running past the end raises TapeExhausted.
    ``seed``: the k-th draw is sampled from its distribution with a stream
    keyed by ``(seed, k)``; ``limit`` bounds the number of draws.
    ``log`` records ``(dist, args, value)`` for each draw.
    """

    def __init__(self, values=None, seed: int | None = None, limit: int | None = None):
        if (values is None) == (seed is None):
            raise ValueError("give exactly one of values or seed")
        self.values = list(values) if values is not None else None
        self.seed = seed
        self.limit = limit
        self.pos = 0
        self.log: list = []

    def copy(self) -> "TapeRng":
        c = TapeRng.__new__(TapeRng)
        c.values, c.seed, c.limit, c.pos = self.values, self.seed, self.limit, self.pos
        c.log = list(self.log)
        return c

    def _draw(self, name, args):
        dists.check_params(name, args)
        k = self.pos
        if self.values is not None:
            if k >= len(self.values):
                raise TapeExhausted(f"tape of length {len(self.values)} exhausted")
            v = self.values[k]
        else:
            if self.limit is not None and k >= self.limit:
                raise TapeExhausted(f"draw limit {self.limit} reached")
            v = dists.sample(name, args, Rng(derive_key(self.seed, k)))
        self.pos = k + 1
        self.log.append((name, tuple(args), v))
        return v

    def uniform(self) -> float:
        raise DistParamError("tape generators only produce distribution draws")

    def Bernoulli(self, p):
        return self._draw("Bernoulli", (p,))

    def Normal(self, mean, stddev):
        return self._draw("Normal", (mean, stddev))

    def Gamma(self, shape, scale):
        return self._draw("Gamma", (shape, scale))

    def Exponential(self, rate):
        return self._draw("Exponential", (rate,))

    def Poisson(self, rate):
        return self._draw("Poisson", (rate,))

    def Binomial(self, n, p):
        return self._draw("Binomial", (n, p))

    def Uniform(self, low, high):
        return self._draw("Uniform", (low, high))

    def Beta(self, a, b):
        return self._draw("Beta", (a, b))
