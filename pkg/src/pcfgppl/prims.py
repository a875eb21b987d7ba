"""Semantics of the builtin functions, shared by the VM and the reference interpreter.

Float operations follow IEEE conventions (``log 0. = -inf``, ``divf 1. 0. = inf``)
instead of raising, because log-weights of rejected executions are ``-inf``.
"""

from __future__ import annotations

import math

from .errors import VMError

INF = math.inf
NAN = math.nan


def log(x: float) -> float:
    if x > 0.0:
        return math.log(x)
    if x == 0.0:
        return -INF
    return NAN


def exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return INF


def sqrt(x: float) -> float:
    return math.sqrt(x) if x >= 0.0 else NAN


def divf(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or a != a:
            return NAN
        return math.copysign(INF, a) * math.copysign(1.0, b)


def divi(a: int, b: int) -> int:
    if b == 0:
        raise VMError("integer division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def modi(a: int, b: int) -> int:
    return a - b * divi(a, b)


def get(seq: tuple, i: int):
    if not 0 <= i < len(seq):
        raise VMError(f"sequence index {i} out of range for length {len(seq)}")
    return seq[i]


PRIM_FUNCS = {
    "addi": lambda a, b: a + b,
    "subi": lambda a, b: a - b,
    "muli": lambda a, b: a * b,
    "divi": divi,
    "modi": modi,
    "negi": lambda a: -a,
    "eqi": lambda a, b: a == b,
    "neqi": lambda a, b: a != b,
    "lti": lambda a, b: a < b,
    "gti": lambda a, b: a > b,
    "leqi": lambda a, b: a <= b,
    "geqi": lambda a, b: a >= b,
    "addf": lambda a, b: a + b,
    "subf": lambda a, b: a - b,
    "mulf": lambda a, b: a * b,
    "divf": divf,
    "negf": lambda a: -a,
    "eqf": lambda a, b: a == b,
    "neqf": lambda a, b: a != b,
    "ltf": lambda a, b: a < b,
    "gtf": lambda a, b: a > b,
    "leqf": lambda a, b: a <= b,
    "geqf": lambda a, b: a >= b,
    "log": log,
    "exp": exp,
    "sqrt": sqrt,
    "int2float": float,
    "not": lambda a: not a,
    "get": get,
    "length": len,
}

# Python expression templates used by the block translator; anything absent is
# emitted as a call into PRIM_FUNCS.
INLINE = {
    "addi": "({0} + {1})", "subi": "({0} - {1})", "muli": "({0} * {1})",
    "negi": "(-{0})",
    "eqi": "({0} == {1})", "neqi": "({0} != {1})", "lti": "({0} < {1})",
    "gti": "({0} > {1})", "leqi": "({0} <= {1})", "geqi": "({0} >= {1})",
    "addf": "({0} + {1})", "subf": "({0} - {1})", "mulf": "({0} * {1})",
    "negf": "(-{0})",
    "eqf": "({0} == {1})", "neqf": "({0} != {1})", "ltf": "({0} < {1})",
    "gtf": "({0} > {1})", "leqf": "({0} <= {1})", "geqf": "({0} >= {1})",
    "int2float": "float({0})", "not": "(not {0})", "length": "len({0})",
}
