"""Hypothesis strategies for small well-typed source programs."""

from hypothesis import strategies as st

PRELUDE = "let g = lam a. addi a 1 in\n"


@st.composite
def int_expr(draw, depth=3, scope=()):
    """Source text of an Int-valued expression over the variables in ``scope``."""
    leaves = ["lit"] + (["var"] if scope else [])
    kinds = leaves if depth <= 0 else leaves + ["bin", "if", "let", "call", "assume", "seq"]
    k = draw(st.sampled_from(kinds))
    sub = lambda sc=scope: int_expr(depth=depth - 1, scope=sc)  # noqa: E731
    if k == "lit":
        return str(draw(st.integers(0, 9)))
    if k == "var":
        return draw(st.sampled_from(scope))
    if k == "bin":
        op = draw(st.sampled_from(["addi", "subi", "muli"]))
        return f"({op} {draw(sub())} {draw(sub())})"
    if k == "if":
        return f"(if lti {draw(sub())} {draw(sub())} then {draw(sub())} else {draw(sub())})"
    if k == "let":
        v = f"v{len(scope)}"
        return f"(let {v} = {draw(sub())} in {draw(sub(scope + (v,)))})"
    if k == "call":
        return f"(g {draw(sub())})"
    if k == "assume":
        return "(assume (Poisson 2.))"
    return f"(weight 0.; {draw(sub())})"


@st.composite
def program(draw, depth=3):
    return PRELUDE + draw(int_expr(depth=depth))
