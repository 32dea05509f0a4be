import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastlimit.expr_dsl import (
    BinOp,
    Call,
    DivisionNearZero,
    ExprSyntaxError,
    Neg,
    Num,
    UnbalancedParen,
    UnknownIdentifier,
    Var,
    evaluate,
    lipschitz_estimate,
    parse,
    to_source,
)


def test_parse_examples():
    assert parse("u*(1-u)") == BinOp("*", Var("u"), BinOp("-", Num(1.0), Var("u")))
    assert parse("max(u,0) - min(v,0)") == BinOp(
        "-", Call("max", (Var("u"), Num(0.0))), Call("min", (Var("v"), Num(0.0)))
    )


def test_precedence_and_associativity():
    assert parse("1 - 2 - 3") == BinOp("-", BinOp("-", Num(1.0), Num(2.0)), Num(3.0))
    assert parse("8 / 4 / 2")(0, 0) == 1.0
    assert parse("1 + 2 * 3")(0, 0) == 7.0
    assert parse("-u * v") == BinOp("*", Neg(Var("u")), Var("v"))
    assert parse("--u")(2.0, 0) == 2.0
    assert parse("2 * -3")(0, 0) == -6.0


def test_syntax_error_offsets():
    with pytest.raises(ExprSyntaxError) as info:
        parse("u +")
    assert info.value.offset == 3
    with pytest.raises(UnbalancedParen) as info:
        parse("(u + v")
    assert info.value.offset == 6
    with pytest.raises(UnbalancedParen) as info:
        parse("u + v)")
    assert info.value.offset == 5
    with pytest.raises(UnknownIdentifier) as info:
        parse("u + w")
    assert info.value.offset == 4
    with pytest.raises(UnknownIdentifier):
        parse("foo(u)")
    with pytest.raises(ExprSyntaxError):
        parse("abs(u, v)")
    with pytest.raises(ExprSyntaxError):
        parse("min(u)")
    with pytest.raises(ExprSyntaxError) as info:
        parse("u $ v")
    assert info.value.offset == 2


def test_offsets_are_bytes():
    # two-byte character before the error position
    with pytest.raises(ExprSyntaxError) as info:
        parse("u + é")
    assert info.value.offset == 4
    with pytest.raises(ExprSyntaxError) as info:
        parse("é + u")
    assert info.value.offset == 0
    with pytest.raises(ExprSyntaxError) as info:
        parse("(u) é")
    assert info.value.offset == 4


def test_eval_examples():
    assert evaluate(parse("u*(1-u)"), 2, 0) == -2.0
    assert evaluate(parse("abs(v)"), 0, -3) == 3.0
    with pytest.raises(DivisionNearZero):
        evaluate(parse("u/v"), 1, 0)
    assert evaluate(parse("pospart(u) + negpart(v)"), -1, -2) == 2.0
    assert evaluate(parse("max(u, v, 7)"), 1, 2) == 7.0
    assert evaluate(parse("cos(pi*x)", variables=("x",)), x=0.0) == 1.0


def test_eval_arrays():
    e = parse("min(u, -v)")
    np.testing.assert_array_equal(e(np.array([1.0, -2.0]), np.array([0.5, 1.0])), [-0.5, -2.0])


def test_lipschitz_examples():
    assert lipschitz_estimate(parse("u"), (-3, 5, -1, 1), 11) == pytest.approx(1.0)
    n = 101
    est = lipschitz_estimate(parse("u*(1-u)"), (0, 1, 0, 1), n)
    assert abs(est - 1.0) <= 2.0 / n
    assert lipschitz_estimate(parse("3"), (0, 1, 0, 1), 5) == 0.0
    with pytest.raises(ValueError):
        lipschitz_estimate(parse("u"), (0, 1, 0, 1), 1)


def test_free_variables():
    assert parse("u*(1-u) + 2").free_variables == {"u"}


# -- independent oracle: tuple trees, a tree-walk evaluator and a source
#    printer that relies on precedence instead of full parenthesization.

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_GUARD = 1e-12


class _DivZero(Exception):
    pass


def _random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.4:
            return ("num", float(rng.integers(0, 20)) / 4)
        return ("var", "u" if r < 0.7 else "v")
    r = rng.random()
    if r < 0.6:
        op = "+-*/"[int(rng.integers(0, 4))]
        return ("bin", op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))
    if r < 0.75:
        return ("neg", _random_tree(rng, depth - 1))
    name = ["min", "max", "abs", "pospart", "negpart"][int(rng.integers(0, 5))]
    nargs = int(rng.integers(2, 4)) if name in ("min", "max") else 1
    return ("call", name, [_random_tree(rng, depth - 1) for _ in range(nargs)])


def _walk(t, u, v):
    tag = t[0]
    if tag == "num":
        return t[1]
    if tag == "var":
        return u if t[1] == "u" else v
    if tag == "neg":
        return -_walk(t[1], u, v)
    if tag == "bin":
        a, b = _walk(t[2], u, v), _walk(t[3], u, v)
        if t[1] == "+":
            return a + b
        if t[1] == "-":
            return a - b
        if t[1] == "*":
            return a * b
        if abs(b) < _GUARD:
            raise _DivZero
        return a / b
    args = [_walk(a, u, v) for a in t[2]]
    name = t[1]
    if name == "min":
        return min(args)
    if name == "max":
        return max(args)
    if name == "abs":
        return abs(args[0])
    if name == "pospart":
        return max(args[0], 0.0)
    return max(-args[0], 0.0)


def _print(t, parent=0, right=False):
    tag = t[0]
    if tag == "num":
        return repr(t[1])
    if tag == "var":
        return t[1]
    if tag == "neg":
        return "-" + _print(t[1], 3)
    if tag == "call":
        return t[1] + "(" + ", ".join(_print(a) for a in t[2]) + ")"
    p = _PREC[t[1]]
    s = _print(t[2], p) + " " + t[1] + " " + _print(t[3], p, right=True)
    if p < parent or (p == parent and right):
        s = "(" + s + ")"
    return s


def test_eval_matches_tree_walk_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(10_000):
        t = _random_tree(rng, 5)
        src = _print(t)
        e = parse(src)
        u, v = rng.uniform(-3, 3, 2)
        try:
            expected = _walk(t, u, v)
        except _DivZero:
            with pytest.raises(DivisionNearZero):
                evaluate(e, u, v)
            continue
        got = evaluate(e, u, v)
        if math.isnan(expected):
            assert math.isnan(got)
        else:
            assert got == expected, src
        checked += 1
    assert checked > 9000


def test_print_parse_idempotent():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        e = parse(_print(_random_tree(rng, 5)))
        once = to_source(e)
        assert parse(once) == e
        assert to_source(parse(once)) == once


_name = st.sampled_from(["u", "v"])
_num = st.integers(0, 1000).map(lambda n: repr(n / 8))


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(children, children).map(lambda t: f"max({t[0]}, {t[1]})"),
        children.map(lambda c: f"abs({c})"),
    )


_src = st.recursive(st.one_of(_name, _num), _combine, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(src=_src)
def test_roundtrip_property(src):
    e = parse(src)
    assert parse(to_source(e)) == e


@settings(max_examples=200, deadline=None)
@given(src=_src, cut=st.integers(0, 40))
def test_truncated_source_errors_carry_offset(src, cut):
    text = src[: min(cut, len(src))]
    try:
        parse(text)
    except (ExprSyntaxError, UnbalancedParen, UnknownIdentifier) as exc:
        assert exc.offset is not None
        assert 0 <= exc.offset <= len(text.encode())
        assert re.search(r"offset \d+", str(exc))
