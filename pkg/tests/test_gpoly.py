import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilcorr.errors import DegreeOverflow
from nilcorr.gpoly import (Add, Floor, Mul, Var, approximate_character, const, equal,
                           eval_gpoly, eval_numeric, format_gpoly, frac, observed_error,
                           parse_gpoly)
from nilcorr.scalar import Scalar

from strategies import BASIS, scalars

B1 = BASIS.symbol("b1")


def test_eval_examples():
    p = parse_gpoly('(mul (var 0) (floor (mul (const "1 + 1*b1") (var 0))))', BASIS)
    assert eval_gpoly(p, 1) == Scalar(1)
    assert eval_gpoly(Floor(Var(0)), 7) == Scalar(7)
    assert eval_gpoly(Floor(Var(0)), -3) == Scalar(-3)
    assert eval_gpoly(frac(Mul(const(B1), Var(0))), 0) == Scalar(0)


def test_eval_matches_high_precision_oracle():
    b1 = mpmath.sqrt(2) - 1
    b2 = mpmath.sqrt(3) - 1
    p = Add(Mul(Var(0), Floor(Mul(const(BASIS.symbol("b2")), Var(1)))),
            Floor(Mul(Mul(const(B1), Var(0)), Var(0))))
    for n in [(0, 0), (3, 5), (-7, 11), (40, -13)]:
        with mpmath.workdps(60):
            want = n[0] * mpmath.floor(b2 * n[1]) + mpmath.floor(b1 * n[0] ** 2)
        assert eval_gpoly(p, n) == Scalar(int(want))


@given(scalars(), st.integers(-10**4, 10**4))
def test_frac_is_bounded_and_deterministic(a, n):
    p = frac(Mul(const(a), Var(0)))
    v = eval_gpoly(p, n)
    assert 0 <= float(v) < 1
    assert eval_gpoly(p, n) == v
    assert abs(float(eval_numeric(p, n)) - float(v)) < 1e-12


@given(scalars())
def test_text_round_trip(a):
    p = Add(Mul(Var(0), Floor(Mul(const(a), Var(1)))), frac(Var(0)))
    q = parse_gpoly(format_gpoly(p), BASIS)
    assert equal(p, q)
    assert format_gpoly(q) == format_gpoly(p)


def test_trivial_approximations():
    for m, alpha in [(0, B1), (3, Scalar(0))]:
        ap = approximate_character(m, alpha, 1e-3)
        assert ap.sup_err == 0
        assert all(ap.value(n) == 1 for n in range(-5, 6))


def test_approximation_example():
    ap = approximate_character(1, B1, 1e-2)
    assert ap.sup_err <= 1e-2
    err = observed_error(ap, 1, B1, range(0, 10001, 3))
    assert err <= ap.sup_err


@settings(max_examples=8)
@given(st.integers(-4, 4).filter(bool), st.sampled_from([1e-2, 1e-4, 1e-7]),
       st.sampled_from([Fraction(1, 7), Fraction(2, 3)]))
def test_declared_error_dominates_observed(m, eps, q):
    alpha = B1 + Scalar(q)
    ap = approximate_character(m, alpha, eps)
    assert ap.sup_err <= eps
    assert observed_error(ap, m, alpha, range(-300, 300, 7)) <= ap.sup_err


def test_degree_overflow():
    with pytest.raises(DegreeOverflow):
        approximate_character(500, B1, 1e-12)


def test_degree_grows_with_precision():
    d1 = approximate_character(1, B1, 1e-2).degree
    d2 = approximate_character(1, B1, 1e-8).degree
    assert d2 > d1
    assert math.isfinite(approximate_character(2, B1, 1e-8).sup_err)
