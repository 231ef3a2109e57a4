from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from siglasso.bipoly import PiecewiseBivariatePoly

rationals = st.fractions(min_value=0, max_value=3, max_denominator=7)


def poly(le, gt=None):
    return PiecewiseBivariatePoly({k: Fraction(v) for k, v in le.items()}, {k: Fraction(v) for k, v in (gt or le).items()})


def test_constant_and_zero():
    one = PiecewiseBivariatePoly.constant(1)
    assert one(Fraction(1, 3), Fraction(2)) == 1
    assert PiecewiseBivariatePoly.zero().is_zero()
    assert not one.is_zero()


def test_min_via_diag_integral():
    # int_0^{l^t} 1 ds = min(l, t)
    m = PiecewiseBivariatePoly.constant(1).diag_integral()
    assert m(Fraction(1, 2), Fraction(3, 4)) == Fraction(1, 2)
    assert m(Fraction(3, 4), Fraction(1, 2)) == Fraction(1, 2)
    assert m.diagonal_agrees()


@given(rationals, rationals)
def test_int_second_of_min(l, t):
    # int_0^t min(l, s) ds
    m = PiecewiseBivariatePoly.constant(1).diag_integral()
    got = m.int_second()(l, t)
    expect = t * t / 2 if t <= l else l * l / 2 + l * (t - l)
    assert got == expect


@given(rationals, rationals)
def test_int_first_of_min(l, t):
    m = PiecewiseBivariatePoly.constant(1).diag_integral()
    got = m.int_first()(l, t)
    expect = l * l / 2 if l <= t else t * t / 2 + t * (l - t)
    assert got == expect


@given(rationals, rationals)
def test_swap_exchanges_arguments(l, t):
    m = PiecewiseBivariatePoly.constant(1).diag_integral().int_second()
    assert m.swap()(l, t) == m(t, l)


@given(rationals, rationals, rationals)
def test_linear_operations(l, t, c):
    a = PiecewiseBivariatePoly.constant(1).diag_integral()
    b = a.int_second()
    assert (a + b.scale(c))(l, t) == a(l, t) + c * b(l, t)


def test_equality_and_hash():
    a = PiecewiseBivariatePoly.constant(2)
    b = PiecewiseBivariatePoly.constant(1) + PiecewiseBivariatePoly.constant(1)
    assert a == b and hash(a) == hash(b)
