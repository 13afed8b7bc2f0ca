from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from aperiodica.quadratic import SQRT2, TAU, DomainError, QuadElement, parse_quad, quad

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=12)
fields = st.sampled_from([2, 3, 5, 7])


@st.composite
def pairs(draw):
    d = draw(fields)
    return QuadElement(draw(fractions), draw(fractions), d), QuadElement(draw(fractions), draw(fractions), d)


def test_tau_squared():
    assert TAU * TAU == TAU + 1
    assert TAU * TAU == QuadElement(Fraction(3, 2), Fraction(1, 2), 5)


def test_silver_units():
    assert (1 + SQRT2) * (SQRT2 - 1) == 1
    assert TAU * (TAU - 1) == 1


def test_product_in_z_sqrt2():
    lam = 1 + SQRT2
    # (2 + sqrt 2)(1 + sqrt 2), expanded by hand
    assert (1 + lam) * lam == QuadElement(4, 3, 2)


def test_star_examples():
    assert TAU.star() == 1 - TAU
    assert TAU.star() == -1 / TAU
    assert SQRT2.star() == -SQRT2
    assert quad(3).star() == 3


def test_embed_examples():
    assert float(TAU) == pytest.approx(1.6180339887498949)
    assert float(1 - SQRT2) == pytest.approx(-0.41421356237309515)
    assert float(QuadElement(0, 0, 5)) == 0.0


def test_mismatched_fields_rejected():
    with pytest.raises(DomainError):
        SQRT2 + QuadElement(0, 1, 5)
    with pytest.raises(DomainError):
        QuadElement(1, 1, 4)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        SQRT2 / QuadElement(0, 0, 2)


def test_rationals_mix_with_any_field():
    assert QuadElement(2, 0, 5) + SQRT2 == QuadElement(2, 1, 2)


def test_text_round_trip():
    assert parse_quad("1/2 + 1/2*sqrt(5)") == TAU
    assert parse_quad("-3/4*sqrt(2)") == QuadElement(0, Fraction(-3, 4), 2)
    for x in (TAU, 1 + SQRT2, -SQRT2, QuadElement(Fraction(-7, 3), Fraction(5, 6), 7)):
        assert parse_quad(str(x)) == x


@given(pairs())
def test_star_is_ring_homomorphism(xy):
    x, y = xy
    assert (x * y).star() == x.star() * y.star()
    assert (x + y).star() == x.star() + y.star()
    assert x.star().star() == x


@given(pairs())
def test_division_inverts_multiplication(xy):
    x, y = xy
    if y:
        assert (x * y) / y == x


@given(pairs())
def test_exact_sign_agrees_with_float(xy):
    x, y = xy
    z = x - y
    f = float(z)
    if abs(f) > 1e-9:
        assert z.sign() == (1 if f > 0 else -1)
        assert (x < y) == (float(x) < float(y))


@given(fractions, fractions, fields)
def test_zero_only_when_both_coefficients_vanish(p, q, d):
    x = QuadElement(p, q, d)
    assert (x == 0) == (p == 0 and q == 0)
    assert bool(x) == (x.sign() != 0)
