import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bvfeyn.errors import TruncationMismatch
from bvfeyn.sampling import random_element
from bvfeyn.series import (GradedElement, HbarSeries, Monomial, TruncationPolicy, format_series,
                           partial_x, partial_xi, truncate)

X1, X2 = GradedElement.x(0, 2), GradedElement.x(1, 2)
XI1, XI2 = GradedElement.xi(0, 2), GradedElement.xi(1, 2)
H2 = GradedElement.hbar(2)
x, xi, hbar = GradedElement.x(0, 1), GradedElement.xi(0, 1), GradedElement.hbar(1)


def elements(n=2, degree=None):
    def build(seed, d):
        return random_element(random.Random(seed), n, d if degree is None else degree)
    return st.builds(build, st.integers(0, 10 ** 6), st.integers(0, n))


def test_addition_examples():
    assert (X1 + (-X1)).is_zero()
    assert len(X1 + X2) == 2
    half = x * x * Fraction(1, 2)
    assert (half + hbar) + half == x * x + hbar


def test_multiplication_examples():
    assert XI1 * XI2 == GradedElement({Monomial((0, 0), (0, 1), 0): 1}, 2)
    assert XI2 * XI1 == -(XI1 * XI2)
    assert (XI1 * XI1).is_zero()
    assert (x + hbar) * (x - hbar) == x * x - hbar * hbar


def test_partial_x_examples():
    assert partial_x(0, x ** 3) == 3 * x * x
    assert partial_x(0, X2 * XI1).is_zero()
    assert partial_x(0, x * xi) == xi


def test_partial_xi_sign_rule():
    p = XI1 * XI2
    assert partial_xi(0, p) == XI2
    assert partial_xi(1, p) == -XI1
    assert partial_xi(0, partial_xi(1, p)) == GradedElement.const(-1, 2)
    assert partial_xi(1, partial_xi(0, p)) == GradedElement.const(1, 2)
    assert partial_xi(0, X1 * X1).is_zero()


def test_truncation_examples():
    pol = TruncationPolicy(2)
    assert truncate(x ** 5, pol).is_zero()
    assert truncate(hbar ** 3, pol).is_zero()
    assert truncate(x * x + hbar * x ** 4, pol) == x * x


def test_mixing_policies_raises():
    a = truncate(x, TruncationPolicy(2))
    b = truncate(x, TruncationPolicy(3))
    with pytest.raises(TruncationMismatch):
        a + b
    # an untruncated operand adopts the policy, so x^5 is dropped
    assert a + x ** 5 == a
    assert (a + x ** 5).policy == a.policy


@settings(max_examples=60, deadline=None)
@given(elements(), elements())
def test_graded_commutativity(p, q):
    if not (p.is_homogeneous() and q.is_homogeneous()) or p.is_zero() or q.is_zero():
        return
    sign = -1 if p.degree() * q.degree() % 2 else 1
    assert p * q == (q * p).scale(sign)


@settings(max_examples=40, deadline=None)
@given(elements(3), elements(3), elements(3))
def test_associativity_and_distributivity(p, q, r):
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r


@settings(max_examples=60, deadline=None)
@given(elements(3), st.integers(0, 2), st.integers(0, 2))
def test_xi_derivatives_anticommute(p, i, j):
    assert partial_xi(i, partial_xi(j, p)) == -partial_xi(j, partial_xi(i, p))


@settings(max_examples=60, deadline=None)
@given(elements(3), elements(3), st.integers(0, 2))
def test_leibniz_rules(p, q, i):
    assert partial_x(i, p * q) == partial_x(i, p) * q + p * partial_x(i, q)
    if p.is_homogeneous() and not p.is_zero():
        sign = -1 if p.degree() % 2 else 1
        assert partial_xi(i, p * q) == partial_xi(i, p) * q + (p * partial_xi(i, q)).scale(sign)


@settings(max_examples=60, deadline=None)
@given(elements(2), elements(2), st.integers(0, 4))
def test_truncation_idempotent_and_multiplicative(p, q, k):
    pol = TruncationPolicy(k)
    tp = truncate(p, pol)
    assert truncate(tp, pol) == tp
    assert truncate(p * q, pol) == tp * truncate(q, pol)


def test_hbar_series_arithmetic():
    s = HbarSeries((Fraction(1), Fraction(1, 2), Fraction(0)))
    assert (s * s)[1] == 1 and (s * s)[2] == Fraction(1, 4)
    assert ((s * s) / s).agrees_with(s)
    assert s.derivative().coefficients[:2] == (Fraction(1, 2), 0)
    assert s.shift(1)[1] == 1
    with pytest.raises(ZeroDivisionError):
        s / HbarSeries((Fraction(0), Fraction(1)))


def test_series_formatting():
    assert format_series(HbarSeries.from_dict({1: 1, 2: Fraction(5, 4)}, 2)) == "ħ + 5/4 ħ²"
    assert format_series(HbarSeries.zero(3)) == "0"
    assert format_series(HbarSeries.from_dict({0: 1, 3: Fraction(-1, 2)}, 3)) == "1 - 1/2 ħ³"


def test_first_mismatch():
    a = HbarSeries.from_dict({0: 1, 2: 3}, 3)
    b = HbarSeries.from_dict({0: 1, 2: 4}, 3)
    assert a.first_mismatch(b) == 2
    assert a.first_mismatch(a) is None
