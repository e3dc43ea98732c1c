import random
from fractions import Fraction

import pytest

from bvfeyn.complex import MarkedTensor, ModelSpec, reduce_expectation, validate_model
from bvfeyn.errors import TooLarge
from bvfeyn.oracles import (c_from_d, d_series, double_factorial,
                            gaussian_perturbation_expectation, perfect_matchings, ratios_increasing,
                            recursion_check, wick_multivariate, wick_univariate)
from bvfeyn.sampling import random_model, random_monomial_exponents
from bvfeyn.series import GradedElement, HbarSeries

F = Fraction
CUBIC = validate_model(ModelSpec(1, ((1,),), {3: {(0, 0, 0): 1}}))
QUARTIC = validate_model(ModelSpec(1, ((1,),), {4: {(0,) * 4: 1}}))
x = GradedElement.x(0, 1)


def series(*coeffs):
    return HbarSeries(tuple(F(c) for c in coeffs))


def test_wick_univariate_examples():
    assert wick_univariate(2, 1) == series(0, 1)
    assert wick_univariate(6, 1) == series(0, 0, 0, 15)
    assert wick_univariate(5, 1, 4).is_zero()
    assert wick_univariate(4, F(-3, 2)) == series(0, 0, F(4, 3))


def test_matchings_count():
    for k in range(1, 6):
        assert sum(1 for _ in perfect_matchings(list(range(2 * k)))) == double_factorial(2 * k - 1)


def test_wick_multivariate_examples():
    one = ((1,),)
    ident = ((1, 0), (0, 1))
    assert wick_multivariate([0, 0], one) == (1, 1)
    assert wick_multivariate([0, 1], ident) == (0, 1)
    assert wick_multivariate([0, 0, 1, 1], ident) == (1, 2)
    with pytest.raises(TooLarge):
        wick_multivariate([0] * 18, one)


def test_memoized_pairing_sum_matches_literal_enumeration():
    rng = random.Random(9)
    for _ in range(20):
        model = random_model(rng, 3, free=True)
        idx = [rng.randrange(3) for _ in range(2 * rng.randint(1, 4))]
        literal = sum((_prod(model.a_inv[idx[p]][idx[q]] for p, q in m)
                       for m in perfect_matchings(list(range(len(idx))))), F(0))
        assert wick_multivariate(idx, model.a_inv)[0] == literal


def _prod(values):
    out = F(1)
    for v in values:
        out *= v
    return out


def test_gaussian_oracle_examples():
    assert gaussian_perturbation_expectation(CUBIC, x * x, 2) == series(0, 1, F(5, 4))
    assert gaussian_perturbation_expectation(QUARTIC, x * x, 2) == series(0, 1, F(1, 2))
    assert gaussian_perturbation_expectation(CUBIC, GradedElement.const(1, 1), 3) == series(1, 0, 0, 0)
    assert gaussian_perturbation_expectation(CUBIC, MarkedTensor(1, {(0,): 1}), 1) == series(0, F(1, 2))


def test_gaussian_oracle_matches_reduction():
    rng = random.Random(21)
    for _ in range(6):
        n = rng.randint(1, 2)
        model = random_model(rng, n)
        alpha = random_monomial_exponents(rng, n, rng.randint(0, 3))
        f = GradedElement.const(1, n)
        for i, e in enumerate(alpha):
            f = f * GradedElement.x(i, n, e)
        assert gaussian_perturbation_expectation(model, f, 2) == reduce_expectation(model, f, 2)


def test_d_series_examples():
    assert d_series(0, 1) == series(1, F(5, 24))
    assert d_series(0, 6)[1] == F(5, 24)
    # k = 1 term of d_2 is 12^2 (1/288) 2!/(1! 0!) = 1
    assert d_series(2, 1) == series(0, 1)


def test_c_from_d_examples():
    assert c_from_d(0, 3) == series(1, 0, 0, 0)
    assert c_from_d(2, 2) == series(0, 1, F(5, 4))
    assert c_from_d(1, 1) == series(0, F(1, 2))
    for n in range(5):
        assert c_from_d(n, 4) == reduce_expectation(CUBIC, x ** n, 4)


def test_d1_relation_that_holds():
    """d_1 = 3 hbar^2 d_0' + (hbar/2) d_0 through hbar^6."""
    d0, d1 = d_series(0, 7), d_series(1, 6)
    rhs = d0.derivative().shift(2) * 3 + d0.shift(1) * F(1, 2)
    assert d1 == rhs.truncate(6)


def test_recursions():
    c = [reduce_expectation(CUBIC, x ** n, 4) for n in range(8)]
    assert recursion_check(c, 4)
    assert recursion_check([c_from_d(n, 4) for n in range(8)], 4)
    a = F(-3, 2)
    free = validate_model(ModelSpec(1, ((a,),), {}))
    assert recursion_check([reduce_expectation(free, x ** n, 5) for n in range(10)], 5, a=a)
    bad = list(c)
    bad[3] = bad[3] + series(0, 0, 0, 0, 1)
    assert not recursion_check(bad, 4)


def test_d0_coefficient_growth_window():
    assert ratios_increasing(d_series(0, 8))
