"""Closed forms and brute-force sums that check the reduction and diagram engines.

Nothing here goes through the differential Q or through diagram enumeration:
Gaussian moments come from summing over perfect matchings, and the
interacting expectation from expanding exp(b/hbar) against them.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterator, Sequence

from .complex import MarkedTensor, ValidatedModel
from .errors import TooLarge
from .series import GradedElement, HbarSeries

MAX_MATCHING_POINTS = 16


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def wick_univariate(degree: int, a, order: int | None = None) -> HbarSeries:
    """<x^degree> for N=1, b=0: (hbar/a)^n (2n-1)!! when degree = 2n, else 0."""
    a = Fraction(a)
    if a == 0:
        raise ZeroDivisionError("a must be nonzero")
    half = degree // 2
    if order is None:
        order = half
    if degree % 2:
        return HbarSeries.zero(order)
    return HbarSeries.monomial(Fraction(double_factorial(2 * half - 1)) / a ** half, half, order)


def perfect_matchings(points: Sequence) -> Iterator[list[tuple]]:
    """Every perfect matching of ``points`` (pairs the first point with each other one)."""
    if not points:
        yield []
        return
    first, rest = points[0], points[1:]
    for k in range(len(rest)):
        for m in perfect_matchings(rest[:k] + rest[k + 1:]):
            yield [(first, rest[k])] + m


def wick_multivariate(indices: Sequence[int], a_inv) -> tuple[Fraction, int]:
    """Sum over perfect matchings of prod (a^-1)_{i_p i_q}; returns (coefficient, hbar power).

    Matchings are summed recursively over the partner of the first point; the
    partial sums are memoised on the multiset of remaining indices, which is
    all the recursion depends on.
    """
    if len(indices) > MAX_MATCHING_POINTS:
        raise TooLarge(f"{len(indices)} points exceeds the matching cap of {MAX_MATCHING_POINTS}")
    if len(indices) % 2:
        return Fraction(0), len(indices) // 2
    a_inv = tuple(tuple(Fraction(v) for v in row) for row in a_inv)
    return _pairing_sum(tuple(sorted(indices)), a_inv), len(indices) // 2


@lru_cache(maxsize=200_000)
def _pairing_sum(idx: tuple[int, ...], a_inv) -> Fraction:
    if not idx:
        return Fraction(1)
    first, rest = idx[0], idx[1:]
    total = Fraction(0)
    for k in range(len(rest)):
        w = a_inv[first][rest[k]]
        if w:
            total += w * _pairing_sum(rest[:k] + rest[k + 1:], a_inv)
    return total


def gaussian_moment(alpha: Sequence[int], a_inv) -> tuple[Fraction, int]:
    """<x^alpha>_0 as (coefficient, hbar power) for the free theory with covariance hbar a^-1."""
    indices = [i for i, e in enumerate(alpha) for _ in range(e)]
    return wick_multivariate(indices, a_inv)


# polynomials in x as {exponent tuple: Fraction}; kept local so the oracle shares
# no arithmetic with the reduction engine beyond Fraction itself

def _poly_mul(p, q, max_degree):
    out = {}
    for e1, c1 in p.items():
        d1 = sum(e1)
        for e2, c2 in q.items():
            if d1 + sum(e2) > max_degree:
                continue
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
    return {e: c for e, c in out.items() if c}


def _interaction_polynomial(model: ValidatedModel):
    out = {}
    n = model.dimension
    for m, tensor in model.b_full.items():
        for idx, v in tensor.items():
            e = [0] * n
            for i in idx:
                e[i] += 1
            e = tuple(e)
            out[e] = out.get(e, 0) + v / factorial(m)
    return {e: c for e, c in out.items() if c}


def _weighted_moments(model, f_poly, order, min_order):
    """Coefficients of <f exp(b/hbar)>_0 through hbar^order.

    A term f_alpha * (product of k interaction monomials)/(k! hbar^k) of total
    degree D contributes at hbar^(D/2 - k) >= (deg f_alpha)/2 + k/2.
    """
    n = model.dimension
    b = _interaction_polynomial(model)
    coeffs = {}
    if not f_poly:
        return coeffs
    fmin = min(sum(e) for e in f_poly)
    kmax = max(0, 2 * order - fmin)
    power = {(0,) * n: Fraction(1)}  # b^k / k!
    for k in range(kmax + 1):
        if k:
            power = {e: c / k for e, c in _poly_mul(power, b, 2 * (order + k) - fmin).items()}
            if not power:
                break
        for ef, cf in f_poly.items():
            cap = 2 * (order + k) - sum(ef)
            for eb, cb in power.items():
                if sum(eb) > cap:
                    continue
                alpha = tuple(p + q for p, q in zip(ef, eb))
                deg = sum(alpha)
                if deg % 2:
                    continue
                net = deg // 2 - k
                if net > order or net < min_order:
                    continue
                c, _ = gaussian_moment(alpha, model.a_inv)
                if c:
                    coeffs[net] = coeffs.get(net, 0) + cf * cb * c
    return coeffs


def gaussian_perturbation_expectation(model: ValidatedModel, f, order: int) -> HbarSeries:
    """<f> = <f exp(b/hbar)>_0 / <exp(b/hbar)>_0 mod hbar^(order+1).

    ``f`` is a MarkedTensor or an xi-free, hbar-free polynomial GradedElement.
    """
    n = model.dimension
    if isinstance(f, MarkedTensor):
        f.check_range(n)
        f = f.polynomial(n)
    f_poly: dict[tuple[int, ...], Fraction] = {}
    constant = Fraction(0)
    for m, c in f.terms.items():
        if m.xi or m.hbar:
            raise ValueError("the Gaussian oracle takes polynomials in x only")
        if any(m.x):
            f_poly[m.x] = c
        else:
            constant = c
    result = HbarSeries.monomial(constant, 0, order)
    if not f_poly:
        return result
    # the x-dependent part starts at hbar^1, so the denominator is needed one order lower
    num = HbarSeries.from_dict(_weighted_moments(model, f_poly, order, 1), order)
    den_coeffs = _weighted_moments(model, {(0,) * n: Fraction(1)}, order - 1, 0)
    den = HbarSeries.from_dict(den_coeffs, order)
    return result + num / den


def d_series(n: int, order: int) -> HbarSeries:
    """d_n = 12^n sum_{k >= ceil(n/2)} (hbar/288)^k (6k-2n)! / ((3k-n)! (2k-n)!)."""
    coeffs = {}
    for k in range((n + 1) // 2, order + 1):
        coeffs[k] = Fraction(12 ** n * factorial(6 * k - 2 * n),
                             288 ** k * factorial(3 * k - n) * factorial(2 * k - n))
    return HbarSeries.from_dict(coeffs, order)


def c_from_d(n: int, order: int) -> HbarSeries:
    return d_series(n, order) / d_series(0, order)


def recursion_check(c: Sequence[HbarSeries], order: int, a=None) -> bool:
    """Check c_{n+1} = c_{n+2}/2 + hbar n c_{n-1} (cubic model, a = 1, b = x^3/6).

    With ``a`` given, check the free recursion c_{n+1} = (hbar/a) n c_{n-1}
    instead.  Coefficients are compared through hbar^order.
    """
    return first_recursion_failure(c, order, a) is None


def first_recursion_failure(c: Sequence[HbarSeries], order: int, a=None):
    """(n, hbar power) of the first violated relation, or None."""
    zero = HbarSeries.zero(order)
    for n in range(len(c) - 1):
        lhs = c[n + 1]
        prev = c[n - 1].shift(1) * n if n >= 1 else zero
        if a is None:
            if n + 2 >= len(c):
                break
            rhs = c[n + 2] * Fraction(1, 2) + prev
        else:
            rhs = prev / Fraction(a)
        k = lhs.truncate(order).first_mismatch(rhs.truncate(order))
        if k is not None:
            return n, k
    return None


def polynomial_from_indices(indices: Sequence[int], nvars: int) -> GradedElement:
    out = GradedElement.const(1, nvars)
    for i in indices:
        out = out * GradedElement.x(i, nvars)
    return out


def successive_ratios(s: HbarSeries) -> list[Fraction]:
    """c_{k+1}/c_k over the window where both coefficients are nonzero."""
    c = s.coefficients
    return [c[k + 1] / c[k] for k in range(len(c) - 1) if c[k] and c[k + 1]]


def ratios_increasing(s: HbarSeries) -> bool:
    """Finite-window stand-in for a divergent series: strictly increasing ratios."""
    r = successive_ratios(s)
    return all(p < q for p, q in zip(r, r[1:]))
