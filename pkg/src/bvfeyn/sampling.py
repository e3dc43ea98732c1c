"""Seeded random models and elements for property checks."""
from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations, combinations_with_replacement

from .complex import ModelSpec, ValidatedModel, distinct_permutations, invert_matrix, validate_model
from .errors import SingularMatrix
from .series import GradedElement, Monomial


def random_rational(rng: random.Random, span: int = 3, max_den: int = 3) -> Fraction:
    return Fraction(rng.randint(-span, span), rng.randint(1, max_den))


def random_symmetric_invertible(rng: random.Random, n: int):
    while True:
        a = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                a[i][j] = a[j][i] = random_rational(rng)
        try:
            invert_matrix(a)
        except SingularMatrix:
            continue
        return a


def random_model(rng: random.Random, n: int, max_b_degree: int = 4, density: float = 0.5,
                 free: bool = False) -> ValidatedModel:
    a = random_symmetric_invertible(rng, n)
    b = {}
    if not free:
        for m in range(3, max_b_degree + 1):
            tensor = {}
            for key in combinations_with_replacement(range(n), m):
                if rng.random() < density:
                    v = random_rational(rng, 2, 2)
                    for p in distinct_permutations(key):
                        tensor[p] = v
            b[m] = tensor
    return validate_model(ModelSpec(n, a, b, "random"))


def random_monomial_exponents(rng: random.Random, n: int, degree: int) -> tuple[int, ...]:
    alpha = [0] * n
    for _ in range(degree):
        alpha[rng.randrange(n)] += 1
    return tuple(alpha)


def random_element(rng: random.Random, n: int, degree: int, terms: int = 4,
                   max_x_degree: int = 3, max_hbar: int = 1) -> GradedElement:
    """Homogeneous element of homological degree ``degree``."""
    words = list(combinations(range(n), degree))
    out = {}
    for _ in range(terms):
        mono = Monomial(random_monomial_exponents(rng, n, rng.randint(0, max_x_degree)),
                        rng.choice(words), rng.randint(0, max_hbar))
        out[mono] = out.get(mono, 0) + random_rational(rng)
    return GradedElement(out, n)


def random_polynomial_element(rng: random.Random, n: int, terms: int = 5,
                              max_x_degree: int = 3, max_hbar: int = 1) -> GradedElement:
    """Inhomogeneous element mixing every homological degree."""
    out = GradedElement.zero(n)
    for _ in range(terms):
        out = out + random_element(rng, n, rng.randint(0, n), 1, max_x_degree, max_hbar)
    return out
