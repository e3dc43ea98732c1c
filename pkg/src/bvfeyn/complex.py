"""The BV differential, Delta, the bracket, and expectation by reduction modulo boundaries.

A model is a symmetric invertible matrix ``a`` and an interaction ``b`` given
by its Taylor tensors b^(m), m >= 3, so that

    b(x) = sum_m 1/m! sum_{i_1..i_m} b^(m)_{i_1..i_m} x_{i_1}...x_{i_m}.

Q = sum a_ij x_i d/dxi_j - sum (db/dx_i) d/dxi_i - hbar sum d^2/dx_i dxi_i.
"""
from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Mapping, Sequence

from .errors import (AsymmetricTensor, InternalError, NonScalarInput, QuadraticInteraction,
                     SingularMatrix)
from .series import GradedElement, HbarSeries, Monomial, TruncationPolicy, partial_x, partial_xi

Matrix = tuple[tuple[Fraction, ...], ...]


def distinct_permutations(word: Sequence[int]):
    """Each distinct rearrangement of ``word`` once, in lexicographic order."""
    items = sorted(word)
    n = len(items)
    while True:
        yield tuple(items)
        k = n - 2
        while k >= 0 and items[k] >= items[k + 1]:
            k -= 1
        if k < 0:
            return
        l = n - 1
        while items[l] <= items[k]:
            l -= 1
        items[k], items[l] = items[l], items[k]
        items[k + 1:] = reversed(items[k + 1:])


def count_distinct_permutations(word: Sequence[int]) -> int:
    out = factorial(len(word))
    for c in Counter(word).values():
        out //= factorial(c)
    return out


STEP_BUDGET = 10 ** 8


def invert_matrix(a: Sequence[Sequence]) -> Matrix:
    """Gauss-Jordan inverse over the rationals; raises SingularMatrix."""
    n = len(a)
    m = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise SingularMatrix("quadratic form matrix is not invertible")
        m[col], m[pivot] = m[pivot], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [v - f * w for v, w in zip(m[r], m[col])]
    return tuple(tuple(row[n:]) for row in m)


@dataclass(frozen=True)
class ModelSpec:
    """Raw model data; ``b`` maps order m to {index tuple (0-based): entry}."""

    dimension: int
    a: Sequence[Sequence]
    b: Mapping[int, Mapping[tuple[int, ...], Fraction]] = field(default_factory=dict)
    label: str = ""


@dataclass(frozen=True)
class MarkedTensor:
    """The tensor f carried by the marked vertex: {index tuple: coefficient}."""

    arity: int
    entries: Mapping[tuple[int, ...], Fraction]

    def __post_init__(self):
        clean = {}
        for idx, c in self.entries.items():
            idx = tuple(idx)
            if len(idx) != self.arity:
                raise ValueError(f"index {idx} does not have arity {self.arity}")
            c = Fraction(c)
            if c:
                clean[idx] = clean.get(idx, 0) + c
        object.__setattr__(self, "entries", {k: v for k, v in clean.items() if v})

    @property
    def symmetric(self) -> bool:
        groups: dict[tuple[int, ...], list[Fraction]] = {}
        for idx, c in self.entries.items():
            groups.setdefault(tuple(sorted(idx)), []).append(c)
        return all(len(set(vals)) == 1 and len(vals) == count_distinct_permutations(key)
                   for key, vals in groups.items())

    def check_range(self, n: int):
        for idx in self.entries:
            if any(not 0 <= i < n for i in idx):
                raise IndexError(f"tensor index {idx} out of range for N={n}")

    @classmethod
    def from_polynomial(cls, p: GradedElement, degree: int) -> MarkedTensor:
        """Symmetric tensor whose contraction with x^n is the degree-n part of ``p``."""
        entries: dict[tuple[int, ...], Fraction] = {}
        for m, c in p.terms.items():
            if m.xi or m.hbar:
                raise NonScalarInput("only hbar-free polynomials in x convert to tensors")
            if m.x_degree != degree:
                continue
            word = tuple(i for i, e in enumerate(m.x) for _ in range(e))
            share = c / count_distinct_permutations(word)
            for idx in distinct_permutations(word):
                entries[idx] = entries.get(idx, 0) + share
        return cls(degree, entries)

    def polynomial(self, nvars: int) -> GradedElement:
        terms: dict[Monomial, Fraction] = {}
        for idx, c in self.entries.items():
            alpha = [0] * nvars
            for i in idx:
                alpha[i] += 1
            m = Monomial(tuple(alpha), (), 0)
            terms[m] = terms.get(m, 0) + c
        return GradedElement(terms, nvars)


@dataclass(frozen=True, eq=False)
class ValidatedModel:
    """A checked model with a^-1, the full b-tensors and the gradient of b cached."""

    dimension: int
    a: Matrix
    a_inv: Matrix
    b: Mapping[int, Mapping[tuple[int, ...], Fraction]]  # keyed by sorted index tuples
    label: str = ""
    b_full: Mapping = field(init=False, repr=False)
    b_poly: GradedElement = field(init=False, repr=False)
    grad_b: tuple[GradedElement, ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.dimension
        full = {m: {p: v for idx, v in t.items() for p in distinct_permutations(idx)}
                for m, t in self.b.items()}
        object.__setattr__(self, "b_full", full)
        bpoly = GradedElement.zero(n)
        for m, t in full.items():
            for idx, v in t.items():
                bpoly = bpoly + _x_word(idx, n).scale(v / factorial(m))
        object.__setattr__(self, "b_poly", bpoly)
        grad = []
        for i in range(n):
            g: dict[Monomial, Fraction] = {}
            for m, t in full.items():
                for idx, v in t.items():
                    if idx[0] != i:
                        continue
                    alpha = [0] * n
                    for j in idx[1:]:
                        alpha[j] += 1
                    mono = Monomial(tuple(alpha), (), 0)
                    g[mono] = g.get(mono, 0) + v / factorial(m - 1)
            grad.append(GradedElement(g, n))
        object.__setattr__(self, "grad_b", tuple(grad))

    def _key(self):
        b = tuple(sorted((m, tuple(sorted(t.items()))) for m, t in self.b.items()))
        return self.dimension, self.a, b, self.label

    def __eq__(self, other):
        if not isinstance(other, ValidatedModel):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def interaction_valences(self) -> frozenset[int]:
        return frozenset(m for m, t in self.b.items() if any(t.values()))

    def b_entry(self, idx: tuple[int, ...]) -> Fraction:
        return self.b.get(len(idx), {}).get(tuple(sorted(idx)), Fraction(0))

    def to_spec(self) -> ModelSpec:
        return ModelSpec(self.dimension, self.a, self.b_full, self.label)


def _x_word(idx: Sequence[int], n: int) -> GradedElement:
    alpha = [0] * n
    for i in idx:
        alpha[i] += 1
    return GradedElement._raw({Monomial(tuple(alpha), (), 0): Fraction(1)}, n, None)


def validate_model(spec: ModelSpec) -> ValidatedModel:
    n = spec.dimension
    if n < 1:
        raise ValueError("dimension must be positive")
    a = tuple(tuple(Fraction(v) for v in row) for row in spec.a)
    if len(a) != n or any(len(row) != n for row in a):
        raise ValueError(f"matrix a must be {n}x{n}")
    for i in range(n):
        for j in range(i):
            if a[i][j] != a[j][i]:
                raise AsymmetricTensor(f"matrix a is not symmetric at ({i + 1},{j + 1})")
    a_inv = invert_matrix(a)
    b: dict[int, dict[tuple[int, ...], Fraction]] = {}
    for m, tensor in spec.b.items():
        entries = {tuple(k): Fraction(v) for k, v in tensor.items()}
        if m < 3:
            if any(entries.values()):
                raise QuadraticInteraction(f"interaction has a term of order {m} < 3")
            continue
        sym: dict[tuple[int, ...], Fraction] = {}
        for idx, v in entries.items():
            if len(idx) != m or any(not 0 <= i < n for i in idx):
                raise ValueError(f"b^({m}) index {idx} is malformed")
            key = tuple(sorted(idx))
            if key in sym and sym[key] != v:
                raise AsymmetricTensor(f"b^({m}) differs between permutations of {key}")
            sym[key] = v
        for key, v in sym.items():
            if v and any(entries.get(p, 0) != v for p in distinct_permutations(key)):
                raise AsymmetricTensor(f"b^({m}) is not symmetric at {key}")
        sym = {k: v for k, v in sym.items() if v}
        if sym:
            b[m] = sym
    return ValidatedModel(n, a, a_inv, b, spec.label)


# --- operators -------------------------------------------------------------

def delta(p: GradedElement) -> GradedElement:
    """Delta = sum_i d^2/dx_i dxi_i."""
    out = GradedElement.zero(p.nvars)
    for i in range(p.nvars):
        out = out + partial_x(i, partial_xi(i, p))
    return out


def apply_q(model: ValidatedModel, p: GradedElement) -> GradedElement:
    n = model.dimension
    quadratic = GradedElement.zero(n)
    interaction = GradedElement.zero(n)
    for j in range(n):
        dj = partial_xi(j, p)
        if dj.is_zero():
            continue
        for i in range(n):
            if model.a[i][j]:
                quadratic = quadratic + GradedElement.x(i, n) * dj.scale(model.a[i][j])
        if not model.grad_b[j].is_zero():
            interaction = interaction + model.grad_b[j] * dj
    return quadratic - interaction - GradedElement.hbar(n) * delta(p)


def check_q_squared(model: ValidatedModel, p: GradedElement) -> bool:
    return apply_q(model, apply_q(model, p)).is_zero()


def bracket(f: GradedElement, g: GradedElement) -> GradedElement:
    """{f,g} = Delta(fg) - (Delta f) g - (-1)^|f| f Delta g, extended bilinearly in f."""
    out = GradedElement.zero(f.nvars)
    by_degree: dict[int, dict] = {}
    for m, c in f.terms.items():
        by_degree.setdefault(m.degree, {})[m] = c
    for deg, terms in by_degree.items():
        fh = GradedElement(terms, f.nvars)
        sign = -1 if deg % 2 else 1
        out = out + delta(fh * g) - delta(fh) * g - (fh * delta(g)).scale(sign)
    return out


def action(model: ValidatedModel) -> GradedElement:
    """S = 1/2 sum a_ij x_i x_j - b(x)."""
    n = model.dimension
    s = GradedElement.zero(n)
    for i in range(n):
        for j in range(n):
            if model.a[i][j]:
                s = s + _x_word((i, j), n).scale(model.a[i][j] / 2)
    return s - model.b_poly


def decompose_q(model: ValidatedModel, p: GradedElement) -> tuple[GradedElement, GradedElement]:
    """Return (contraction with dS applied to p, Delta p); Q p = first - hbar * second."""
    s = action(model)
    contraction = GradedElement.zero(p.nvars)
    for i in range(p.nvars):
        contraction = contraction + partial_x(i, s) * partial_xi(i, p)
    return contraction, delta(p)


# --- reduction ---------------------------------------------------------------

def _rewrite_rules(model: ValidatedModel):
    """For each i, the terms of sum_l (a^-1)_il db/dx_l as (coefficient, exponent vector)."""
    n = model.dimension
    rules = []
    for i in range(n):
        acc: dict[tuple[int, ...], Fraction] = {}
        for l in range(n):
            w = model.a_inv[i][l]
            if not w:
                continue
            for mono, c in model.grad_b[l].terms.items():
                acc[mono.x] = acc.get(mono.x, 0) + w * c
        rules.append([(c, e) for e, c in sorted(acc.items()) if c])
    return rules


def _priority(key, strategy):
    alpha, j = key
    if strategy == "lowest":
        return sum(alpha), key
    return -sum(alpha), tuple(-e for e in alpha), -j


class _Agenda:
    """Selects the next non-constant term; a lazy heap for the deterministic strategies."""

    def __init__(self, work, strategy, rng):
        if strategy not in ("lowest", "highest", "random"):
            raise ValueError(f"unknown selection strategy {strategy!r}")
        self.work, self.strategy, self.rng = work, strategy, rng
        self.heap = []
        for key in work:
            self.push(key)

    def push(self, key):
        if self.strategy != "random" and any(key[0]):
            heapq.heappush(self.heap, (_priority(key, self.strategy), key))

    def pop(self):
        if self.strategy == "random":
            candidates = sorted(m for m in self.work if any(m[0]))
            return self.rng.choice(candidates) if candidates else None
        while self.heap:
            _, key = heapq.heappop(self.heap)
            if key in self.work:
                return key
        return None


def reduce_expectation(model: ValidatedModel, f: GradedElement, order: int,
                       strategy: str = "lowest", seed: int | None = None,
                       step_budget: int = STEP_BUDGET) -> HbarSeries:
    """<f> mod hbar^(order+1) by rewriting modulo boundaries until only constants remain.

    The rewrite applied to c*hbar^j*x_i*x^beta (i the smallest variable present) is
    the boundary relation

        x_i x^beta == sum_l (a^-1)_il [ (db/dx_l) x^beta + hbar d(x^beta)/dx_l ].
    """
    if any(m.xi for m in f.terms):
        raise NonScalarInput("expectations are defined only on xi-free elements")
    policy = TruncationPolicy(order)
    rules = _rewrite_rules(model)
    a_inv = model.a_inv
    n = model.dimension
    rng = random.Random(seed)
    # work element keyed by (x exponents, hbar power)
    work: dict[tuple[tuple[int, ...], int], Fraction] = {}
    for m, c in f.terms.items():
        if policy.keeps(m):
            key = (m.x, m.hbar)
            work[key] = work.get(key, 0) + c

    agenda = _Agenda(work, strategy, rng)

    def add(alpha, j, c):
        if j + (sum(alpha) + 1) // 2 > order:
            return
        key = (alpha, j)
        s = work.get(key, 0) + c
        if not s:
            work.pop(key, None)
        elif key in work:
            work[key] = s
        else:
            work[key] = s
            agenda.push(key)

    steps = 0
    while True:
        key = agenda.pop()
        if key is None:
            break
        steps += 1
        if steps > step_budget:
            raise InternalError(f"reduction exceeded {step_budget} steps")
        alpha, j = key
        c = work.pop(key)
        i = next(k for k, e in enumerate(alpha) if e)
        beta = list(alpha)
        beta[i] -= 1
        for w, e in rules[i]:
            add(tuple(p + q for p, q in zip(beta, e)), j, c * w)
        for l in range(n):
            if beta[l] and a_inv[i][l]:
                gamma = list(beta)
                gamma[l] -= 1
                add(tuple(gamma), j + 1, c * a_inv[i][l] * beta[l])
    return HbarSeries.from_dict({j: c for (_, j), c in work.items()}, order)


def expectation_of_boundary(model: ValidatedModel, g: GradedElement, order: int,
                            **kwargs) -> HbarSeries:
    if not g.is_zero() and g.degree() != 1:
        raise ValueError("expected a homogeneous element of degree 1")
    return reduce_expectation(model, apply_q(model, g), order, **kwargs)
