"""Exact graded-commutative polynomial arithmetic in x, xi and hbar.

Elements live in Q[x_1..x_N, xi_1..xi_N, hbar] where the x's and hbar are
even and the xi's are odd.  Indices are 0-based throughout the library.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, NamedTuple

from .errors import TruncationMismatch


class Monomial(NamedTuple):
    """x^alpha * xi_S * hbar^j with S stored as a strictly increasing tuple."""

    x: tuple[int, ...]
    xi: tuple[int, ...]
    hbar: int

    @property
    def degree(self) -> int:
        return len(self.xi)

    @property
    def x_degree(self) -> int:
        return sum(self.x)


def _merge_xi(s: tuple[int, ...], t: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """Concatenate two sorted xi-words, returning (sign, sorted word) or (0, ())."""
    if not s:
        return 1, t
    if not t:
        return 1, s
    if set(s) & set(t):
        return 0, ()
    # number of inversions of s+t = pairs (p in s, q in t) with p > q
    inversions = 0
    k = 0
    for q in t:
        while k < len(s) and s[k] < q:
            k += 1
        inversions += len(s) - k
    return (-1 if inversions % 2 else 1), tuple(sorted(s + t))


@dataclass(frozen=True)
class TruncationPolicy:
    """Keep hbar^j x^alpha iff j + ceil(|alpha| / 2) <= max_order."""

    max_order: int

    def __post_init__(self):
        if self.max_order < 0:
            raise ValueError("max_order must be nonnegative")

    def keeps(self, mono: Monomial) -> bool:
        return mono.hbar + (mono.x_degree + 1) // 2 <= self.max_order


def _combine_policies(p, q):
    if p is None:
        return q
    if q is None or p == q:
        return p
    raise TruncationMismatch(f"cannot combine elements truncated at {p} and {q}")


class GradedElement:
    """Finite linear combination of monomials with Fraction coefficients.

    Instances are immutable; every operation returns a new canonical element.
    """

    __slots__ = ("_terms", "_nvars", "_policy", "_hash")

    def __init__(self, terms: Mapping[Monomial, Fraction] | Iterable = (), nvars: int = 1,
                 policy: TruncationPolicy | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict[Monomial, Fraction] = {}
        for mono, c in items:
            mono = Monomial(*mono)
            if len(mono.x) != nvars:
                raise ValueError(f"monomial {mono} does not have {nvars} x-exponents")
            if any(i < 0 or i >= nvars for i in mono.xi) or list(mono.xi) != sorted(set(mono.xi)):
                raise ValueError(f"xi word {mono.xi} is not strictly increasing in range")
            if policy is not None and not policy.keeps(mono):
                continue
            c = clean.get(mono, 0) + Fraction(c)
            if c:
                clean[mono] = c
            else:
                clean.pop(mono, None)
        self._terms = clean
        self._nvars = nvars
        self._policy = policy
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, nvars: int, policy) -> GradedElement:
        # trusted constructor: terms already canonical and nonzero
        obj = cls.__new__(cls)
        if policy is not None:
            terms = {m: c for m, c in terms.items() if policy.keeps(m)}
        obj._terms = terms
        obj._nvars = nvars
        obj._policy = policy
        obj._hash = None
        return obj

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> GradedElement:
        return cls._raw({}, nvars, None)

    @classmethod
    def const(cls, c, nvars: int) -> GradedElement:
        c = Fraction(c)
        return cls._raw({Monomial((0,) * nvars, (), 0): c} if c else {}, nvars, None)

    @classmethod
    def x(cls, i: int, nvars: int, power: int = 1) -> GradedElement:
        _check_index(i, nvars)
        alpha = [0] * nvars
        alpha[i] = power
        return cls._raw({Monomial(tuple(alpha), (), 0): Fraction(1)}, nvars, None)

    @classmethod
    def xi(cls, i: int, nvars: int) -> GradedElement:
        _check_index(i, nvars)
        return cls._raw({Monomial((0,) * nvars, (i,), 0): Fraction(1)}, nvars, None)

    @classmethod
    def hbar(cls, nvars: int, power: int = 1) -> GradedElement:
        return cls._raw({Monomial((0,) * nvars, (), power): Fraction(1)}, nvars, None)

    # accessors ----------------------------------------------------------
    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return dict(self._terms)

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def policy(self) -> TruncationPolicy | None:
        return self._policy

    def __iter__(self) -> Iterator[tuple[Monomial, Fraction]]:
        return iter(sorted(self._terms.items()))

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degrees(self) -> set[int]:
        return {m.degree for m in self._terms}

    def degree(self) -> int:
        """Homological degree of a homogeneous element (0 for the zero element)."""
        ds = self.degrees()
        if len(ds) > 1:
            raise ValueError("element is not homogeneous")
        return ds.pop() if ds else 0

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def constant_series(self):
        """hbar-coefficients of the x- and xi-free part, as a dict power -> coefficient."""
        out = {}
        for m, c in self._terms.items():
            if not m.xi and not any(m.x):
                out[m.hbar] = c
        return out

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, GradedElement):
            if other._nvars != self._nvars:
                raise ValueError("elements have different numbers of variables")
            return other
        if isinstance(other, (int, Fraction)):
            return GradedElement.const(other, self._nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        policy = _combine_policies(self._policy, other._policy)
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                del out[m]
        return GradedElement._raw(out, self._nvars, policy)

    __radd__ = __add__

    def __neg__(self):
        return GradedElement._raw({m: -c for m, c in self._terms.items()}, self._nvars, self._policy)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> GradedElement:
        c = Fraction(c)
        if not c:
            return GradedElement._raw({}, self._nvars, self._policy)
        return GradedElement._raw({m: c * v for m, v in self._terms.items()}, self._nvars, self._policy)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        policy = _combine_policies(self._policy, other._policy)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                sign, word = _merge_xi(m1.xi, m2.xi)
                if not sign:
                    continue
                m = Monomial(tuple(p + q for p, q in zip(m1.x, m2.x)), word, m1.hbar + m2.hbar)
                if policy is not None and not policy.keeps(m):
                    continue
                s = out.get(m, 0) + sign * c1 * c2
                if s:
                    out[m] = s
                else:
                    del out[m]
        return GradedElement._raw(out, self._nvars, policy)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = GradedElement.const(1, self._nvars)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GradedElement.const(other, self._nvars)
        if not isinstance(other, GradedElement):
            return NotImplemented
        return self._nvars == other._nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._nvars, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"GradedElement({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for m, c in sorted(self._terms.items(), key=lambda t: (t[0].hbar, t[0].x_degree, t[0])):
            factors = []
            for i, e in enumerate(m.x):
                if e:
                    factors.append(f"x{i + 1}" + (f"^{e}" if e > 1 else ""))
            factors += [f"xi{i + 1}" for i in m.xi]
            if m.hbar:
                factors.append("hbar" + (f"^{m.hbar}" if m.hbar > 1 else ""))
            body = "*".join(factors)
            if not body:
                parts.append(str(c))
            elif c == 1:
                parts.append(body)
            elif c == -1:
                parts.append("-" + body)
            else:
                parts.append(f"{c}*{body}")
        return " + ".join(parts).replace("+ -", "- ")


def _check_index(i: int, nvars: int):
    if not 0 <= i < nvars:
        raise IndexError(f"variable index {i} out of range for N={nvars}")


def partial_x(i: int, p: GradedElement) -> GradedElement:
    """d/dx_i; even, so no signs."""
    _check_index(i, p.nvars)
    out = {}
    for m, c in p._terms.items():
        e = m.x[i]
        if e:
            alpha = list(m.x)
            alpha[i] -= 1
            out[Monomial(tuple(alpha), m.xi, m.hbar)] = c * e
    return GradedElement._raw(out, p.nvars, p.policy)


def partial_xi(i: int, p: GradedElement) -> GradedElement:
    """Left derivative d/dxi_i: removes xi_i with sign (-1)^(xi factors before it)."""
    _check_index(i, p.nvars)
    out = {}
    for m, c in p._terms.items():
        if i in m.xi:
            pos = m.xi.index(i)
            word = m.xi[:pos] + m.xi[pos + 1:]
            out[Monomial(m.x, word, m.hbar)] = -c if pos % 2 else c
    return GradedElement._raw(out, p.nvars, p.policy)


def truncate(p: GradedElement, policy: TruncationPolicy) -> GradedElement:
    """Drop monomials outside ``policy`` and record it on the result."""
    return GradedElement._raw(dict(p._terms), p.nvars, policy)


@dataclass(frozen=True)
class HbarSeries:
    """Element of Q[[hbar]] modulo hbar^(order+1)."""

    coefficients: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("a series needs at least the hbar^0 coefficient")
        object.__setattr__(self, "coefficients", tuple(Fraction(c) for c in self.coefficients))

    @classmethod
    def from_dict(cls, coeffs: Mapping[int, Fraction], order: int) -> HbarSeries:
        return cls(tuple(coeffs.get(k, Fraction(0)) for k in range(order + 1)))

    @classmethod
    def zero(cls, order: int) -> HbarSeries:
        return cls((Fraction(0),) * (order + 1))

    @classmethod
    def one(cls, order: int) -> HbarSeries:
        return cls.monomial(1, 0, order)

    @classmethod
    def monomial(cls, c, power: int, order: int) -> HbarSeries:
        coeffs = [Fraction(0)] * (order + 1)
        if power <= order:
            coeffs[power] = Fraction(c)
        return cls(tuple(coeffs))

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, k: int) -> Fraction:
        if k < 0:
            raise IndexError(k)
        return self.coefficients[k] if k <= self.order else Fraction(0)

    def __iter__(self):
        return iter(self.coefficients)

    def truncate(self, order: int) -> HbarSeries:
        if order > self.order:
            raise ValueError(f"cannot extend a series known mod hbar^{self.order + 1}")
        return HbarSeries(self.coefficients[:order + 1])

    def is_zero(self) -> bool:
        return not any(self.coefficients)

    def _common(self, other):
        if isinstance(other, (int, Fraction)):
            other = HbarSeries.monomial(other, 0, self.order)
        if not isinstance(other, HbarSeries):
            return None, None
        k = min(self.order, other.order)
        return other, k

    def __add__(self, other):
        other, k = self._common(other)
        if other is None:
            return NotImplemented
        return HbarSeries(tuple(self[i] + other[i] for i in range(k + 1)))

    __radd__ = __add__

    def __neg__(self):
        return HbarSeries(tuple(-c for c in self.coefficients))

    def __sub__(self, other):
        other, k = self._common(other)
        if other is None:
            return NotImplemented
        return HbarSeries(tuple(self[i] - other[i] for i in range(k + 1)))

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return HbarSeries(tuple(c * other for c in self.coefficients))
        other, k = self._common(other)
        if other is None:
            return NotImplemented
        return HbarSeries(tuple(sum((self[i] * other[n - i] for i in range(n + 1)), Fraction(0))
                                for n in range(k + 1)))

    __rmul__ = __mul__

    def shift(self, power: int = 1) -> HbarSeries:
        """Multiply by hbar^power, keeping the same order."""
        return HbarSeries(((Fraction(0),) * power + self.coefficients)[:self.order + 1])

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return HbarSeries(tuple(c / other for c in self.coefficients))
        other, k = self._common(other)
        if other is None:
            return NotImplemented
        if other[0] != 1:
            raise ZeroDivisionError("series division requires a denominator with constant term 1")
        q: list[Fraction] = []
        for n in range(k + 1):
            q.append(self[n] - sum((other[i] * q[n - i] for i in range(1, n + 1)), Fraction(0)))
        return HbarSeries(tuple(q))

    def derivative(self) -> HbarSeries:
        """Formal d/dhbar; the result is known one order lower."""
        if self.order == 0:
            return HbarSeries((Fraction(0),))
        return HbarSeries(tuple(k * self.coefficients[k] for k in range(1, self.order + 1)))

    def first_mismatch(self, other: HbarSeries) -> int | None:
        k = min(self.order, other.order)
        for i in range(k + 1):
            if self[i] != other[i]:
                return i
        return None

    def agrees_with(self, other: HbarSeries, through: int | None = None) -> bool:
        k = min(self.order, other.order) if through is None else through
        return all(self[i] == other[i] for i in range(k + 1))

    def __str__(self):
        return format_series(self)


_SUPERSCRIPT = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def format_rational(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_series(s: HbarSeries, symbol: str = "ħ") -> str:
    """Render lowest power first, e.g. ``ħ + 5/4 ħ²``; zero series renders as ``0``."""
    parts = []
    for k, c in enumerate(s.coefficients):
        if not c:
            continue
        if k == 0:
            body = format_rational(c)
        else:
            power = symbol + (str(k).translate(_SUPERSCRIPT) if k > 1 else "")
            if abs(c) == 1:
                body = ("-" if c < 0 else "") + power
            else:
                body = f"{format_rational(c)} {power}"
        parts.append(body)
    if not parts:
        return "0"
    text = parts[0]
    for p in parts[1:]:
        text += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return text
