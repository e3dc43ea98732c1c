"""Plain-text model files and observable specifications.

Model file, one directive per line, ``#`` starts a comment::

    label cubic: b = x^3/6
    dimension 1
    a 1
    b 3 1 1 1 = 1

``a`` appears once per matrix row.  ``b m i_1 .. i_m = c`` sets the entry
b^(m)_{i_1..i_m} = c (1-based indices) and, by symmetry, every permutation of
it.  Rationals are written ``p`` or ``p/q``; decimals are rejected.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .complex import (MarkedTensor, ModelSpec, ValidatedModel, distinct_permutations,
                      validate_model)
from .errors import AsymmetricTensor, ParseError
from .series import GradedElement, Monomial, format_rational

_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")


def parse_rational(text: str, line: int | None = None) -> Fraction:
    text = text.strip()
    if not _RATIONAL.match(text):
        raise ParseError(f"{text!r} is not an exact rational (use p or p/q)", line)
    value = Fraction(text)
    return value


def parse_model(text: str) -> ModelSpec:
    label = ""
    dimension = None
    rows: list[tuple[Fraction, ...]] = []
    b: dict[int, dict[tuple[int, ...], Fraction]] = {}
    seen: dict[tuple[int, tuple[int, ...]], tuple[Fraction, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "label":
            label = rest
        elif head == "dimension":
            if dimension is not None:
                raise ParseError("dimension given twice", lineno)
            if not rest.isdigit() or int(rest) < 1:
                raise ParseError(f"dimension must be a positive integer, got {rest!r}", lineno)
            dimension = int(rest)
        elif head == "a":
            if dimension is None:
                raise ParseError("'a' row before 'dimension'", lineno)
            row = tuple(parse_rational(t, lineno) for t in rest.split())
            if len(row) != dimension:
                raise ParseError(f"'a' row has {len(row)} entries, expected {dimension}", lineno)
            rows.append(row)
            if len(rows) > dimension:
                raise ParseError(f"more than {dimension} 'a' rows", lineno)
        elif head == "b":
            if dimension is None:
                raise ParseError("'b' entry before 'dimension'", lineno)
            lhs, eq, coef = rest.partition("=")
            if not eq:
                raise ParseError("'b' entry needs '= coefficient'", lineno)
            fields = lhs.split()
            if not fields or not all(f.isdigit() for f in fields):
                raise ParseError("'b' entry must be 'b m i_1 ... i_m = c'", lineno)
            m, idx = int(fields[0]), tuple(int(f) - 1 for f in fields[1:])
            if len(idx) != m:
                raise ParseError(f"b^({m}) entry has {len(idx)} indices", lineno)
            if any(not 0 <= i < dimension for i in idx):
                raise ParseError(f"index out of range 1..{dimension}", lineno)
            value = parse_rational(coef, lineno)
            key = (m, tuple(sorted(idx)))
            if key in seen:
                prior, where = seen[key]
                if prior != value:
                    raise AsymmetricTensor(
                        f"line {lineno}: b^({m}) entry conflicts with line {where} "
                        f"for a permutation of the same indices")
                raise ParseError(f"duplicate b^({m}) entry (first given on line {where})", lineno)
            seen[key] = (value, lineno)
            tensor = b.setdefault(m, {})
            for p in distinct_permutations(idx):
                tensor[p] = value
        else:
            raise ParseError(f"unknown directive {head!r}", lineno)
    if dimension is None:
        raise ParseError("missing 'dimension'")
    if len(rows) != dimension:
        raise ParseError(f"expected {dimension} 'a' rows, found {len(rows)}")
    return ModelSpec(dimension, tuple(rows), b, label)


def load_model(path) -> ValidatedModel:
    return validate_model(parse_model(Path(path).read_text()))


def write_model(model: ValidatedModel) -> str:
    lines = []
    if model.label:
        lines.append(f"label {model.label}")
    lines.append(f"dimension {model.dimension}")
    for row in model.a:
        lines.append("a " + " ".join(format_rational(v) for v in row))
    for m in sorted(model.b):
        for idx, v in sorted(model.b[m].items()):
            lines.append(f"b {m} " + " ".join(str(i + 1) for i in idx) + f" = {format_rational(v)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Observable:
    """A parsed observable: its polynomial and one marked tensor per x-degree."""

    text: str
    polynomial: GradedElement
    tensors: tuple[MarkedTensor, ...]


_FACTOR = re.compile(r"^x(\d*)(?:\^(\d+))?$")


def parse_observable(text: str, dimension: int) -> Observable:
    """``x1^2 x3`` (whitespace- or ``*``-separated factors) or
    ``tensor: 1,2 = 1/2; 2,1 = 1/2`` (entries of f, 1-based)."""
    spec = text.strip()
    if spec.startswith("tensor:"):
        tensor = _parse_tensor(spec[len("tensor:"):], dimension)
        return Observable(text, tensor.polynomial(dimension), (tensor,))
    alpha = [0] * dimension
    tokens = spec.replace("*", " ").split()
    if not tokens:
        raise ParseError("empty observable")
    for tok in tokens:
        if tok == "1":
            continue
        m = _FACTOR.match(tok)
        if not m:
            raise ParseError(f"cannot parse factor {tok!r}; expected xI^E")
        if m.group(1):
            i = int(m.group(1)) - 1
        elif dimension == 1:
            i = 0
        else:
            raise ParseError(f"factor {tok!r} needs an index when N > 1")
        if not 0 <= i < dimension:
            raise ParseError(f"variable index {i + 1} out of range 1..{dimension}")
        alpha[i] += int(m.group(2) or 1)
    poly = GradedElement({Monomial(tuple(alpha), (), 0): Fraction(1)}, dimension)
    return Observable(text, poly, (MarkedTensor.from_polynomial(poly, sum(alpha)),))


def _parse_tensor(body: str, dimension: int) -> MarkedTensor:
    entries: dict[tuple[int, ...], Fraction] = {}
    arity = None
    for record in filter(None, (r.strip() for r in body.split(";"))):
        lhs, eq, coef = record.partition("=")
        if not eq:
            raise ParseError(f"tensor record {record!r} needs '= coefficient'")
        idx = tuple(int(t) - 1 for t in lhs.replace(",", " ").split())
        if any(not 0 <= i < dimension for i in idx):
            raise ParseError(f"tensor index in {record!r} out of range 1..{dimension}")
        if arity is None:
            arity = len(idx)
        elif arity != len(idx):
            raise ParseError("tensor records have different lengths")
        if idx in entries:
            raise ParseError(f"duplicate tensor entry {record!r}")
        entries[idx] = parse_rational(coef)
    if arity is None:
        raise ParseError("tensor observable has no entries")
    return MarkedTensor(arity, entries)
