"""Command-line interface: ``bvfeyn expect | list-diagrams | check``."""
from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from itertools import combinations_with_replacement

from .complex import (MarkedTensor, ValidatedModel, apply_q, check_q_squared,
                      reduce_expectation)
from .diagrams import (MAX_BRUTE_FORCE_HALF_EDGES, aut_order_brute_force, diagram_expectation,
                       enumerate_closed_diagrams, evaluate)
from .errors import BVError, TooLarge
from .modelfile import Observable, load_model, parse_observable
from .oracles import (first_recursion_failure, gaussian_perturbation_expectation, wick_multivariate)
from .sampling import random_element, random_polynomial_element
from .series import GradedElement, HbarSeries, format_rational, format_series

METHODS = ("reduce", "diagrams", "oracle")


def _emit(out, record: dict):
    out.write(json.dumps(record, ensure_ascii=False, sort_keys=False) + "\n")


def _coeffs(s: HbarSeries) -> list[str]:
    return [format_rational(c) for c in s.coefficients]


def _diagram_sum(model: ValidatedModel, obs: Observable, order: int) -> HbarSeries:
    total = HbarSeries.zero(order)
    for tensor in obs.tensors:
        total = total + diagram_expectation(model, tensor, order)
    return total


def compute(model: ValidatedModel, obs: Observable, order: int, method: str) -> HbarSeries:
    if method == "reduce":
        return reduce_expectation(model, obs.polynomial, order)
    if method == "diagrams":
        return _diagram_sum(model, obs, order)
    if method == "oracle":
        return gaussian_perturbation_expectation(model, obs.polynomial, order)
    raise ValueError(f"unknown method {method!r}")


def cmd_expect(args, out) -> int:
    model = load_model(args.model)
    obs = parse_observable(args.observable, model.dimension)
    methods = METHODS if args.method == "all" else (args.method,)
    results = {m: compute(model, obs, args.order, m) for m in methods}
    first = results[methods[0]]
    mismatch = None
    for k in range(args.order + 1):
        if len({results[m][k] for m in methods}) > 1:
            mismatch = k
            break
    if args.format == "records":
        for m in methods:
            _emit(out, {"record": "expectation", "observable": obs.text, "method": m,
                        "order": args.order, "coefficients": _coeffs(results[m]),
                        "series": format_series(results[m])})
        if len(methods) > 1:
            _emit(out, {"record": "agreement", "agree": mismatch is None,
                        "first_mismatch": mismatch})
    elif len(methods) == 1:
        out.write(f"⟨f⟩ = {format_series(first)}\n")
    elif mismatch is None:
        out.write(f"⟨f⟩ = {format_series(first)} ; methods agree\n")
    else:
        out.write(f"methods disagree at ħ^{mismatch}:\n")
        for m in methods:
            out.write(f"  {m:8s} {format_series(results[m])}\n")
    return 0 if mismatch is None else 1


def _default_tensor(model: ValidatedModel, n: int) -> MarkedTensor:
    return MarkedTensor(n, {(0,) * n: Fraction(1)})


def cmd_list_diagrams(args, out) -> int:
    model = load_model(args.model)
    if args.observable:
        obs = parse_observable(args.observable, model.dimension)
        if len(obs.tensors) != 1:
            raise BVError("list-diagrams needs a homogeneous observable")
        tensor = obs.tensors[0]
    elif args.legs is not None:
        tensor = _default_tensor(model, args.legs)
    else:
        raise BVError("list-diagrams needs --legs or --observable")
    n, order = tensor.arity, args.order
    classes = enumerate_closed_diagrams(n, model.interaction_valences, order)
    total = HbarSeries.zero(order)
    rows = []
    for idx, cls in enumerate(classes, 1):
        ev = evaluate(model, tensor, cls.diagram).constant_series().get(0, Fraction(0))
        contribution = HbarSeries.monomial(ev / cls.aut, cls.betti, order)
        total = total + contribution
        rows.append((idx, cls, ev, contribution))
    if args.format == "records":
        for idx, cls, ev, contribution in rows:
            rec = {"record": "diagram", "index": idx}
            rec.update(cls.diagram.to_record())
            rec.update({"betti": cls.betti, "aut": cls.aut, "evaluation": format_rational(ev),
                        "contribution": format_series(contribution)})
            _emit(out, rec)
        _emit(out, {"record": "total", "legs": n, "order": order, "diagrams": len(rows),
                    "coefficients": _coeffs(total), "series": format_series(total)})
    else:
        out.write(f"{'#':>4} {'β':>3} {'|Aut|':>6} {'ev':>10}  {'contribution':<16} edges\n")
        for idx, cls, ev, contribution in rows:
            edges = " ".join(f"{cls.diagram.vertex_of[h]}-{cls.diagram.vertex_of[p]}"
                             for h, p in cls.diagram.edges())
            out.write(f"{idx:>4} {cls.betti:>3} {cls.aut:>6} {format_rational(ev):>10}  "
                      f"{format_series(contribution):<16} {edges}\n")
        out.write(f"{len(rows)} diagrams; partial sum = {format_series(total)}\n")
    return 0


class _Report:
    def __init__(self, out):
        self.out = out
        self.failed = 0

    def result(self, name: str, ok: bool, detail: str = ""):
        if not ok:
            self.failed += 1
        self.out.write(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "") + "\n")

    def skip(self, name: str, why: str):
        self.out.write(f"SKIP {name}: {why}\n")


def _is_cubic_reference(model: ValidatedModel) -> bool:
    return (model.dimension == 1 and model.a == ((1,),)
            and model.b == {3: {(0, 0, 0): Fraction(1)}})


def cmd_check(args, out) -> int:
    model = load_model(args.model)
    rng = random.Random(args.seed)
    n_vars, order, nmax = model.dimension, args.order, args.nmax
    report = _Report(out)

    bad = None
    for _ in range(args.samples):
        p = random_polynomial_element(rng, n_vars)
        if not check_q_squared(model, p):
            bad = p
            break
    report.result("Q^2 = 0", bad is None, f"counterexample {bad}" if bad is not None else "")

    bad = None
    for _ in range(args.samples):
        g = random_element(rng, n_vars, 1, terms=3, max_x_degree=3)
        val = reduce_expectation(model, apply_q(model, g), order)
        if not val.is_zero():
            bad = (g, val)
            break
    report.result("<Q g> = 0", bad is None,
                  f"g = {bad[0]} gives {format_series(bad[1])}" if bad else "")

    monomials = [()]
    for d in range(1, nmax + 1):
        monomials += list(combinations_with_replacement(range(n_vars), d))
    disagreements, skipped = [], 0
    for word in monomials:
        text = " ".join(f"x{i + 1}" for i in word) or "1"
        obs = parse_observable(text, n_vars)
        values = {"reduce": compute(model, obs, order, "reduce"),
                  "diagrams": compute(model, obs, order, "diagrams")}
        try:
            values["oracle"] = compute(model, obs, order, "oracle")
        except TooLarge:
            skipped += 1
        if len({tuple(v.coefficients) for v in values.values()}) > 1:
            disagreements.append(f"<{text}>: " + ", ".join(
                f"{k}={format_series(v)}" for k, v in values.items()))
    detail = disagreements[0] if disagreements else f"{len(monomials)} monomials"
    if skipped:
        detail += f" (oracle over its size cap for {skipped})"
    report.result("three-way agreement", not disagreements, detail)

    mismatches, checked = [], 0
    for n in range(nmax + 1):
        for cls in enumerate_closed_diagrams(n, model.interaction_valences, order):
            if cls.diagram.n_half_edges > MAX_BRUTE_FORCE_HALF_EDGES:
                continue
            checked += 1
            brute = aut_order_brute_force(cls.diagram)
            if brute != cls.aut:
                mismatches.append(f"{cls.diagram.to_record()}: orbit {cls.aut}, search {brute}")
    report.result("|Aut| orbit count = direct search", not mismatches,
                  mismatches[0] if mismatches else f"{checked} diagrams")

    x = GradedElement.x(0, n_vars)
    if n_vars == 1 and not model.b:
        a = model.a[0][0]
        c = [reduce_expectation(model, x ** n, order) for n in range(nmax + 3)]
        fail = first_recursion_failure(c, order, a=a)
        report.result("free recursion <x^(n+1)> = (ħ/a) n <x^(n-1)>", fail is None,
                      f"n={fail[0]}, ħ^{fail[1]}" if fail else "")
    elif _is_cubic_reference(model):
        c = [reduce_expectation(model, x ** n, order) for n in range(nmax + 3)]
        fail = first_recursion_failure(c, order)
        report.result("cubic recursion c(n+1) = c(n+2)/2 + ħ n c(n-1)", fail is None,
                      f"n={fail[0]}, ħ^{fail[1]}" if fail else "")
    else:
        report.skip("recursion", "model is neither N=1 with b=0 nor a=1, b=x³/6")

    if not model.b:
        ok = True
        out.write("wick table for x1:\n")
        for k in range(nmax // 2 + 1):
            coeff, power = wick_multivariate([0] * (2 * k), model.a_inv)
            expected = HbarSeries.monomial(coeff, power, order)
            got = reduce_expectation(model, x ** (2 * k), order)
            same = got.agrees_with(expected)
            ok &= same
            out.write(f"  <x1^{2 * k}> = {format_series(got)}"
                      f"{'' if same else '   expected ' + format_series(expected)}\n")
        report.result("Wick table", ok)
    out.write(f"{report.failed} check(s) failed\n")
    return 1 if report.failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bvfeyn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model file")
        p.add_argument("--order", type=int, default=4, help="hbar order K (default 4)")

    p = sub.add_parser("expect", help="compute <f> mod hbar^(K+1)")
    common(p)
    p.add_argument("--observable", required=True, help="e.g. 'x1^2 x2' or 'tensor: 1,2=1'")
    p.add_argument("--method", choices=METHODS + ("all",), default="all")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.set_defaults(func=cmd_expect)

    p = sub.add_parser("list-diagrams", help="closed Feynman diagrams with beta <= K")
    common(p)
    p.add_argument("--legs", type=int, help="marked valence n (tensor f = e_(1,...,1))")
    p.add_argument("--observable", help="homogeneous observable fixing n and f")
    p.add_argument("--format", choices=("table", "records"), default="table")
    p.set_defaults(func=cmd_list_diagrams)

    p = sub.add_parser("check", help="run the invariant and cross-check suite")
    common(p)
    p.add_argument("--nmax", type=int, default=4, help="largest monomial degree checked")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=20, help="random elements per property")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.order < 0:
        print("error: --order must be nonnegative", file=sys.stderr)
        return 2
    try:
        return args.func(args, out)
    except (BVError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
