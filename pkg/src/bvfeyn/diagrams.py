"""Feynman diagrams as half-edge structures: enumeration, symmetry factors, evaluation.

A diagram is a perfect matching ``pairing`` of half-edges 0..H-1 together with
the vertex each half-edge belongs to.  Exactly one vertex is marked; its
half-edges are totally ordered by ``marked_legs``.  Internal vertices carry
b^(m) and need valence >= 3, external vertices are univalent and carry x_i.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial, prod
from typing import Iterable, Iterator, Sequence

from .complex import MarkedTensor, ValidatedModel
from .errors import ArityMismatch, TooLarge
from .series import GradedElement, HbarSeries, Monomial

MARKED, INTERNAL, EXTERNAL = "marked", "internal", "external"
_KIND_RANK = {MARKED: 0, INTERNAL: 2, EXTERNAL: 3}

MAX_BRUTE_FORCE_HALF_EDGES = 16


@dataclass(frozen=True)
class FeynmanDiagram:
    pairing: tuple[int, ...]
    vertex_of: tuple[int, ...]
    marked_legs: tuple[int, ...]
    vertex_kinds: tuple[str, ...]

    def __post_init__(self):
        h = len(self.pairing)
        if len(self.vertex_of) != h:
            raise ValueError("pairing and vertex_of must have the same length")
        for e, p in enumerate(self.pairing):
            if not 0 <= p < h or p == e or self.pairing[p] != e:
                raise ValueError("pairing must be a fixed-point-free involution")
        if any(not 0 <= v < len(self.vertex_kinds) for v in self.vertex_of):
            raise ValueError("vertex_of refers to an unknown vertex")
        if self.vertex_kinds.count(MARKED) != 1:
            raise ValueError("a diagram has exactly one marked vertex")
        if any(k not in _KIND_RANK for k in self.vertex_kinds):
            raise ValueError(f"unknown vertex kind in {self.vertex_kinds}")
        mv = self.marked_vertex
        if sorted(self.marked_legs) != self.half_edges_at(mv):
            raise ValueError("marked_legs must list the marked vertex's half-edges once each")
        for v, kind in enumerate(self.vertex_kinds):
            val = len(self.half_edges_at(v))
            if kind == INTERNAL and val < 3:
                raise ValueError(f"internal vertex {v} has valence {val} < 3")
            if kind == EXTERNAL and val != 1:
                raise ValueError(f"external vertex {v} is not univalent")
        if not self._connected():
            raise ValueError("diagram is not connected")

    @classmethod
    def from_edges(cls, vertex_kinds: Sequence[str], edges: Iterable[tuple[int, int]],
                   marked_order: Sequence[int] | None = None) -> FeynmanDiagram:
        """Build from vertex-level edges; half-edges are numbered edge by edge.

        ``marked_order`` optionally permutes the marked half-edges (by position
        among the marked vertex's half-edges in creation order).
        """
        pairing, vertex_of = [], []
        for u, w in edges:
            h = len(pairing)
            pairing += [h + 1, h]
            vertex_of += [u, w]
        mv = list(vertex_kinds).index(MARKED)
        legs = [h for h, v in enumerate(vertex_of) if v == mv]
        if marked_order is not None:
            legs = [legs[i] for i in marked_order]
        return cls(tuple(pairing), tuple(vertex_of), tuple(legs), tuple(vertex_kinds))

    @property
    def n_half_edges(self) -> int:
        return len(self.pairing)

    @property
    def marked_vertex(self) -> int:
        return self.vertex_kinds.index(MARKED)

    def half_edges_at(self, v: int) -> list[int]:
        return [h for h, w in enumerate(self.vertex_of) if w == v]

    def valence(self, v: int) -> int:
        return self.vertex_of.count(v)

    def edges(self) -> list[tuple[int, int]]:
        return [(h, p) for h, p in enumerate(self.pairing) if h < p]

    @property
    def n_edges(self) -> int:
        return len(self.pairing) // 2

    def _connected(self) -> bool:
        nv = len(self.vertex_kinds)
        seen = {self.marked_vertex}
        stack = [self.marked_vertex]
        adj: dict[int, set[int]] = {}
        for h, p in self.edges():
            u, w = self.vertex_of[h], self.vertex_of[p]
            adj.setdefault(u, set()).add(w)
            adj.setdefault(w, set()).add(u)
        while stack:
            for w in adj.get(stack.pop(), ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == nv

    def relabel(self, perm: Sequence[int]) -> FeynmanDiagram:
        """Rename half-edge h to perm[h]; the result is isomorphic to self."""
        h = len(perm)
        inv = [0] * h
        for a, b in enumerate(perm):
            inv[b] = a
        pairing = tuple(perm[self.pairing[inv[b]]] for b in range(h))
        vertex_of = tuple(self.vertex_of[inv[b]] for b in range(h))
        return FeynmanDiagram(pairing, vertex_of, tuple(perm[l] for l in self.marked_legs),
                              self.vertex_kinds)

    def to_record(self) -> dict:
        return {
            "H": self.n_half_edges,
            "pairing": [list(e) for e in self.edges()],
            "vertex_of": list(self.vertex_of),
            "marked_legs": list(self.marked_legs),
            "vertex_kinds": list(self.vertex_kinds),
        }

    @classmethod
    def from_record(cls, rec: dict) -> FeynmanDiagram:
        pairing = [0] * rec["H"]
        for a, b in rec["pairing"]:
            pairing[a], pairing[b] = b, a
        kinds = rec.get("vertex_kinds")
        if kinds is None:
            nv = max(rec["vertex_of"], default=-1) + 1
            mv = rec["vertex_of"][rec["marked_legs"][0]] if rec["marked_legs"] else 0
            kinds = [MARKED if v == mv else INTERNAL for v in range(max(nv, 1))]
        return cls(tuple(pairing), tuple(rec["vertex_of"]), tuple(rec["marked_legs"]), tuple(kinds))


def betti(d: FeynmanDiagram) -> int:
    """Edges minus unmarked vertices."""
    return d.n_edges - (len(d.vertex_kinds) - 1)


# --- canonical form ----------------------------------------------------------

def _colored_multigraph(d: FeynmanDiagram, fix_marked_legs: bool):
    """Vertex-level multigraph with external vertices folded into their neighbour's colour.

    With pinned legs every marked half-edge gets its own node so that its
    position in the order is part of the colour.
    """
    mv = d.marked_vertex
    node_of_vertex: dict[int, int] = {}
    colors: list[list] = []
    for v, kind in enumerate(d.vertex_kinds):
        if kind == EXTERNAL:
            continue
        node_of_vertex[v] = len(colors)
        label = d.valence(v) if kind == INTERNAL else 0
        colors.append([_KIND_RANK[kind], label, 0])
    adj: list[Counter] = [Counter() for _ in colors]

    def link(u, w):
        adj[u][w] += 1
        if u != w:
            adj[w][u] += 1

    node_of_half = {}
    for h, v in enumerate(d.vertex_of):
        if d.vertex_kinds[v] != EXTERNAL:
            node_of_half[h] = node_of_vertex[v]
    if fix_marked_legs:
        for pos, h in enumerate(d.marked_legs):
            node = len(colors)
            colors.append([1, pos, 0])
            adj.append(Counter())
            link(node_of_vertex[mv], node)
            node_of_half[h] = node
    for h, p in d.edges():
        hk, pk = h in node_of_half, p in node_of_half
        if hk and pk:
            link(node_of_half[h], node_of_half[p])
        elif hk:
            colors[node_of_half[h]][2] += 1
        elif pk:
            colors[node_of_half[p]][2] += 1
    return [tuple(c) for c in colors], adj


def _refine(cells: list[list[int]], adj) -> list[list[int]]:
    while True:
        cell_of = {}
        for ci, cell in enumerate(cells):
            for u in cell:
                cell_of[u] = ci
        new_cells = []
        for cell in cells:
            if len(cell) == 1:
                new_cells.append(cell)
                continue
            sig = {u: tuple(sorted((cell_of[w], m) for w, m in adj[u].items())) for u in cell}
            for s in sorted(set(sig.values())):
                new_cells.append([u for u in cell if sig[u] == s])
        if len(new_cells) == len(cells):
            return new_cells
        cells = new_cells


def _certificate(colors, adj) -> tuple:
    order = sorted(range(len(colors)), key=lambda u: colors[u])
    cells: list[list[int]] = []
    for u in order:
        if cells and colors[cells[-1][0]] == colors[u]:
            cells[-1].append(u)
        else:
            cells.append([u])

    best = None

    def search(cells):
        nonlocal best
        cells = _refine(cells, adj)
        target = None
        for ci, cell in enumerate(cells):
            if len(cell) > 1 and (target is None or len(cell) < len(cells[target])):
                target = ci
        if target is None:
            lab = [c[0] for c in cells]
            cert = (tuple(colors[u] for u in lab),
                    tuple(adj[lab[i]][lab[j]] for i in range(len(lab)) for j in range(i, len(lab))))
            if best is None or cert < best:
                best = cert
            return
        for u in cells[target]:
            rest = [w for w in cells[target] if w != u]
            search(cells[:target] + [[u], rest] + cells[target + 1:])

    search(cells)
    return best


def canonical_form(d: FeynmanDiagram, fix_marked_legs: bool = True) -> bytes:
    """Byte string equal for two diagrams iff they are isomorphic.

    With ``fix_marked_legs`` the order of the marked half-edges is part of the
    structure; otherwise any permutation of them is allowed.
    """
    colors, adj = _colored_multigraph(d, fix_marked_legs)
    return repr(_certificate(colors, adj)).encode()


# --- automorphisms -----------------------------------------------------------

def aut_order_brute_force(d: FeynmanDiagram, fix_marked_legs: bool = True) -> int:
    """Order of the group of half-edge permutations preserving edges and vertex incidence.

    Searches permutations directly, counting through a stabiliser chain:
    |Aut| = prod_k |orbit of h_k under the pointwise stabiliser of h_1..h_{k-1}|,
    where each orbit point is certified by exhibiting a full automorphism.
    """
    H = d.n_half_edges
    if H > MAX_BRUTE_FORCE_HALF_EDGES:
        raise TooLarge(f"{H} half-edges exceeds the brute-force cap of {MAX_BRUTE_FORCE_HALF_EDGES}")
    kinds = d.vertex_kinds
    pair = d.pairing
    vof = d.vertex_of

    def assign(pi, used, phi, h, k):
        """Extend (pi, phi) with h -> k and pair(h) -> pair(k); None on conflict."""
        todo = [(h, k)]
        pi, used, phi = dict(pi), set(used), dict(phi)
        while todo:
            a, b = todo.pop()
            if a in pi:
                if pi[a] != b:
                    return None
                continue
            if b in used:
                return None
            va, vb = vof[a], vof[b]
            if kinds[va] != kinds[vb]:
                return None
            if va in phi:
                if phi[va] != vb:
                    return None
            else:
                if vb in phi.values():
                    return None
                phi[va] = vb
            pi[a] = b
            used.add(b)
            todo.append((pair[a], pair[b]))
        return pi, used, phi

    def extends(state) -> bool:
        pi, used, phi = state
        h = next((e for e in range(H) if e not in pi), None)
        if h is None:
            return True
        for k in range(H):
            if k in used:
                continue
            nxt = assign(pi, used, phi, h, k)
            if nxt is not None and extends(nxt):
                return True
        return False

    state = ({}, set(), {d.marked_vertex: d.marked_vertex})
    if fix_marked_legs:
        for h in d.marked_legs:
            state = assign(*state, h, h)
    order = 1
    for h in range(H):
        if h in state[0]:
            continue
        orbit = 0
        for k in range(H):
            nxt = assign(*state, h, k)
            if nxt is not None and extends(nxt):
                orbit += 1
        order *= orbit
        state = assign(*state, h, h)
    return order


# --- enumeration -------------------------------------------------------------

@dataclass(frozen=True)
class EnumeratedDiagram:
    """An isomorphism class with its symmetry data.

    ``labeled_count`` is the number of perfect matchings on the labelled
    half-edge set that are isomorphic to ``diagram``; ``group_order`` is the
    order of the relabelling group (vertex-internal half-edge permutations,
    swaps of equal-valence vertices, and leg permutations when legs are free),
    so ``aut = group_order / labeled_count``.
    """

    diagram: FeynmanDiagram
    betti: int
    aut: int
    labeled_count: int
    group_order: int
    key: bytes
    fixed_legs: bool = True

    @property
    def weight(self) -> Fraction:
        """Sum of 1/|Aut| over the pinned-leg classes this entry stands for."""
        pinned = self.group_order
        if not self.fixed_legs:
            pinned //= factorial(len(self.diagram.marked_legs))
        return Fraction(self.labeled_count, pinned)


def _valence_multisets(n: int, allowed: Iterable[int], max_betti: int) -> Iterator[tuple[int, ...]]:
    """Internal-vertex valence multisets with 2E = n + sum(val) and E - V <= max_betti."""
    if n == 0:
        yield ()
        return
    allowed = sorted(set(allowed))
    if any(m < 3 for m in allowed):
        raise ValueError("internal vertices need valence >= 3")
    budget = 2 * max_betti - n  # sum over vertices of (val - 2)

    def rec(start, acc, spent):
        if (n + sum(acc)) % 2 == 0 and spent <= budget:
            yield tuple(acc)
        for idx in range(start, len(allowed)):
            m = allowed[idx]
            if spent + m - 2 > budget:
                break
            acc.append(m)
            yield from rec(idx, acc, spent + m - 2)
            acc.pop()

    if budget >= 0:
        yield from rec(0, [], 0)


def _reduced_matchings(n: int, vals: tuple[int, ...], legs_free: bool):
    """Perfect matchings up to the obvious local symmetries, with multiplicities.

    Always pairs the lowest unpaired half-edge.  Partners that are related by a
    symmetry fixing the current partial matching (free half-edges of one
    vertex, untouched vertices of equal valence, and unpaired legs when legs
    are free) are explored once with the class size as weight, so weights sum
    to (H-1)!!.
    """
    owner = [0] * n
    halves = [list(range(n))]
    start = n
    for v, val in enumerate(vals, 1):
        owner += [v] * val
        halves.append(list(range(start, start + val)))
        start += val
    H = len(owner)
    partner = [-1] * H

    def rec(weight):
        h = next((e for e in range(H) if partner[e] < 0), None)
        if h is None:
            yield tuple(partner), weight
            return
        hv = owner[h]
        groups = []
        free_legs = [c for c in halves[0] if partner[c] < 0 and c != h]
        if legs_free:
            if free_legs:
                groups.append((free_legs[0], len(free_legs)))
        else:
            groups += [(c, 1) for c in free_legs]
        fresh: dict[int, list[int]] = {}
        for v in range(1, len(halves)):
            free = [c for c in halves[v] if partner[c] < 0 and c != h]
            if not free:
                continue
            if v != hv and len(free) == len(halves[v]):
                fresh.setdefault(vals[v - 1], []).append(v)
            else:
                groups.append((free[0], len(free)))
        for val, vs in sorted(fresh.items()):
            groups.append((halves[vs[0]][0], len(vs) * val))
        for c, k in groups:
            partner[h], partner[c] = c, h
            yield from rec(weight * k)
            partner[h] = partner[c] = -1

    yield from rec(1)


@lru_cache(maxsize=None)
def _classes(n: int, vals: tuple[int, ...], fix_marked_legs: bool) -> tuple[EnumeratedDiagram, ...]:
    kinds = (MARKED,) + (INTERNAL,) * len(vals)
    vertex_of = tuple([0] * n + [v for v, val in enumerate(vals, 1) for _ in range(val)])
    found: dict[bytes, list] = {}
    for partner, weight in _reduced_matchings(n, vals, not fix_marked_legs):
        try:
            d = FeynmanDiagram(partner, vertex_of, tuple(range(n)), kinds)
        except ValueError:  # disconnected
            continue
        key = canonical_form(d, fix_marked_legs)
        if key in found:
            found[key][1] += weight
        else:
            found[key] = [d, weight]
    group = prod(factorial(v) for v in vals) * prod(factorial(c) for c in Counter(vals).values())
    if not fix_marked_legs:
        group *= factorial(n)
    out = []
    for key, (d, count) in found.items():
        if group % count:
            raise AssertionError(f"orbit size {count} does not divide group order {group}")
        out.append(EnumeratedDiagram(d, betti(d), group // count, count, group, key,
                                     fix_marked_legs))
    return tuple(out)


def enumerate_closed_diagrams(n: int, allowed_valences: Iterable[int], max_betti: int,
                              fix_marked_legs: bool = True) -> list[EnumeratedDiagram]:
    """All connected diagrams without external vertices, marked valence n, beta <= max_betti.

    Classes are up to isomorphism fixing the marked legs pointwise (or, with
    ``fix_marked_legs=False``, up to any permutation of them).  Sorted by
    Betti number, then canonical key.
    """
    out = []
    for vals in _valence_multisets(n, allowed_valences, max_betti):
        out += [c for c in _classes(n, vals, fix_marked_legs) if c.betti <= max_betti]
    out.sort(key=lambda c: (c.betti, len(c.diagram.vertex_kinds), c.key))
    return out


# --- evaluation --------------------------------------------------------------

def _multiply(f1, f2):
    v1, t1 = f1
    v2, t2 = f2
    shared = [v for v in v1 if v in v2]
    extra = [v for v in v2 if v not in v1]
    pos1 = [v1.index(v) for v in shared]
    pos2s = [v2.index(v) for v in shared]
    pos2e = [v2.index(v) for v in extra]
    index: dict[tuple, list] = {}
    for a, c in t2.items():
        index.setdefault(tuple(a[p] for p in pos2s), []).append((tuple(a[p] for p in pos2e), c))
    out: dict[tuple, Fraction] = {}
    for a, c in t1.items():
        for rest, c2 in index.get(tuple(a[p] for p in pos1), ()):
            key = a + rest
            s = out.get(key, 0) + c * c2
            if s:
                out[key] = s
            else:
                out.pop(key, None)
    return tuple(v1) + tuple(extra), out


def _sum_out(factor, var):
    vs, t = factor
    p = vs.index(var)
    out: dict[tuple, Fraction] = {}
    for a, c in t.items():
        key = a[:p] + a[p + 1:]
        s = out.get(key, 0) + c
        if s:
            out[key] = s
        else:
            out.pop(key, None)
    return vs[:p] + vs[p + 1:], out


def _network(model: ValidatedModel, f: MarkedTensor, d: FeynmanDiagram):
    if f.arity != len(d.marked_legs):
        raise ArityMismatch(f"tensor of arity {f.arity} on a marked vertex of valence "
                            f"{len(d.marked_legs)}")
    n = model.dimension
    f.check_range(n)
    factors = [(tuple(d.marked_legs), dict(f.entries))]
    for v, kind in enumerate(d.vertex_kinds):
        if kind == INTERNAL:
            hs = d.half_edges_at(v)
            factors.append((tuple(hs), dict(model.b_full.get(len(hs), {}))))
    open_vars = []
    for h, p in d.edges():
        eh, ep = d.vertex_kinds[d.vertex_of[h]] == EXTERNAL, d.vertex_kinds[d.vertex_of[p]] == EXTERNAL
        if eh and ep:
            raise ValueError("edge between two external vertices")
        if eh or ep:
            open_vars.append(p if eh else h)
        else:
            prop = {(i, j): model.a_inv[i][j] for i in range(n) for j in range(n) if model.a_inv[i][j]}
            factors.append(((h, p), prop))
    return factors, open_vars


def evaluate(model: ValidatedModel, f: MarkedTensor, d: FeynmanDiagram) -> GradedElement:
    """Sum over labellings of the product of vertex tensors, propagators and x's.

    Computed by eliminating summed half-edge labels one at a time, always the
    one whose elimination creates the smallest intermediate factor.
    """
    factors, open_vars = _network(model, f, d)
    n = model.dimension
    open_set = set(open_vars)
    summed = {v for vs, _ in factors for v in vs} - open_set
    while summed:
        def cost(var):
            return len({u for vs, _ in factors if var in vs for u in vs}), var
        var = min(summed, key=cost)
        touching = [fa for fa in factors if var in fa[0]]
        factors = [fa for fa in factors if var not in fa[0]]
        acc = touching[0]
        for fa in touching[1:]:
            acc = _multiply(acc, fa)
        factors.append(_sum_out(acc, var))
        summed.discard(var)
    acc = ((), {(): Fraction(1)})
    for fa in factors:
        acc = _multiply(acc, fa)
    vs, table = acc
    terms: dict[Monomial, Fraction] = {}
    for labels, c in table.items():
        alpha = [0] * n
        for var, lab in zip(vs, labels):
            alpha[lab] += 1
        m = Monomial(tuple(alpha), (), 0)
        terms[m] = terms.get(m, 0) + c
    return GradedElement(terms, n)


def evaluate_brute_force(model: ValidatedModel, f: MarkedTensor, d: FeynmanDiagram,
                         max_labelings: int = 2 ** 20) -> GradedElement:
    """Literal sum over all N^H labellings; a check on :func:`evaluate`."""
    if f.arity != len(d.marked_legs):
        raise ArityMismatch("tensor arity does not match the marked valence")
    n = model.dimension
    H = d.n_half_edges
    if n ** H > max_labelings:
        raise TooLarge(f"{n}^{H} labellings exceeds {max_labelings}")
    kinds = [d.vertex_kinds[v] for v in d.vertex_of]
    internal = [d.half_edges_at(v) for v, k in enumerate(d.vertex_kinds) if k == INTERNAL]
    terms: dict[Monomial, Fraction] = {}
    for lab in product(range(n), repeat=H):
        c = f.entries.get(tuple(lab[h] for h in d.marked_legs), 0)
        if not c:
            continue
        for hs in internal:
            c *= model.b_full.get(len(hs), {}).get(tuple(lab[h] for h in hs), 0)
            if not c:
                break
        if not c:
            continue
        alpha = [0] * n
        for h, p in d.edges():
            if kinds[h] == EXTERNAL or kinds[p] == EXTERNAL:
                c *= int(lab[h] == lab[p])
            else:
                c *= model.a_inv[lab[h]][lab[p]]
        if not c:
            continue
        for h, k in enumerate(kinds):
            if k == EXTERNAL:
                alpha[lab[h]] += 1
        m = Monomial(tuple(alpha), (), 0)
        terms[m] = terms.get(m, 0) + c
    return GradedElement(terms, n)


def diagram_expectation(model: ValidatedModel, f: MarkedTensor, order: int) -> HbarSeries:
    """<sum f_i x_i> mod hbar^(order+1) as the sum of ev * hbar^beta / |Aut|.

    For a symmetric f the evaluation does not depend on the leg order, so the
    sum runs over classes with free legs, each weighted by the total of
    1/|Aut| over the pinned classes it contains.
    """
    f.check_range(model.dimension)
    fix = not f.symmetric
    coeffs: dict[int, Fraction] = {}
    for cls in enumerate_closed_diagrams(f.arity, model.interaction_valences, order,
                                         fix_marked_legs=fix):
        ev = evaluate(model, f, cls.diagram).constant_series().get(0, Fraction(0))
        if ev:
            coeffs[cls.betti] = coeffs.get(cls.betti, 0) + ev * cls.weight
    return HbarSeries.from_dict(coeffs, order)
