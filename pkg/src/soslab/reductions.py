"""Gap-preserving reductions between relaxations and brute-force optima.

Three constructions are provided:

* a Max K-CSP instance becomes a densest k-subgraph instance on its
  label-extended factor graph, and CSP vectors map to DkS vectors;
* a graph becomes a hypergraph whose hyperedges are unions of edges;
* the DkS graph is subdivided into a small set bipartite vertex expansion
  (SSBVE) instance, with DkS vectors pulled back through neighborhoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement, product
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError, check_budget, enumeration_budget
from .instances import BipartiteGraph, CspInstance, Graph, Hypergraph, label_extended_graph
from .polycore import LabeledKey, subsets_upto
from .relaxations import BooleanProgram, RelaxationKind, SosSolution


# ---------------------------------------------------------------- CSP -> DkS


@dataclass(frozen=True)
class DksReduction:
    """Densest k-subgraph instance built on the label-extended factor graph.

    ``graph`` is ``bipartite`` flattened with left vertices first. With the
    copy count ``delta`` the vector mapping satisfies the size constraint
    for ``k = m + n * delta``, which equals ``2m`` when ``delta = m / n``.
    """

    source: CspInstance
    bipartite: BipartiteGraph
    graph: Graph
    k: int
    delta: int


def _dks_k(inst: CspInstance, delta: int) -> int:
    return inst.m + inst.n * delta


def build_dks_reduction(inst: CspInstance, delta: Optional[int] = None) -> DksReduction:
    bip = label_extended_graph(inst, delta)
    delta = len(bip.right) // (inst.n * inst.q)
    return DksReduction(inst, bip, bip.to_graph(), _dks_k(inst, delta), delta)


def _graph_set_assignment(red: DksReduction, vertices: Sequence[int]) -> Optional[dict]:
    """Partial assignment implied by a set of DkS vertices; None if inconsistent."""
    inst, bip = red.source, red.bipartite
    nl = len(bip.left)
    assign: dict[int, int] = {}
    for v in vertices:
        if v < nl:
            i, alpha = bip.left[v]
            pairs = zip(inst.scopes[i], alpha)
        else:
            x, a, _ = bip.right[v - nl]
            pairs = [(x, a)]
        for x, a in pairs:
            if assign.setdefault(x, a) != a:
                return None
    return assign


def _mapped_vector(red: DksReduction, source_sol: SosSolution, vertices: Sequence[int]) -> np.ndarray:
    assign = _graph_set_assignment(red, vertices)
    if assign is None:
        return np.zeros(source_sol.dim)
    key = LabeledKey.from_assignment(assign)
    if key not in source_sol.vectors:
        raise ValidationError(
            f"source solution lacks the labeled key for {len(key)} variables; "
            f"raise the source level or lower the target level"
        )
    return source_sol.vectors[key]


def csp_to_dks(
    inst: CspInstance,
    sol: Optional[SosSolution] = None,
    delta: Optional[int] = None,
    level: Optional[int] = None,
) -> tuple[DksReduction, Optional[SosSolution]]:
    """Build the DkS instance of ``inst`` and optionally map a CSP solution.

    A vertex set ``S`` of the DkS graph receives the vector of the partial
    assignment it forces: a left vertex ``(i, alpha)`` forces ``alpha`` on
    scope ``i`` and a right vertex ``(x, a, j)`` forces ``x = a``. Sets
    forcing two letters on one variable get the zero vector.

    Args:
        inst: Source CSP.
        sol: Labeled solution of the source CSP relaxation.
        delta: Copies per (variable, letter); defaults to ``ceil(m / n)``.
        level: Target DkS level. Defaults to ``sol.level // K``. A larger
            value is accepted when every forced assignment stays within the
            source's stored keys (always true once ``sol.level >= n``).

    Returns:
        The reduction and the mapped solution (None when ``sol`` is None).
    """
    red = build_dks_reduction(inst, delta)
    if sol is None:
        return red, None
    if not sol.keys or not isinstance(next(iter(sol.vectors)), LabeledKey):
        raise ValidationError("csp_to_dks needs a solution keyed by labeled keys")
    if level is None:
        if sol.level < inst.K:
            raise ValidationError(f"source level {sol.level} is below K = {inst.K}")
        level = sol.level // inst.K
    if level < 1:
        raise ValidationError("target level must be at least 1")
    N = red.graph.n
    check_budget(sum(math.comb(N, i) for i in range(level + 1)), "mapped DkS keys")
    keys = subsets_upto(N, level)
    vectors = {key: _mapped_vector(red, sol, key) for key in keys}
    mapped = SosSolution(level, sol.dim, vectors, keys, {"source_level": sol.level})
    return red, mapped


# ---------------------------------------------------------------- DkS -> DkSH


def dks_to_dksh(g: Graph, t: int, budget: Optional[int] = None) -> Hypergraph:
    """Hypergraph of all unions of ``2**(t-1)`` edges of ``g``, deduplicated."""
    if t < 1:
        raise ValidationError("t must be at least 1")
    rho = 2 ** (t - 1)
    # unions over multisets suffice since order and repetition do not change a union
    check_budget(math.comb(g.m + rho - 1, rho) if g.m else 0, "edge multisets", budget)
    found = set()
    for combo in combinations_with_replacement(g.edges, rho):
        found.add(frozenset(v for e in combo for v in e))
    return Hypergraph(g.n, tuple(sorted(tuple(sorted(f)) for f in found)))


def union_moment(sol: SosSolution, key: tuple) -> float:
    """``||V_key||^2`` read from stored vectors, through a split if needed."""
    if key in sol.vectors:
        return sol.norm2(key)
    for cut in range(len(key) // 2, len(key) + 1):
        a, b = key[:cut], key[cut:]
        if a in sol.vectors and b in sol.vectors:
            return sol.inner(a, b)
    raise ValidationError(f"no stored split for monomial of size {len(key)}")


def hyper_tuple_bound(sol: SosSolution, edges: Sequence[tuple], p: int, budget: Optional[int] = None):
    """Sum over ordered ``2**p``-tuples of edges of the union norm, and FRAC power.

    Returns ``(lhs, rhs)`` with ``rhs = FRAC ** (2**p)`` where FRAC is the
    edge objective of ``sol``. Summation uses ``math.fsum``.
    """
    if p < 0:
        raise ValidationError("p must be nonnegative")
    width = 2**p
    edges = [tuple(sorted(e)) for e in edges]
    check_budget(len(edges) ** width, "edge tuples", budget)
    frac = math.fsum(union_moment(sol, e) for e in edges)
    cache: dict[tuple, float] = {}
    terms = []
    for combo in product(edges, repeat=width):
        key = tuple(sorted(set().union(*combo)))
        if key not in cache:
            cache[key] = union_moment(sol, key)
        terms.append(cache[key])
    return math.fsum(terms), frac**width


# ---------------------------------------------------------------- CSP -> SSBVE


@dataclass(frozen=True)
class SsbveReduction:
    """SSBVE instance from subdividing the DkS graph.

    Left vertices are the DkS edges and right vertices the DkS vertices;
    pick ``l = delta * m * K`` left vertices.
    """

    dks: DksReduction
    bipartite: BipartiteGraph
    l: int

    @property
    def source(self) -> CspInstance:
        return self.dks.source


def build_ssbve_reduction(dks: DksReduction) -> SsbveReduction:
    g = dks.graph
    left = tuple(g.edges)
    right = tuple(range(g.n))
    edges = [(i, u) for i, e in enumerate(left) for u in e]
    bip = BipartiteGraph(left, right, tuple(edges))
    inst = dks.source
    return SsbveReduction(dks, bip, dks.delta * inst.m * inst.K)


def csp_to_ssbve(
    inst: CspInstance,
    dks_sol: Optional[SosSolution] = None,
    source_sol: Optional[SosSolution] = None,
    delta: Optional[int] = None,
    level: Optional[int] = None,
) -> tuple[SsbveReduction, Optional[SosSolution]]:
    """Build the SSBVE instance and pull back the mapped DkS vectors.

    A set ``S`` of SSBVE vertices gets ``V_B(S)`` where ``B(S)`` is its
    right part together with the endpoints of its left part. ``V_B`` is the
    CSP-derived DkS vector, so ``source_sol`` is required; when ``dks_sol``
    is given it must agree with that mapping on every shared key.

    ``level`` defaults to ``dks_level // 2 - 4`` and may be set higher when
    every forced assignment stays within the source's stored keys.
    """
    red = build_dks_reduction(inst, delta)
    ss = build_ssbve_reduction(red)
    if dks_sol is None and source_sol is None:
        return ss, None
    if source_sol is None:
        raise ValidationError("csp_to_ssbve needs the CSP source solution to rebuild V_B")
    if dks_sol is not None:
        for key in dks_sol.keys:
            if not np.allclose(dks_sol.vec(key), _mapped_vector(red, source_sol, key), atol=1e-12):
                raise ValidationError("dks_sol is not the mapping of source_sol")
    if level is None:
        base = dks_sol.level if dks_sol is not None else source_sol.level // inst.K
        level = base // 2 - 4
    if level < 1:
        raise ValidationError(f"target SSBVE level {level} is below 1; pass an explicit level")
    bip = ss.bipartite
    nl = len(bip.left)
    N = bip.n_vertices
    check_budget(sum(math.comb(N, i) for i in range(level + 1)), "mapped SSBVE keys")
    keys = subsets_upto(N, level)
    vectors = {}
    for key in keys:
        b = {v - nl for v in key if v >= nl}
        for v in key:
            if v < nl:
                b.update(bip.left[v])
        vectors[key] = _mapped_vector(red, source_sol, tuple(sorted(b)))
    return ss, SosSolution(level, source_sol.dim, vectors, keys, {"source_level": source_sol.level})


# ---------------------------------------------------------------- brute force


def _max_clique(g: Graph, budget: int) -> int:
    adj = [0] * g.n
    for u, v in g.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    best = 0
    visited = 0

    def expand(size: int, cand: int, excl: int):
        nonlocal best, visited
        visited += 1
        if visited > budget:
            check_budget(visited, "clique search nodes", budget)
        if cand == 0:
            best = max(best, size)
            return
        if size + cand.bit_count() <= best:
            return
        pivot_pool = cand | excl
        pivot = max(_bits(pivot_pool), key=lambda u: (cand & adj[u]).bit_count())
        for v in _bits(cand & ~adj[pivot]):
            expand(size + 1, cand & adj[v], excl & adj[v])
            cand &= ~(1 << v)
            excl |= 1 << v

    expand(0, (1 << g.n) - 1, 0)
    return best


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _induced_counts(n: int, k: int, edge_sets: Sequence[Sequence[int]], budget: int):
    check_budget(math.comb(n, k), f"{k}-subsets of {n} vertices", budget)
    masks = [sum(1 << v for v in f) for f in edge_sets]
    for combo in combinations(range(n), k):
        s = sum(1 << v for v in combo)
        yield sum(1 for f in masks if f & s == f)


def _cut_counts(n: int, k: int, edges, budget: int):
    check_budget(math.comb(n, k), f"{k}-subsets of {n} vertices", budget)
    for combo in combinations(range(n), k):
        s = set(combo)
        yield sum((u in s) != (v in s) for u, v in edges)


def brute_force_opt(kind, instance, param=None, budget: Optional[int] = None) -> int:
    """Exact optimum by exhaustive search.

    ``param`` is ``k`` for dks/dksh/bisection and ``l`` for ssbve; other
    kinds ignore it. CSP returns the largest number of satisfied
    constraints and maxcut the largest cut.
    """
    kind = RelaxationKind(kind)
    cap = enumeration_budget() if budget is None else budget
    if kind == RelaxationKind.CLIQUE:
        return _max_clique(instance, cap)
    if kind == RelaxationKind.MIS:
        return _max_clique(instance.complement(), cap)
    if kind in (RelaxationKind.DKS, RelaxationKind.DKSH):
        k = _int_param(param, kind)
        sets = instance.edges if kind == RelaxationKind.DKS else instance.hyperedges
        return max(_induced_counts(instance.n, k, sets, cap), default=0)
    if kind == RelaxationKind.BISECTION:
        k = _int_param(param, kind)
        return min(_cut_counts(instance.n, k, instance.edges, cap))
    if kind == RelaxationKind.MAXCUT_GW:
        return _max_cut(instance, cap)
    if kind == RelaxationKind.SSBVE:
        l = _int_param(param, kind)
        bip: BipartiteGraph = instance
        check_budget(math.comb(len(bip.left), l), "left subsets", cap)
        nbr = [0] * len(bip.left)
        for a, b in bip.edges:
            nbr[a] |= 1 << b
        best = None
        for combo in combinations(range(len(bip.left)), l):
            m = 0
            for a in combo:
                m |= nbr[a]
            c = m.bit_count()
            best = c if best is None else min(best, c)
        return int(best)
    if kind == RelaxationKind.CSP:
        return _csp_opt(instance, cap)
    if kind == RelaxationKind.GENERIC:
        return _generic_opt(instance, cap)
    raise ValidationError(f"no brute-force oracle for {kind.value}")


def _int_param(param, kind) -> int:
    if param is None:
        raise ValidationError(f"{kind.value} oracle needs its size parameter")
    return int(param)


def _max_cut(g: Graph, cap: int) -> int:
    n = g.n
    if n <= 1:
        return 0
    check_budget(2 ** (n - 1), "cuts", cap)
    codes = np.arange(2 ** (n - 1), dtype=np.int64)
    best = 0
    chunk = 1 << 16
    for start in range(0, len(codes), chunk):
        c = codes[start : start + chunk]
        side = (c[:, None] >> np.arange(n - 1)) & 1  # vertex n-1 fixed on side 0
        side = np.hstack([side, np.zeros((len(c), 1), dtype=np.int64)])
        cut = np.zeros(len(c), dtype=np.int64)
        for u, v in g.edges:
            cut += side[:, u] ^ side[:, v]
        best = max(best, int(cut.max()))
    return best


def _csp_opt(inst: CspInstance, cap: int) -> int:
    n, q = inst.n, inst.q
    check_budget(q**n, "assignments", cap)
    best = 0
    chunk = 1 << 15
    powers = q ** np.arange(n, dtype=np.int64)
    sat_tables = []
    for i, scope in enumerate(inst.scopes):
        table = np.zeros(q ** len(scope), dtype=bool)
        for alpha in inst.satisfying(i):
            table[sum(a * q**j for j, a in enumerate(alpha))] = True
        sat_tables.append((np.asarray(scope), table))
    for start in range(0, q**n, chunk):
        codes = np.arange(start, min(start + chunk, q**n), dtype=np.int64)
        digits = (codes[:, None] // powers) % q
        count = np.zeros(len(codes), dtype=np.int64)
        for scope, table in sat_tables:
            idx = digits[:, scope] @ (q ** np.arange(len(scope), dtype=np.int64))
            count += table[idx]
        best = max(best, int(count.max()))
    return best


def _generic_opt(prog: BooleanProgram, cap: int):
    from .polycore import evaluate

    check_budget(2**prog.n, "assignments", cap)
    best = None
    for x in product((0, 1), repeat=prog.n):
        if any(evaluate(p, x) != 0 for p in prog.equalities):
            continue
        if any(evaluate(p, x) < 0 for p in prog.inequalities):
            continue
        val = evaluate(prog.objective, x)
        if best is None or (val > best if prog.sense == "max" else val < best):
            best = val
    if best is None:
        raise ValidationError("program has no feasible 0/1 point")
    return best
