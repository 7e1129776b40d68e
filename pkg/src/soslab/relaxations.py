"""Level-r SoS relaxations as SDPs over the moment matrix.

Row and column ``i`` of the SDP matrix belong to ``keys[i]``; entry
``(i, j)`` is the inner product of the two key vectors. Every kind shares
the same backbone:

* union consistency: entries whose key unions coincide are equated to a
  representative (the lexicographically least split of the union);
* nonnegativity ``<V_S1, V_S2> >= 0`` for pairs whose union is larger than
  ``r`` (smaller unions are diagonal entries of the matrix, hence
  nonnegative already);
* ``||V_phi||^2 = 1``;

plus kind-specific objective and constraint rows.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from typing import Any, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, SolverError, ValidationError, check_budget
from .instances import BipartiteGraph, CspInstance, Graph, Hypergraph
from .polycore import (
    EMPTY,
    LabeledKey,
    MultilinearPoly,
    key_from_str,
    key_to_str,
    labeled_keys_upto,
    labeled_union,
    subsets_upto,
)
from .sdpcore import (
    MAX_DIM,
    SdpBuilder,
    SdpProblem,
    SdpSolution,
    SymMatrix,
    gram_vectors,
    solve_sdp,
    tri_coords,
    tri_index,
)


class RelaxationKind(str, Enum):
    GENERIC = "generic"
    CLIQUE = "clique"
    MIS = "mis"
    CSP = "csp"
    DKS = "dks"
    DKSH = "dksh"
    BISECTION = "bisection"
    SSBVE = "ssbve"
    MAXCUT_GW = "maxcut_gw"
    THETA = "theta"


@dataclass(frozen=True)
class BooleanProgram:
    """Optimize a multilinear polynomial over {0,1}^n.

    ``equalities`` are polynomials constrained to 0 and ``inequalities``
    are constrained to be nonnegative.
    """

    n: int
    objective: MultilinearPoly
    sense: str = "max"
    equalities: tuple = ()
    inequalities: tuple = ()

    @property
    def degree(self) -> int:
        polys = [self.objective, *self.equalities, *self.inequalities]
        return max(p.degree for p in polys)


@dataclass
class SosRelaxation:
    kind: RelaxationKind
    level: int
    n: int
    keys: list
    key_index: dict
    sdp: SdpProblem
    objective_terms: list  # (key_a, key_b, coef): FRAC = sum coef * <V_a, V_b>
    instance: Any = None
    params: dict = field(default_factory=dict)

    @property
    def sense(self) -> str:
        return self.sdp.sense

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "level": self.level,
            "keys": [key_to_str(k) for k in self.keys],
            "sdp": self.sdp.to_json(),
        }


@dataclass
class SosSolution:
    """Vectors per key; ``keys`` fixes the order used by :meth:`gram`."""

    level: int
    dim: int
    vectors: dict
    keys: list = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.keys is None:
            self.keys = list(self.vectors)

    def vec(self, key) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise ValidationError(f"solution has no vector for key {key_to_str(key)}") from None

    def inner(self, a, b) -> float:
        return float(self.vec(a) @ self.vec(b))

    def norm2(self, key) -> float:
        v = self.vec(key)
        return float(v @ v)

    def matrix(self, keys: Optional[Sequence] = None) -> np.ndarray:
        keys = self.keys if keys is None else keys
        v = np.vstack([self.vec(k) for k in keys])
        return v @ v.T

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "dim": self.dim,
            "vectors": {key_to_str(k): self.vectors[k].tolist() for k in self.keys},
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "SosSolution":
        if isinstance(data, str):
            data = json.loads(data)
        vectors = {key_from_str(k): np.asarray(v, dtype=float) for k, v in data["vectors"].items()}
        return cls(int(data["level"]), int(data["dim"]), vectors, list(vectors))


# ---------------------------------------------------------------- key algebra


def _key_mask(key, q: int) -> int:
    if isinstance(key, LabeledKey):
        return sum(1 << (v * q + a) for v, a in zip(key.vars, key.letters))
    return sum(1 << v for v in key)


def _mask_array(masks: list[int], bits: int) -> np.ndarray:
    if bits <= 64:
        return np.asarray(masks, dtype=np.uint64)
    return np.asarray(masks, dtype=object)


def _popcount(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == np.uint64:
        return np.bitwise_count(arr).astype(np.int64)
    return np.fromiter((int(x).bit_count() for x in arr), dtype=np.int64, count=len(arr))


class _Backbone:
    """Entry classes of the moment matrix and the shared constraint rows."""

    def __init__(self, keys: list, n: int, q: int, level: int, zero_fn, sense: str):
        D = len(keys)
        if D > MAX_DIM:
            raise BudgetExceeded(f"moment matrix would have {D} rows (cap {MAX_DIM})")
        check_budget(D * (D + 1) // 2, "moment matrix entries")
        self.keys, self.D, self.level, self.q = keys, D, level, q
        self.index = {k: i for i, k in enumerate(keys)}
        masks = _mask_array([_key_mask(k, q) for k in keys], n * q)
        rows, cols = tri_coords(D)
        union = masks[rows] | masks[cols]
        uniq, cls = np.unique(union, return_inverse=True)
        sizes = _popcount(uniq)
        zero = np.fromiter((zero_fn(int(u)) for u in uniq), dtype=bool, count=len(uniq))
        self.rows, self.cols, self.cls = rows, cols, cls.ravel()
        self.union_mask, self.union_size, self.zero = uniq, sizes, zero
        self.builder = SdpBuilder(D, sense=sense)

    def emit_backbone(self, zero_family: str):
        b, cls = self.builder, self.cls
        n_entries = len(cls)
        entry = np.arange(n_entries)
        # lexicographically least split: order by (min index, max index) = (col, row)
        order = np.lexsort((self.rows, self.cols))
        first = np.full(len(self.union_mask), -1, dtype=np.int64)
        seen_cls, first_pos = np.unique(cls[order], return_index=True)
        first[seen_cls] = order[first_pos]
        rep = first[cls]
        zero_entry = self.zero[cls]

        others = np.flatnonzero((rep != entry) & ~zero_entry)
        k = len(others)
        b.add_rows(
            "eq",
            np.repeat(np.arange(k), 2),
            np.column_stack([rep[others], others]).ravel(),
            np.tile([1.0, -1.0], k),
            np.zeros(k),
            "consistency",
        )
        zeros = np.flatnonzero(zero_entry)
        b.add_rows("eq", np.arange(len(zeros)), zeros, np.ones(len(zeros)), np.zeros(len(zeros)), zero_family)
        nonneg = np.flatnonzero((self.union_size[cls] > self.level) & ~zero_entry)
        b.add_rows(
            "ineq", np.arange(len(nonneg)), nonneg, -np.ones(len(nonneg)), np.zeros(len(nonneg)), "nonneg"
        )
        b.add_row("eq", [tri_index(0, 0)], [1.0], 1.0, "norm")

    def entry(self, a, b) -> int:
        return tri_index(self.index[a], self.index[b])


def _split(key: tuple, r: int) -> tuple[tuple, tuple]:
    if len(key) > 2 * r:
        raise ValidationError(f"monomial {key_to_str(key)} exceeds degree 2r = {2 * r}")
    head = key[: min(len(key), r)]
    return head, key[len(head) :]


def _labeled_split(key: LabeledKey, r: int) -> tuple[LabeledKey, LabeledKey]:
    if len(key) > 2 * r:
        raise ValidationError(f"labeled monomial of size {len(key)} exceeds 2r = {2 * r}")
    h = min(len(key), r)
    return (
        LabeledKey(key.vars[:h], key.letters[:h]),
        LabeledKey(key.vars[h:], key.letters[h:]),
    )


# ---------------------------------------------------------------- builders


def _pairs_mask(pairs) -> list[int]:
    return [(1 << u) | (1 << v) for u, v in pairs]


def _covers_any(forbidden: list[int]):
    def fn(mask: int) -> bool:
        return any(mask & f == f for f in forbidden)

    return fn


def _no_zero(mask: int) -> bool:
    return False


def _clash_fn(n: int, q: int):
    block = (1 << q) - 1

    def fn(mask: int) -> bool:
        for v in range(n):
            if ((mask >> (v * q)) & block).bit_count() > 1:
                return True
        return False

    return fn


def _require(kind, instance, typ):
    if not isinstance(instance, typ):
        raise ValidationError(f"{kind.value} relaxation needs a {typ.__name__} payload")


def _size_constraint_rows(bb: _Backbone, members: Sequence[int], k: float, family: str):
    """sum_{v in members} <V_v, V_S> = k ||V_S||^2 for every stored key S."""
    for s, key in enumerate(bb.keys):
        idx = [tri_index(v_i, s) for v_i in members] + [tri_index(s, s)]
        val = [1.0] * len(members) + [-float(k)]
        bb.builder.add_row("eq", idx, val, 0.0, family)


def build_relaxation(kind, instance, params: Optional[dict] = None, r: int = 1) -> SosRelaxation:
    """Build the level-``r`` relaxation of ``instance``.

    Payloads: ``BooleanProgram`` (generic), ``Graph`` (clique, mis, dks,
    bisection, maxcut_gw, theta), ``Hypergraph`` (dksh), ``CspInstance``
    (csp) and ``BipartiteGraph`` (ssbve, left vertices numbered first).
    ``params`` carries ``k`` for dks/dksh/bisection and ``l`` for ssbve.
    """
    kind = RelaxationKind(kind)
    params = dict(params or {})
    if r < 1:
        raise ValidationError("level r must be at least 1")
    if kind in (RelaxationKind.MAXCUT_GW, RelaxationKind.THETA):
        return _build_vector_program(kind, instance, params)
    if kind in (RelaxationKind.DKS, RelaxationKind.BISECTION, RelaxationKind.DKSH) and r == 1:
        raise ValidationError(
            f"{kind.value} needs r >= 2: its objective or size constraint reads pair keys"
        )

    terms: list = []
    if kind == RelaxationKind.CSP:
        _require(kind, instance, CspInstance)
        inst: CspInstance = instance
        n, q = inst.n, inst.q
        n_keys = sum(comb(n, i) * q**i for i in range(min(r, n) + 1))
        if n_keys > MAX_DIM:
            raise BudgetExceeded(f"csp relaxation would have {n_keys} labeled keys (cap {MAX_DIM})")
        keys = labeled_keys_upto(n, q, r)
        bb = _Backbone(keys, n, q, r, _clash_fn(n, q), "max")
        bb.emit_backbone("clash")
        b = bb.builder
        # each variable takes some letter: sum_a <V_(j,a), V_(S,alpha)> = ||V_(S,alpha)||^2
        for s, key in enumerate(keys):
            for j in range(n):
                if j in key.vars:
                    continue
                idx = [tri_index(bb.index[LabeledKey((j,), (a,))], s) for a in range(q)]
                b.add_row("eq", idx + [tri_index(s, s)], [1.0] * q + [-1.0], 0.0, "completeness")
        if inst.K > 2 * r:
            raise ValidationError(f"arity K={inst.K} exceeds 2r={2 * r}")
        for i, scope in enumerate(inst.scopes):
            for alpha in inst.satisfying(i):
                key = LabeledKey.from_assignment(dict(zip(scope, alpha)))
                ka, kb = _labeled_split(key, r)
                terms.append((ka, kb, 1.0))
        return _finish(kind, r, n, bb, terms, instance, params)

    if kind == RelaxationKind.GENERIC:
        _require(kind, instance, BooleanProgram)
        prog: BooleanProgram = instance
        n, sense = prog.n, prog.sense
        if r < prog.degree:
            raise ValidationError(f"level {r} is below the program degree {prog.degree}")
    elif kind == RelaxationKind.DKSH:
        _require(kind, instance, Hypergraph)
        n, sense = instance.n, "max"
    elif kind == RelaxationKind.SSBVE:
        _require(kind, instance, BipartiteGraph)
        n, sense = instance.n_vertices, "min"
    else:
        _require(kind, instance, Graph)
        n = instance.n
        sense = "min" if kind == RelaxationKind.BISECTION else "max"

    keys = subsets_upto(n, r)
    zero_family = "constraint"
    zero_fn = _no_zero
    if kind == RelaxationKind.CLIQUE:
        zero_fn, zero_family = _covers_any(_pairs_mask(instance.complement().edges)), "nonedge"
    elif kind == RelaxationKind.MIS:
        zero_fn, zero_family = _covers_any(_pairs_mask(instance.edges)), "edge"
    bb = _Backbone(keys, n, 1, r, zero_fn, sense)
    bb.emit_backbone(zero_family)
    b = bb.builder
    singles = [bb.index[(v,)] for v in range(n)]

    if kind in (RelaxationKind.CLIQUE, RelaxationKind.MIS):
        terms = [((v,), (v,), 1.0) for v in range(n)]
    elif kind == RelaxationKind.DKS:
        k = _param(params, "k")
        _size_constraint_rows(bb, singles, k, "size")
        terms = [((u, v), (u, v), 1.0) for u, v in instance.edges]
    elif kind == RelaxationKind.DKSH:
        k = _param(params, "k")
        _size_constraint_rows(bb, singles, k, "size")
        for f in instance.hyperedges:
            if len(f) > r:
                raise ValidationError(f"hyperedge {f} has more than r={r} vertices")
            terms.append((f, f, 1.0))
    elif kind == RelaxationKind.BISECTION:
        k = _param(params, "k")
        _size_constraint_rows(bb, singles, k, "size")
        for u, v in instance.edges:
            terms += [((u,), (u,), 1.0), ((v,), (v,), 1.0), ((u,), (v,), -2.0)]
    elif kind == RelaxationKind.SSBVE:
        l = _param(params, "l")
        nl = len(instance.left)
        _size_constraint_rows(bb, singles[:nl], l, "size")
        for a, c in instance.edges:
            u, v = singles[a], singles[nl + c]
            for s in range(bb.D):
                b.add_row("ineq", [tri_index(u, s), tri_index(v, s)], [1.0, -1.0], 0.0, "cover")
        terms = [((nl + c,), (nl + c,), 1.0) for c in range(len(instance.right))]
    elif kind == RelaxationKind.GENERIC:
        for key, coef in prog.objective.items():
            ka, kb = _split(key, r)
            terms.append((ka, kb, float(coef)))
        for fam, polys, kind_row in (("equality", prog.equalities, "eq"), ("inequality", prog.inequalities, "ineq")):
            for p_i, poly in enumerate(polys):
                for s in range(bb.D):
                    idx = [tri_index(bb.index[t], s) for t, _ in poly.items()]
                    val = [float(c) for _, c in poly.items()]
                    if kind_row == "ineq":  # q >= 0 becomes -q <= 0
                        val = [-x for x in val]
                    b.add_row(kind_row, idx, val, 0.0, f"{fam}{p_i}")
    return _finish(kind, r, n, bb, terms, instance, params)


def _finish(kind, r, n, bb: _Backbone, terms, instance, params) -> SosRelaxation:
    for ka, kb, coef in terms:
        bb.builder.add_entry(bb.index[ka], bb.index[kb], coef)
    return SosRelaxation(kind, r, n, bb.keys, bb.index, bb.builder.build(), terms, instance, params)


def _param(params: dict, name: str) -> float:
    if name not in params:
        raise ValidationError(f"missing parameter {name!r}")
    return float(params[name])


def _build_vector_program(kind: RelaxationKind, g: Graph, params: dict) -> SosRelaxation:
    _require(kind, g, Graph)
    n = g.n
    keys = [(v,) for v in range(n)]
    b = SdpBuilder(n, "max")
    terms = []
    if kind == RelaxationKind.MAXCUT_GW:
        # (1/2 - <V_u,V_v>/2) written as ||V_u - V_v||^2 / 4 using unit norms
        for v in range(n):
            b.add_row("eq", [tri_index(v, v)], [1.0], 1.0, "unit")
        for u, v in g.edges:
            terms += [((u,), (u,), 0.25), ((v,), (v,), 0.25), ((u,), (v,), -0.5)]
    else:
        b.add_row("eq", [tri_index(v, v) for v in range(n)], [1.0] * n, 1.0, "trace")
        for u, v in g.edges:
            b.add_row("eq", [tri_index(u, v)], [1.0], 0.0, "edge")
        for u in range(n):
            terms.append(((u,), (u,), 1.0))
            for v in range(u + 1, n):
                terms.append(((u,), (v,), 2.0))
    index = {k: i for i, k in enumerate(keys)}
    for ka, kb, coef in terms:
        b.add_entry(index[ka], index[kb], coef)
    return SosRelaxation(kind, 1, n, keys, index, b.build(), terms, g, params)


def theta_dual_problem(g: Graph) -> SdpProblem:
    """min t over Y = tI - A PSD, A_ii = 1 and A_uv = 1 off the edges of ``g``.

    The optimum of the returned SDP is ``theta(g) - 1`` (it minimizes Y_00).
    """
    n = g.n
    b = SdpBuilder(n, "min")
    b.add_entry(0, 0, 1.0)
    for i in range(1, n):
        b.add_row("eq", [tri_index(i, i), tri_index(0, 0)], [1.0, -1.0], 0.0, "diagonal")
    for u in range(n):
        for v in range(u + 1, n):
            if not g.has_edge(u, v):
                b.add_row("eq", [tri_index(u, v)], [1.0], -1.0, "nonedge")
    return b.build()


def lovasz_theta(g: Graph, formulation: str = "primal", tol: float = 1e-7, max_iter: int = 50000) -> float:
    """Lovász theta of ``g`` from the primal vector program or its dual."""
    if g.n == 0:
        return 0.0
    if formulation == "primal":
        problem, shift = build_relaxation(RelaxationKind.THETA, g).sdp, 0.0
    elif formulation == "dual":
        problem, shift = theta_dual_problem(g), 1.0
    else:
        raise ValidationError(f"unknown formulation {formulation!r}")
    res = solve_sdp(problem, tol=tol, max_iter=max_iter)
    if not res.converged:
        raise SolverError(f"theta ({formulation}) did not converge in {res.iterations} iterations")
    return res.objective_value + shift


# ---------------------------------------------------------------- solve / verify


def solution_from_matrix(rel: SosRelaxation, x: SymMatrix, tol: float = 1e-6, **info) -> SosSolution:
    psd_tol = max(tol, 10 * max(0.0, -float(np.linalg.eigvalsh(x.to_dense())[0])))
    vecs = gram_vectors(x, tol=psd_tol)
    vectors = {k: vecs[i] for i, k in enumerate(rel.keys)}
    return SosSolution(rel.level, vecs.shape[1], vectors, list(rel.keys), info)


def solve_relaxation(
    rel: SosRelaxation, tol: float = 1e-6, max_iter: int = 50000, **solver_kw
) -> tuple[SosSolution, float]:
    """Solve the SDP and unpack Gram vectors per key; returns (solution, FRAC)."""
    t0 = time.perf_counter()
    res: SdpSolution = solve_sdp(rel.sdp, tol=tol, max_iter=max_iter, **solver_kw)
    sol = solution_from_matrix(
        rel,
        res.matrix,
        tol,
        sdp=res,
        converged=res.converged,
        wall_time=time.perf_counter() - t0,
    )
    return sol, res.objective_value


def objective_value(rel: SosRelaxation, sol: SosSolution) -> float:
    """Relaxation objective evaluated on arbitrary vectors."""
    return float(sum(coef * sol.inner(a, b) for a, b, coef in rel.objective_terms))


def verify_solution(rel: SosRelaxation, sol: SosSolution, tol: float = 1e-4) -> list[tuple[str, float]]:
    """Every constraint row violated by more than ``tol``, as (id, magnitude)."""
    missing = [k for k in rel.keys if k not in sol.vectors]
    if missing:
        raise ValidationError(f"solution lacks {len(missing)} keys, e.g. {key_to_str(missing[0])}")
    gram = sol.matrix(rel.keys)
    x = SymMatrix.from_dense(gram)
    eq, ineq = rel.sdp.violations(x)
    scale = 1.0 + np.abs(rel.sdp.b_eq)
    report = [(rel.sdp.row_label("eq", i), float(eq[i])) for i in np.flatnonzero(eq > tol * scale)]
    report += [(rel.sdp.row_label("ineq", i), float(ineq[i])) for i in np.flatnonzero(ineq > tol)]
    return report


def max_violation(rel: SosRelaxation, sol: SosSolution) -> float:
    x = SymMatrix.from_dense(sol.matrix(rel.keys))
    eq, ineq = rel.sdp.violations(x)
    return float(max(eq.max(initial=0.0), ineq.max(initial=0.0)))


def integral_solution(rel: SosRelaxation, assignment: Sequence[int]) -> SosSolution:
    """One-dimensional solution of an actual assignment (0/1, or letters for csp)."""
    vectors = {}
    for key in rel.keys:
        if isinstance(key, LabeledKey):
            val = all(assignment[v] == a for v, a in zip(key.vars, key.letters))
        elif rel.kind == RelaxationKind.MAXCUT_GW:
            val = 1.0 if assignment[key[0]] else -1.0
        else:
            val = all(assignment[v] for v in key)
        vectors[key] = np.array([float(val)])
    return SosSolution(rel.level, 1, vectors, list(rel.keys))


def union_consistency_error(sol: SosSolution, keys: Optional[Sequence] = None) -> float:
    """max |<V_S1, V_S2> - <V_{S1 u S2}, V_phi>| over stored pairs with stored unions."""
    keys = list(sol.keys if keys is None else keys)
    gram = sol.matrix(keys)
    index = {k: i for i, k in enumerate(keys)}
    phi = index.get(EMPTY)
    if phi is None:
        phi = index.get(LabeledKey((), ()))
    worst = 0.0
    for i, a in enumerate(keys):
        for j in range(i, len(keys)):
            bkey = keys[j]
            if isinstance(a, LabeledKey):
                u = labeled_union(a, bkey)
                if u is None:
                    continue
            else:
                u = tuple(sorted(set(a) | set(bkey)))
            if u in index:
                worst = max(worst, abs(gram[i, j] - gram[index[u], phi]))
    return worst
