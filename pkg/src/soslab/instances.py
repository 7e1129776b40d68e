"""Seeded instance generators, codes over prime fields, and factor graphs.

All randomness uses numpy's PCG64 bit generator seeded through
``SeedSequence``. Graph generators spawn two substreams from the root
seed: the first decides edges (one fair bit per vertex pair, pairs in
lexicographic order), the second places planted structure. Random CSPs
spawn one substream per constraint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import ValidationError, check_budget, enumeration_budget


def _rng(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_seq))


# ---------------------------------------------------------------- graphs


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``."""

    n: int
    edges: tuple = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("n must be nonnegative")
        clean = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValidationError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge ({u},{v}) outside [0,{self.n})")
            clean.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_lookup()

    def _edge_lookup(self):
        cache = self.__dict__.get("_lookup")
        if cache is None:
            cache = frozenset(self.edges)
            object.__setattr__(self, "_lookup", cache)
        return cache

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        if self.edges:
            e = np.asarray(self.edges)
            a[e[:, 0], e[:, 1]] = 1.0
            a[e[:, 1], e[:, 0]] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def neighbors(self, u: int) -> list[int]:
        return sorted({v for e in self.edges if u in e for v in e if v != u})

    def is_regular(self) -> bool:
        d = self.degrees()
        return self.n == 0 or bool(np.all(d == d[0]))

    def complement(self) -> "Graph":
        present = self._edge_lookup()
        return Graph(self.n, tuple(p for p in combinations(range(self.n), 2) if p not in present))

    def induced(self, vertices: Sequence[int]) -> tuple["Graph", list[int]]:
        """Subgraph on ``vertices`` relabeled to ``0..len-1``; returns the old ids too."""
        keep = sorted(set(int(v) for v in vertices))
        pos = {v: i for i, v in enumerate(keep)}
        edges = [(pos[u], pos[v]) for u, v in self.edges if u in pos and v in pos]
        return Graph(len(keep), tuple(edges)), keep

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: dict | str) -> "Graph":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(int(data["n"]), tuple(tuple(e) for e in data["edges"]))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(combinations(range(n), 2)))


def empty_graph(n: int) -> Graph:
    return Graph(n, ())


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValidationError("a cycle needs at least 3 vertices")
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def disjoint_union(*graphs: Graph) -> Graph:
    edges, offset = [], 0
    for g in graphs:
        edges.extend((u + offset, v + offset) for u, v in g.edges)
        offset += g.n
    return Graph(offset, tuple(edges))


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph with labeled sides; edges are (left index, right index)."""

    left: tuple
    right: tuple
    edges: tuple

    def __post_init__(self):
        nl, nr = len(self.left), len(self.right)
        for a, b in self.edges:
            if not (0 <= a < nl and 0 <= b < nr):
                raise ValidationError(f"edge ({a},{b}) does not respect the bipartition")
        object.__setattr__(self, "edges", tuple(sorted(set((int(a), int(b)) for a, b in self.edges))))

    @property
    def n_vertices(self) -> int:
        return len(self.left) + len(self.right)

    def left_degrees(self) -> np.ndarray:
        d = np.zeros(len(self.left), dtype=int)
        for a, _ in self.edges:
            d[a] += 1
        return d

    def neighborhood(self, lefts: Iterable[int]) -> set[int]:
        lefts = set(lefts)
        return {b for a, b in self.edges if a in lefts}

    def to_graph(self) -> Graph:
        """Flatten to a Graph: left vertices first, then right vertices."""
        off = len(self.left)
        return Graph(self.n_vertices, tuple((a, off + b) for a, b in self.edges))

    def to_json(self) -> dict:
        return {
            "left": [list(x) if isinstance(x, tuple) else x for x in self.left],
            "right": [list(x) if isinstance(x, tuple) else x for x in self.right],
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class Hypergraph:
    n: int
    hyperedges: tuple

    def __post_init__(self):
        clean = []
        for f in self.hyperedges:
            f = tuple(sorted(set(int(v) for v in f)))
            if not f:
                raise ValidationError("empty hyperedge")
            if f[0] < 0 or f[-1] >= self.n:
                raise ValidationError(f"hyperedge {f} outside [0,{self.n})")
            clean.append(f)
        object.__setattr__(self, "hyperedges", tuple(clean))

    @property
    def arity(self) -> int:
        return max((len(f) for f in self.hyperedges), default=0)

    def to_json(self) -> dict:
        return {"n": self.n, "hyperedges": [list(f) for f in self.hyperedges]}


def gnp_half(n: int, seed: int) -> Graph:
    """Sample G(n, 1/2): one fair bit per pair, pairs in lexicographic order."""
    if n < 0:
        raise ValidationError("n must be nonnegative")
    edge_ss, _ = np.random.SeedSequence(seed).spawn(2)
    return Graph(n, tuple(_half_edges(n, edge_ss)))


def _half_edges(n: int, edge_ss) -> list:
    pairs = list(combinations(range(n), 2))
    if not pairs:
        return []
    bits = _rng(edge_ss).integers(0, 2, size=len(pairs))
    return [p for p, b in zip(pairs, bits) if b]


def planted_clique(n: int, k: int, seed: int) -> tuple[Graph, tuple]:
    """G(n, 1/2) from the same edge stream as :func:`gnp_half`, plus a k-clique."""
    if not 0 <= k <= n:
        raise ValidationError(f"need 0 <= k <= n, got k={k}, n={n}")
    edge_ss, plant_ss = np.random.SeedSequence(seed).spawn(2)
    edges = set(_half_edges(n, edge_ss))
    planted = tuple(sorted(int(v) for v in _rng(plant_ss).choice(n, size=k, replace=False)))
    edges.update(combinations(planted, 2))
    return Graph(n, tuple(edges)), planted


# ---------------------------------------------------------------- codes


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % d for d in range(2, int(q**0.5) + 1))


def _prime_factors(x: int) -> list[int]:
    out, d = [], 2
    while d * d <= x:
        if x % d == 0:
            out.append(d)
            while x % d == 0:
                x //= d
        d += 1
    if x > 1:
        out.append(x)
    return out


def primitive_root(q: int) -> int:
    """Smallest primitive root modulo the prime ``q``."""
    if not is_prime(q):
        raise ValidationError(f"{q} is not prime")
    if q == 2:
        return 1
    factors = _prime_factors(q - 1)
    for g in range(2, q):
        if all(pow(g, (q - 1) // f, q) != 1 for f in factors):
            return g
    raise AssertionError("unreachable: every prime has a primitive root")


def rank_mod_p(mat: np.ndarray, p: int) -> int:
    """Rank over F_p by Gaussian elimination."""
    a = np.array(mat, dtype=np.int64) % p
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if a[r, c]), None)
        if pivot is None:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        a[rank] = a[rank] * pow(int(a[rank, c]), -1, p) % p
        for r in range(rows):
            if r != rank and a[r, c]:
                a[r] = (a[r] - a[r, c] * a[rank]) % p
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass(frozen=True)
class LinearCode:
    """Linear code over F_q spanned by the columns of ``generator`` (K x dim)."""

    q: int
    generator: tuple  # K rows, each a tuple of dim entries

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValidationError(f"q={self.q} must be prime")
        g = np.asarray(self.generator, dtype=np.int64)
        if g.ndim != 2 or g.shape[0] == 0:
            raise ValidationError("generator must be a nonempty K x dim matrix")
        g = g % self.q
        if rank_mod_p(g, self.q) != g.shape[1]:
            raise ValidationError("generator columns are not independent over F_q")
        object.__setattr__(self, "generator", tuple(tuple(int(x) for x in row) for row in g))

    @property
    def length(self) -> int:
        return len(self.generator)

    @property
    def dim(self) -> int:
        return len(self.generator[0])

    @property
    def size(self) -> int:
        return self.q**self.dim

    def matrix(self) -> np.ndarray:
        return np.asarray(self.generator, dtype=np.int64)

    def encode(self, message: Sequence[int]) -> tuple:
        return tuple(int(x) for x in self.matrix() @ np.asarray(message, dtype=np.int64) % self.q)

    def codewords(self, budget: Optional[int] = None) -> np.ndarray:
        """All q^dim codewords as rows, messages in lexicographic order."""
        check_budget(self.size, "codeword enumeration", budget)
        msgs = np.array(list(product(range(self.q), repeat=self.dim)), dtype=np.int64)
        return msgs @ self.matrix().T % self.q

    def to_json(self) -> dict:
        return {"q": self.q, "generator": [list(r) for r in self.generator]}


def vandermonde_code(q: int, D: int) -> LinearCode:
    """Length q-1 code with generator entries g^{i*j}, g the smallest primitive root.

    The code has dimension D-1 and is (D-1)-wise uniform.
    """
    if not is_prime(q):
        raise ValidationError(f"q={q} must be prime")
    if not 3 <= D <= q:
        raise ValidationError(f"need 3 <= D <= q, got D={D}, q={q}")
    g = primitive_root(q)
    gen = [[pow(g, i * j, q) for j in range(D - 1)] for i in range(q - 1)]
    return LinearCode(q, tuple(tuple(r) for r in gen))


def parity_code(K: int) -> LinearCode:
    """Even-weight binary code of length K: the K-XOR predicate."""
    if K < 2:
        raise ValidationError("parity code needs K >= 2")
    gen = [[1 if i == j else 0 for j in range(K - 1)] for i in range(K - 1)]
    gen.append([1] * (K - 1))
    return LinearCode(2, tuple(tuple(r) for r in gen))


def check_kwise_uniform(code: LinearCode, t: int, budget: Optional[int] = None) -> bool:
    """Exact check that every t-coordinate projection is uniform."""
    K, q, dim = code.length, code.q, code.dim
    if not 0 <= t <= K:
        raise ValidationError(f"t={t} outside [0, {K}]")
    check_budget(code.size * comb(K, t) * q**t, "k-wise uniformity check", budget)
    if t > dim:
        return False  # q^(dim-t) is not an integer count
    words = code.codewords(budget)
    expected = q ** (dim - t)
    weights = q ** np.arange(t)
    for coords in combinations(range(K), t):
        codes = words[:, list(coords)] @ weights if t else np.zeros(len(words), dtype=np.int64)
        counts = np.bincount(codes, minlength=q**t)
        if np.any(counts != expected):
            return False
    return True


def all_minors_nonsingular(code: LinearCode, rows: Optional[int] = None) -> bool:
    """Every ``rows``-row square submatrix of the generator has full rank over F_q."""
    g = code.matrix()
    k = code.dim if rows is None else rows
    return all(rank_mod_p(g[list(idx)], code.q) == k for idx in combinations(range(code.length), k))


# ---------------------------------------------------------------- CSPs


@dataclass(frozen=True)
class CspInstance:
    """Max K-CSP with predicates ``x_scope - shift in code``."""

    n: int
    scopes: tuple
    shifts: tuple
    code: LinearCode

    def __post_init__(self):
        scopes = tuple(tuple(int(v) for v in s) for s in self.scopes)
        shifts = tuple(tuple(int(b) % self.code.q for b in s) for s in self.shifts)
        if len(scopes) != len(shifts):
            raise ValidationError("scopes and shifts differ in length")
        for s, b in zip(scopes, shifts):
            if len(s) != self.code.length or len(b) != self.code.length:
                raise ValidationError(f"scope {s} does not match code length {self.code.length}")
            if len(set(s)) != len(s):
                raise ValidationError(f"scope {s} repeats a variable")
            if min(s) < 0 or max(s) >= self.n:
                raise ValidationError(f"scope {s} outside [0,{self.n})")
        object.__setattr__(self, "scopes", scopes)
        object.__setattr__(self, "shifts", shifts)

    @property
    def m(self) -> int:
        return len(self.scopes)

    @property
    def K(self) -> int:
        return self.code.length

    @property
    def q(self) -> int:
        return self.code.q

    def satisfying(self, i: int) -> list[tuple]:
        """Assignments to scope ``i`` (in scope order) that satisfy constraint ``i``."""
        cache = self.__dict__.setdefault("_sat_cache", {})
        if i not in cache:
            words = self.code.codewords()
            shift = np.asarray(self.shifts[i], dtype=np.int64)
            cache[i] = sorted(tuple(int(x) for x in w) for w in (words + shift) % self.q)
        return cache[i]

    def satisfied_count(self, assignment: Sequence[int]) -> int:
        count = 0
        for i, scope in enumerate(self.scopes):
            local = tuple(int(assignment[v]) for v in scope)
            if local in set(self.satisfying(i)):
                count += 1
        return count

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "K": self.K,
            "q": self.q,
            "scopes": [list(s) for s in self.scopes],
            "shifts": [list(b) for b in self.shifts],
            "generator": [list(r) for r in self.code.generator],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "CspInstance":
        if isinstance(data, str):
            data = json.loads(data)
        code = LinearCode(int(data["q"]), tuple(tuple(r) for r in data["generator"]))
        inst = cls(int(data["n"]), tuple(map(tuple, data["scopes"])), tuple(map(tuple, data["shifts"])), code)
        if "m" in data and int(data["m"]) != inst.m:
            raise ValidationError("m does not match the number of scopes")
        return inst


def random_csp(n: int, m: int, K: int, q: int, code: LinearCode, seed: int) -> CspInstance:
    """Independent constraints: uniform K-subset scope, uniform shift in F_q^K."""
    if K > n:
        raise ValidationError(f"K={K} exceeds n={n}")
    if code.length != K or code.q != q:
        raise ValidationError("code length/field does not match K/q")
    scopes, shifts = [], []
    for ss in np.random.SeedSequence(seed).spawn(m):
        rng = _rng(ss)
        scopes.append(tuple(sorted(int(v) for v in rng.choice(n, size=K, replace=False))))
        shifts.append(tuple(int(b) for b in rng.integers(0, q, size=K)))
    return CspInstance(n, tuple(scopes), tuple(shifts), code)


@dataclass(frozen=True)
class FactorGraph:
    """Constraint/variable incidence: edge (i, j) iff variable j is in scope i."""

    m: int
    n: int
    edges: tuple

    def scope(self, i: int) -> tuple:
        return tuple(j for a, j in self.edges if a == i)

    def constraint_degrees(self) -> np.ndarray:
        d = np.zeros(self.m, dtype=int)
        for i, _ in self.edges:
            d[i] += 1
        return d

    def variable_degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=int)
        for _, j in self.edges:
            d[j] += 1
        return d

    @property
    def n_vertices(self) -> int:
        return self.m + self.n

    @classmethod
    def from_scopes(cls, n: int, scopes: Sequence[Sequence[int]]) -> "FactorGraph":
        edges = tuple((i, int(j)) for i, s in enumerate(scopes) for j in sorted(s))
        return cls(len(scopes), n, edges)


def factor_graph(inst: CspInstance) -> FactorGraph:
    return FactorGraph.from_scopes(inst.n, inst.scopes)


def label_extended_graph(inst: CspInstance, beta: Optional[int] = None) -> BipartiteGraph:
    """Left: (constraint, satisfying assignment); right: (variable, letter, copy).

    Left vertex (i, alpha) joins (x, alpha_x, j) for every x in scope i and
    every copy j < beta. ``beta`` defaults to ceil(m / n).
    """
    if beta is None:
        beta = max(1, -(-inst.m // inst.n))
    check_budget(inst.m * inst.code.size, "label-extended graph", None)
    left = [(i, a) for i in range(inst.m) for a in inst.satisfying(i)]
    right = [(x, a, j) for x in range(inst.n) for a in range(inst.q) for j in range(beta)]
    rpos = {r: idx for idx, r in enumerate(right)}
    edges = []
    for li, (i, alpha) in enumerate(left):
        for x, a in zip(inst.scopes[i], alpha):
            for j in range(beta):
                edges.append((li, rpos[(x, a, j)]))
    return BipartiteGraph(tuple(left), tuple(right), tuple(edges))


@dataclass
class PlausibilityResult:
    status: str  # "holds", "violated" or "undecided"
    witness: Optional[tuple] = None
    checked: int = 0

    @property
    def holds(self) -> Optional[bool]:
        return {"holds": True, "violated": False}.get(self.status)

    def __iter__(self) -> Iterator:
        return iter((self.holds, self.witness))


def _plausible_bound(K_e: int, v: int, c: int, tau: float, zeta: float) -> bool:
    return v >= K_e - (tau - zeta) / 2 * c


def check_plausibility(
    fg: FactorGraph, tau: int, zeta: float, eta: float, budget: Optional[int] = None
) -> PlausibilityResult:
    """Check every tau-subgraph with at most 2*eta*n constraints is plausible.

    Only full-neighborhood subgraphs are enumerated: adding an edge to an
    already present variable raises e without raising v, and adding an edge
    to a new variable raises both, so for a fixed constraint set the full
    neighborhood is the hardest case. A constraint can appear only when its
    degree reaches tau.
    """
    cmax = min(fg.m, int(np.floor(2 * eta * fg.n + 1e-9)))
    scopes = [fg.scope(i) for i in range(fg.m)]
    eligible = [i for i in range(fg.m) if len(scopes[i]) >= tau]
    total = sum(comb(len(eligible), c) for c in range(1, min(cmax, len(eligible)) + 1))
    cap = enumeration_budget() if budget is None else budget
    if total > cap:
        return PlausibilityResult("undecided")
    masks = [sum(1 << j for j in s) for s in scopes]
    checked = 0
    for c in range(1, min(cmax, len(eligible)) + 1):
        for subset in combinations(eligible, c):
            checked += 1
            cover = 0
            e = 0
            for i in subset:
                cover |= masks[i]
                e += len(scopes[i])
            if not _plausible_bound(e, cover.bit_count(), c, tau, zeta):
                return PlausibilityResult("violated", subset, checked)
    return PlausibilityResult("holds", None, checked)


def plausibility_bruteforce(
    fg: FactorGraph, tau: int, zeta: float, eta: float
) -> tuple[bool, Optional[tuple]]:
    """Literal enumeration of tau-subgraphs (test oracle).

    Every edge subset in which each constraint keeps degree 0 or at least
    tau is an edge-induced tau-subgraph; each is tested directly.
    Returns the constraint set of the first violation found.
    """
    cmax = int(np.floor(2 * eta * fg.n + 1e-9))
    scopes = [fg.scope(i) for i in range(fg.m)]
    options = []
    for s in scopes:
        opts = [(0, 0)]
        for size in range(tau, len(s) + 1):
            for sub in combinations(s, size):
                opts.append((sum(1 << j for j in sub), size))
        options.append(opts)
    violation = None

    def rec(i, cover, e, chosen):
        nonlocal violation
        if violation is not None:
            return
        if len(chosen) > cmax:
            return
        if i == fg.m:
            if chosen and not _plausible_bound(e, cover.bit_count(), len(chosen), tau, zeta):
                violation = tuple(chosen)
            return
        for mask, size in options[i]:
            if size:
                rec(i + 1, cover | mask, e + size, chosen + [i])
            else:
                rec(i + 1, cover, e, chosen)

    rec(0, 0, 0, [])
    return violation is None, violation


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True)
class SpectralStats:
    adjacency: np.ndarray  # normalized adjacency eigenvalues, descending
    laplacian: np.ndarray  # normalized Laplacian eigenvalues, ascending

    def lambda_(self, r: int) -> float:
        """r-th smallest normalized Laplacian eigenvalue, 1-based."""
        return float(self.laplacian[r - 1])


def spectral_stats(g: Graph) -> SpectralStats:
    """Spectra of D^{-1/2} A D^{-1/2} and I minus it; isolated vertices use degree 1."""
    a = g.adjacency()
    d = a.sum(axis=1)
    d[d == 0] = 1.0
    s = 1.0 / np.sqrt(d)
    na = a * s[:, None] * s[None, :]
    adj = np.linalg.eigvalsh(na)[::-1]
    lap = np.linalg.eigvalsh(np.eye(g.n) - na)
    return SpectralStats(adj.copy(), lap)
