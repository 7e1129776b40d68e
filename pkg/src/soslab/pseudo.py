"""Pseudoexpectation operators and pseudocalibrated constructions.

A pseudoexpectation stores one value per monomial ``x_S`` of degree at
most ``degree``; polynomials are evaluated by linearity after
multilinearization. Pseudocalibrated values are exact ``Fraction``s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ValidationError, check_budget
from .instances import CspInstance, Graph, check_kwise_uniform
from .polycore import EMPTY, MultilinearPoly, key_from_str, key_to_str, make_key, subsets_upto
from .relaxations import BooleanProgram, SosSolution
from .sdpcore import SymMatrix, gram_vectors

Number = Union[int, float, Fraction]


@dataclass
class Pseudoexpectation:
    """Linear functional on multilinear polynomials of degree at most ``degree``."""

    n: int
    degree: int
    values: dict = field(default_factory=dict)

    def __getitem__(self, key) -> Number:
        key = tuple(key)
        if len(key) > self.degree:
            raise ValidationError(f"monomial of degree {len(key)} exceeds {self.degree}")
        try:
            return self.values[key]
        except KeyError:
            raise ValidationError(f"no value for monomial {key_to_str(key)}") from None

    def __call__(self, poly: MultilinearPoly) -> Number:
        return sum((coef * self[key] for key, coef in poly.items()), 0)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.values.values())

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
            return float(v)

        ordered = sorted(self.values.items(), key=lambda kv: (len(kv[0]), kv[0]))
        return {"n": self.n, "degree": self.degree, "values": {key_to_str(k): enc(v) for k, v in ordered}}

    @classmethod
    def from_json(cls, data: dict | str) -> "Pseudoexpectation":
        if isinstance(data, str):
            data = json.loads(data)
        values = {}
        for k, v in data["values"].items():
            values[key_from_str(k)] = Fraction(v) if isinstance(v, str) else float(v)
        n = int(data.get("n", 1 + max((k[-1] for k in values if k), default=-1)))
        return cls(n, int(data["degree"]), values)


def point_distribution_pe(n: int, points: Sequence[Sequence[int]], weights=None, degree: Optional[int] = None):
    """True expectation of a distribution over 0/1 points (uniform by default)."""
    pts = [tuple(int(x) for x in p) for p in points]
    if not pts:
        raise ValidationError("need at least one point")
    w = [Fraction(1, len(pts))] * len(pts) if weights is None else [Fraction(x) for x in weights]
    degree = n if degree is None else degree
    values = {S: sum((wi for p, wi in zip(pts, w) if all(p[v] for v in S)), Fraction(0)) for S in subsets_upto(n, degree)}
    return Pseudoexpectation(n, degree, values)


# ---------------------------------------------------------------- vectors <-> operators


def vectors_to_pe(sol: SosSolution, n: Optional[int] = None) -> Pseudoexpectation:
    """``E[x_T] = <V_phi, V_T>`` for every stored key; degree = solution level."""
    if EMPTY not in sol.vectors:
        raise ValidationError("solution has no V_phi")
    keys = [k for k in sol.keys if isinstance(k, tuple)]
    if n is None:
        n = 1 + max((k[-1] for k in keys if k), default=-1)
    phi = sol.vec(EMPTY)
    values = {}
    for T in subsets_upto(n, sol.level):
        values[T] = float(phi @ sol.vec(T))
    return Pseudoexpectation(n, sol.level, values)


def moment_matrix(pe: Pseudoexpectation, r: int) -> SymMatrix:
    """``M[S, T] = E[x_{S u T}]`` over subsets of size at most ``r``, canonical order."""
    if pe.degree < 2 * r:
        raise ValidationError(f"degree {pe.degree} pseudoexpectation cannot fill a level-{r} matrix")
    keys = subsets_upto(pe.n, r)
    D = len(keys)
    M = np.empty((D, D))
    for i, a in enumerate(keys):
        for j in range(i, D):
            M[i, j] = M[j, i] = float(pe[tuple(sorted(set(a) | set(keys[j])))])
    return SymMatrix.from_dense(M)


def pe_to_vectors(pe: Pseudoexpectation, r: Optional[int] = None, tol: float = 1e-8) -> SosSolution:
    """Gram factorization of the level-``r`` moment matrix.

    ``r`` defaults to ``degree // 4``; any ``r <= degree // 2`` is accepted.

    Raises:
        NotPSDError: the moment matrix has an eigenvalue below ``-tol``.
    """
    r = pe.degree // 4 if r is None else r
    M = moment_matrix(pe, r)
    vecs = gram_vectors(M, tol=tol)
    keys = subsets_upto(pe.n, r)
    vectors = {k: vecs[i] for i, k in enumerate(keys)}
    return SosSolution(r, vecs.shape[1], vectors, keys)


@dataclass
class PeReport:
    normalization: float
    constraint_violation: float
    min_eigenvalue: float
    worst: list = field(default_factory=list)  # (description, magnitude)

    def passes(self, tol: float) -> bool:
        return self.normalization <= tol and self.constraint_violation <= tol and self.min_eigenvalue >= -tol

    def to_json(self) -> dict:
        return {
            "normalization": self.normalization,
            "constraint_violation": self.constraint_violation,
            "min_eigenvalue": self.min_eigenvalue,
            "worst": [[d, m] for d, m in self.worst],
        }


def pe_check(pe: Pseudoexpectation, program: Optional[BooleanProgram] = None, top: int = 10) -> PeReport:
    """Measure normalization, constraint rows and moment-matrix positivity.

    For each equality ``q`` and monomial ``x_S`` with ``deg q + |S| <= degree``
    the violation is ``|E[q x_S]|``; for an inequality it is
    ``max(0, -E[q x_S])``. ``worst`` lists the largest offenders, with the
    most negative moment-matrix eigen-direction reported as a key list.
    """
    norm = abs(float(pe[EMPTY]) - 1.0)
    issues: list[tuple[str, float]] = []
    if program is not None:
        for label, polys, eq in (("eq", program.equalities, True), ("ineq", program.inequalities, False)):
            for i, q in enumerate(polys):
                for S in subsets_upto(pe.n, pe.degree - q.degree):
                    val = float(pe(q * MultilinearPoly({S: 1})))
                    mag = abs(val) if eq else max(0.0, -val)
                    if mag > 0:
                        issues.append((f"{label}{i} * x{key_to_str(S)}", mag))
    r = pe.degree // 2
    M = moment_matrix(pe, r).to_dense()
    w, v = np.linalg.eigh(M)
    if w[0] < 0:
        keys = subsets_upto(pe.n, r)
        support = [key_to_str(keys[i]) for i in np.argsort(-np.abs(v[:, 0]))[:3]]
        issues.append((f"moment matrix direction on {' '.join(support)}", float(-w[0])))
    issues.sort(key=lambda t: -t[1])
    viol = max((m for d, m in issues if not d.startswith("moment")), default=0.0)
    return PeReport(norm, viol, float(w[0]), issues[:top])


def square_value(pe: Pseudoexpectation, h: MultilinearPoly) -> Number:
    """``E[h^2]`` after multilinearization."""
    return pe(h * h)


# ---------------------------------------------------------------- planted clique


def pcal_clique_coeff(n: int, k: int, t: int, exact: bool = True) -> Number:
    """Probability that a uniform ``k``-set of ``[n]`` contains a fixed ``t``-set.

    Exact mode gives ``C(n-t, k-t) / C(n, k)``; otherwise ``(k/n)^t``.
    """
    if not 0 <= t <= n:
        raise ValidationError(f"t={t} outside [0, {n}]")
    if not exact:
        return (k / n) ** t
    if t > k:
        return Fraction(0)
    return Fraction(math.comb(n - t, k - t), math.comb(n, k))


def _edge_sign(g: Graph, u: int, v: int) -> int:
    return 1 if g.has_edge(u, v) else -1


def _covering_character_sum(g: Graph, W: tuple, must_cover: tuple) -> int:
    """Sum of chi_T(G) over edge sets T inside W whose vertices cover ``must_cover``.

    Inclusion-exclusion over the uncovered part: sum over T inside W - A of
    chi_T equals the product of (1 + G_e), which is 2^pairs on a clique and
    0 otherwise.
    """
    total = 0
    for size in range(len(must_cover) + 1):
        for A in combinations(must_cover, size):
            rest = [v for v in W if v not in A]
            pairs = list(combinations(rest, 2))
            if all(g.has_edge(u, v) for u, v in pairs):
                total += (-1) ** size * 2 ** len(pairs)
    return total


def pcal_clique_value(g: Graph, k: int, S: Sequence[int], tau: int, exact: bool = True) -> Number:
    """``sum over T with |S u V(T)| <= tau`` of ``coeff(|S u V(T)|) chi_T(G)``."""
    S = make_key(S)
    if len(S) > tau:
        return Fraction(0) if exact else 0.0
    others = [v for v in range(g.n) if v not in S]
    total = Fraction(0) if exact else 0.0
    for extra in range(tau - len(S) + 1):
        for R in combinations(others, extra):
            W = tuple(sorted(S + R))
            s = _covering_character_sum(g, W, R)
            if s:
                total += pcal_clique_coeff(g.n, k, len(W), exact) * s
    return total


def pcal_clique_pe(g: Graph, k: int, r: int, tau: int, exact: bool = True, budget: Optional[int] = None):
    """Truncated pseudocalibrated operator for planted clique, degree ``2r``."""
    if tau < 0:
        raise ValidationError("tau must be nonnegative")
    n = g.n
    n_sets = sum(math.comb(n, i) for i in range(min(2 * r, n) + 1))
    n_w = sum(math.comb(n, i) for i in range(min(tau, n) + 1))
    check_budget(n_sets * n_w, "pseudocalibration terms", budget)
    values = {S: pcal_clique_value(g, k, S, tau, exact) for S in subsets_upto(n, 2 * r)}
    return Pseudoexpectation(n, 2 * r, values)


def pcal_clique_literal(g: Graph, k: int, S: Sequence[int], tau: int, exact: bool = True, budget: Optional[int] = None):
    """Same value as :func:`pcal_clique_value`, by enumerating every edge set T."""
    S = make_key(S)
    n = g.n
    pairs = list(combinations(range(n), 2))
    total = Fraction(0) if exact else 0.0
    others = [v for v in range(n) if v not in S]
    for extra in range(max(0, tau - len(S)) + 1):
        for R in combinations(others, extra):
            W = tuple(sorted(S + R))
            inner = [p for p in pairs if p[0] in W and p[1] in W]
            check_budget(2 ** len(inner), "edge subsets", budget)
            for mask in range(2 ** len(inner)):
                T = [inner[i] for i in range(len(inner)) if mask >> i & 1]
                if set(S).union(*T) != set(W):
                    continue
                chi = 1
                for u, v in T:
                    chi *= _edge_sign(g, u, v)
                total += pcal_clique_coeff(n, k, len(W), exact) * chi
    return total if len(S) <= tau else (Fraction(0) if exact else 0.0)


def pcal_clique_oracle(n: int, k: int, S: Sequence[int], T: Iterable[tuple], budget: Optional[int] = None) -> Fraction:
    """``E[x_S chi_T(G)]`` under G(n, 1/2) with a planted uniform ``k``-clique.

    Enumerates every clique placement; an edge of ``T`` outside the clique is
    a fair coin and averages to zero.
    """
    S = set(make_key(S))
    T = [tuple(sorted(e)) for e in T]
    if len(set(T)) != len(T) or any(u == v for u, v in T):
        raise ValidationError("T must be a set of distinct vertex pairs")
    check_budget(math.comb(n, k), "clique placements", budget)
    hits = 0
    for C in combinations(range(n), k):
        c = set(C)
        if not S <= c:
            continue
        if all(u in c and v in c for u, v in T):
            hits += 1
    return Fraction(hits, math.comb(n, k))


# ---------------------------------------------------------------- CSP


def _pm_codewords(inst: CspInstance) -> np.ndarray:
    if inst.q != 2:
        raise ValidationError("CSP pseudocalibration is implemented for q = 2 only")
    return 1 - 2 * inst.code.codewords()  # bit 0 -> +1, bit 1 -> -1


def _group_positions(inst: CspInstance, T) -> dict:
    touched: dict[int, set] = {}
    for i, j in T:
        if not (0 <= i < inst.m and 0 <= j < inst.K):
            raise ValidationError(f"({i},{j}) is not a (constraint, position) pair")
        touched.setdefault(int(i), set()).add(int(j))
    return touched


def pcal_csp_coeff(inst: CspInstance, S: Sequence[int], T, method: str = "structural", budget=None) -> Fraction:
    """``E[prod_{i in S} y_i prod_{(i,j) in T} y_{t_ij} z_ij]`` under the planted model.

    ``y`` is uniform on {-1,1}^n and each constraint's ``z`` is a uniform
    codeword in ±1 form. The structural path returns zero when a touched
    constraint has at most two positions (pairwise-uniform code) or a
    variable appears an odd number of times; otherwise it multiplies the
    per-constraint Fourier coefficients of the code.
    """
    S = make_key(S)
    touched = _group_positions(inst, T)
    if method == "bruteforce":
        return _csp_coeff_brute(inst, S, touched, budget)
    if method != "structural":
        raise ValidationError(f"unknown method {method!r}")
    words = _pm_codewords(inst)
    if _pairwise_uniform(inst) and any(len(p) <= 2 for p in touched.values()):
        return Fraction(0)
    parity = np.zeros(inst.n, dtype=int)
    parity[list(S)] += 1
    for i, pos in touched.items():
        for j in pos:
            parity[inst.scopes[i][j]] += 1
    if np.any(parity % 2):
        return Fraction(0)
    value = Fraction(1)
    for i, pos in touched.items():
        prod = np.prod(words[:, sorted(pos)], axis=1)
        value *= Fraction(int(prod.sum()), len(words))
        if value == 0:
            break
    return value


def _pairwise_uniform(inst: CspInstance) -> bool:
    cache = inst.__dict__.setdefault("_pairwise_cache", {})
    if "pw" not in cache:
        cache["pw"] = inst.K >= 2 and check_kwise_uniform(inst.code, 2)
    return cache["pw"]


def _csp_coeff_brute(inst: CspInstance, S: tuple, touched: dict, budget) -> Fraction:
    words = _pm_codewords(inst)
    cons = sorted(touched)
    check_budget(2**inst.n * len(words) ** len(cons), "planted-model outcomes", budget)
    total = 0
    for y in product((1, -1), repeat=inst.n):
        ys = 1
        for v in S:
            ys *= y[v]
        for choice in product(range(len(words)), repeat=len(cons)):
            val = ys
            for i, w in zip(cons, choice):
                for j in touched[i]:
                    val *= y[inst.scopes[i][j]] * int(words[w][j])
            total += val
    return Fraction(total, 2**inst.n * len(words) ** len(cons))


def pcal_csp_pe(inst: CspInstance, r: int, min_degree: int = 3, budget=None) -> Pseudoexpectation:
    """Pseudocalibrated CSP operator over ±1 variables, degree ``2r``.

    ``E[x_S] = sum_T coeff(S, T) chi_T(b)`` with ``b_ij = (-1)^shift_ij`` and
    T ranging over edge sets of the factor graph whose touched constraints
    all have at least ``min_degree`` positions.
    """
    slots = [(i, j) for i in range(inst.m) for j in range(inst.K)]
    check_budget(2 ** len(slots) * sum(math.comb(inst.n, s) for s in range(2 * r + 1)), "Fourier terms", budget)
    b = {(i, j): 1 - 2 * (inst.shifts[i][j] % 2) for i, j in slots}
    candidates = []
    per_constraint = []
    for i in range(inst.m):
        opts = [()]
        for size in range(min_degree, inst.K + 1):
            opts += [tuple((i, j) for j in pos) for pos in combinations(range(inst.K), size)]
        per_constraint.append(opts)
    for parts in product(*per_constraint):
        T = tuple(p for part in parts for p in part)
        chi = 1
        for e in T:
            chi *= b[e]
        candidates.append((T, chi))
    values = {}
    for S in subsets_upto(inst.n, 2 * r):
        values[S] = sum((pcal_csp_coeff(inst, S, T) * chi for T, chi in candidates), Fraction(0))
    return Pseudoexpectation(inst.n, 2 * r, values)
