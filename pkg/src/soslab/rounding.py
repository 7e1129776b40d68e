"""Rounding and distinguishing algorithms on solved relaxations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Optional, Sequence

import numpy as np

from .errors import SolverError, ValidationError, check_budget
from .instances import Graph
from .polycore import EMPTY, subsets_upto
from .relaxations import RelaxationKind, SosSolution, build_relaxation, solve_relaxation
from .sdpcore import projection_residual

# ---------------------------------------------------------------- hyperplane rounding


@dataclass
class GwOutcome:
    best_cut: int
    mean_cut: float
    stderr: float
    best_assignment: np.ndarray

    def __iter__(self):
        return iter((self.best_cut, self.mean_cut))


def gw_round(vectors, g: Graph, samples: int = 1000, seed: int = 0) -> GwOutcome:
    """Random-hyperplane rounding: ``x_u = sign(<z, V_u>)`` for Gaussian ``z``.

    Args:
        vectors: ``(n, d)`` array, or a dict mapping ``(u,)`` or ``u`` to vectors.
        g: The graph being cut.
        samples: Number of independent hyperplanes.
        seed: Seed for the Gaussian directions.
    """
    if isinstance(vectors, dict):
        vectors = np.vstack([vectors[(u,)] if (u,) in vectors else vectors[u] for u in range(g.n)])
    V = np.asarray(vectors, dtype=float)
    if V.shape[0] != g.n:
        raise ValidationError(f"need one vector per vertex, got {V.shape[0]} for {g.n}")
    if np.any(np.linalg.norm(V, axis=1) < 1e-12):
        raise ValidationError("zero vector supplied")
    if samples < 1:
        raise ValidationError("samples must be positive")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((V.shape[1], samples))
    side = V @ Z >= 0
    edges = np.asarray(g.edges, dtype=int).reshape(-1, 2)
    cuts = (side[edges[:, 0]] != side[edges[:, 1]]).sum(axis=0)
    best = int(np.argmax(cuts))
    stderr = float(cuts.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return GwOutcome(int(cuts[best]), float(cuts.mean()), stderr, side[:, best].astype(int))


# ---------------------------------------------------------------- conditioners


@dataclass
class ConditionerSet:
    """Vectors ``U_{S,alpha}`` for every 0/1 assignment ``alpha`` on ``base``."""

    base: tuple
    vectors: dict  # alpha tuple (aligned with base) -> vector

    def norms2(self) -> dict:
        return {a: float(v @ v) for a, v in self.vectors.items()}


def _conditioner(sol: SosSolution, base: tuple, alpha: tuple) -> np.ndarray:
    ones = [u for u, a in zip(base, alpha) if a]
    zeros = [u for u, a in zip(base, alpha) if not a]
    out = np.zeros(sol.dim)
    for size in range(len(zeros) + 1):
        sign = -1.0 if size % 2 else 1.0
        for extra in combinations(zeros, size):
            out += sign * sol.vec(tuple(sorted(ones + list(extra))))
    return out


def build_conditioners(sol: SosSolution, S: Sequence[int]) -> ConditionerSet:
    """Inclusion-exclusion vectors ``U_{S,alpha} = sum_{S' <= T <= S} (-1)^{|T - S'|} V_T``.

    ``S'`` is the set where ``alpha`` is 1. ``S = ()`` yields ``{(): V_phi}``.
    """
    base = tuple(sorted(int(u) for u in S))
    if len(set(base)) != len(base):
        raise ValidationError("conditioning set repeats a vertex")
    vectors = {alpha: _conditioner(sol, base, alpha) for alpha in product((0, 1), repeat=len(base))}
    return ConditionerSet(base, vectors)


def conditioner_report(sol: SosSolution, n: int, max_size: int) -> dict:
    """Largest deviation from each of the five conditioner identities.

    Checks every base set of size at most ``max_size``:

    1. ``U_{S,1_S} = V_S``;
    2. summing over one vertex's bit gives the conditioner of the smaller set;
    3. assignments that clash on a shared vertex give orthogonal vectors;
    4. ``sum_alpha U_{S,alpha} = V_phi`` and ``sum_alpha ||U_{S,alpha}||^2 = 1``;
    5. inner products depend only on the union set and merged assignment.
    """
    sets = subsets_upto(n, max_size)
    cond = {S: build_conditioners(sol, S) for S in sets}
    phi = sol.vec(EMPTY)
    err = dict.fromkeys(("all_ones", "marginal", "clash", "total", "split"), 0.0)
    for S, cs in cond.items():
        err["all_ones"] = max(err["all_ones"], float(np.abs(cs.vectors[(1,) * len(S)] - sol.vec(S)).max()))
        total = sum(cs.vectors.values())
        norm_sum = sum(float(v @ v) for v in cs.vectors.values())
        err["total"] = max(err["total"], float(np.abs(total - phi).max()), abs(norm_sum - 1.0))
        for pos, u in enumerate(S):
            smaller = S[:pos] + S[pos + 1 :]
            for alpha in product((0, 1), repeat=len(smaller)):
                pair = [alpha[:pos] + (b,) + alpha[pos:] for b in (0, 1)]
                s = cs.vectors[pair[0]] + cs.vectors[pair[1]]
                err["marginal"] = max(err["marginal"], float(np.abs(s - cond[smaller].vectors[alpha]).max()))

    labels, mats = [], []
    for S, cs in cond.items():
        for alpha, v in cs.vectors.items():
            labels.append(dict(zip(S, alpha)))
            mats.append(v)
    U = np.vstack(mats)
    gram = U @ U.T
    groups: dict = {}
    for i, a in enumerate(labels):
        for j in range(i, len(labels)):
            b = labels[j]
            if any(a[u] != b[u] for u in a.keys() & b.keys()):
                err["clash"] = max(err["clash"], abs(float(gram[i, j])))
                continue
            merged = tuple(sorted({**a, **b}.items()))
            lo, hi = groups.get(merged, (np.inf, -np.inf))
            groups[merged] = (min(lo, gram[i, j]), max(hi, gram[i, j]))
    err["split"] = max((float(hi - lo) for lo, hi in groups.values()), default=0.0)
    return err


# ---------------------------------------------------------------- column selection


@dataclass
class ColumnSelection:
    indices: tuple
    residual: float


def select_columns(columns, r: int, r_prime: int, mode: str = "exhaustive", budget: Optional[int] = None) -> ColumnSelection:
    """Pick ``r_prime`` columns leaving the least projection residual.

    ``columns`` is a 2-D array whose columns are the vectors. Exhaustive
    mode scans every subset; greedy mode adds one column at a time.
    """
    X = np.asarray(columns, dtype=float)
    m = X.shape[1]
    if r_prime > m:
        raise ValidationError(f"r' = {r_prime} exceeds the {m} available columns")
    if r_prime < r:
        raise ValidationError("r' must be at least r")
    if mode == "exhaustive":
        check_budget(math.comb(m, r_prime), "column subsets", budget)
        best = min(combinations(range(m), r_prime), key=lambda c: projection_residual(X, c))
    elif mode == "greedy":
        chosen: list[int] = []
        for _ in range(r_prime):
            rest = [j for j in range(m) if j not in chosen]
            chosen.append(min(rest, key=lambda j: projection_residual(X, chosen + [j])))
        best = tuple(sorted(chosen))
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return ColumnSelection(tuple(best), projection_residual(X, best))


def column_selection_bound(columns, r: int, r_prime: int) -> float:
    """``(r'+1)/(r'-r+1)`` times the squared singular values beyond the ``r``-th."""
    sv = np.linalg.svd(np.asarray(columns, dtype=float), compute_uv=False)
    return (r_prime + 1) / (r_prime - r + 1) * float(np.sum(sv[r:] ** 2))


# ---------------------------------------------------------------- propagation rounding


@dataclass
class RoundingOutcome:
    """Best-of-trials propagation rounding, with trial averages."""

    chosen: tuple
    value: int
    S: tuple
    alpha: tuple
    probabilities: np.ndarray
    mean_value: float = 0.0
    mean_size: float = 0.0
    expected_size: float = 0.0
    diagnostic: float = 0.0
    degree: int = 0
    trials: int = 0
    sizes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "chosen": list(self.chosen),
            "value": self.value,
            "S": list(self.S),
            "alpha": list(self.alpha),
            "probabilities": self.probabilities.tolist(),
            "mean_value": self.mean_value,
            "mean_size": self.mean_size,
            "expected_size": self.expected_size,
            "diagnostic": self.diagnostic,
            "degree": self.degree,
            "trials": self.trials,
        }


def _cut_size(g: Graph, members: np.ndarray) -> int:
    e = np.asarray(g.edges, dtype=int).reshape(-1, 2)
    return int(np.sum(members[e[:, 0]] != members[e[:, 1]]))


def inclusion_probabilities(sol: SosSolution, cs: ConditionerSet, alpha: tuple, n: int) -> np.ndarray:
    """``<U_{S,alpha}, V_u> / ||U_{S,alpha}||^2`` per vertex, clipped to [0, 1]."""
    U = cs.vectors[alpha]
    nu = float(U @ U)
    if nu < 1e-12:
        raise ValidationError("conditioner has (near) zero norm")
    V = np.vstack([sol.vec((u,)) for u in range(n)])
    p = np.clip(V @ U / nu, 0.0, 1.0)
    for u, a in zip(cs.base, alpha):
        p[u] = float(a)
    return p


def gs_round(
    sol: SosSolution,
    g: Graph,
    k: int,
    r: int,
    r_prime: int,
    eps: float,
    seed: int = 0,
    trials: int = 50,
    allow_irregular: bool = False,
    S: Optional[Sequence[int]] = None,
) -> RoundingOutcome:
    """Propagation rounding of a minimum-bisection solution.

    Picks ``S`` of size ``r_prime`` minimizing ``sum_u ||P_perp V_u||^2`` (the
    projection onto the complement of ``span{V_u : u in S}``), draws
    ``alpha`` with probability ``||U_{S,alpha}||^2`` and includes each vertex
    independently with its conditional probability.

    ``diagnostic`` is ``d * sum_u ||P_perp V_u||^2`` with ``d`` the degree.
    Irregular graphs are refused unless ``allow_irregular``, in which case
    ``d`` is the minimum degree (the bound chain still holds since the
    unnormalized Laplacian dominates ``d_min`` times the normalized one).
    """
    n = g.n
    if not g.is_regular() and not allow_irregular:
        raise ValidationError("gs_round needs a regular graph (pass allow_irregular to use the minimum degree)")
    if sol.level < r_prime:
        raise ValidationError(f"solution level {sol.level} is below r' = {r_prime}")
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    d = int(g.degrees().min()) if n else 0
    X = np.column_stack([sol.vec((u,)) for u in range(n)])
    if S is None:
        mode = "exhaustive" if math.comb(n, r_prime) <= 10**5 else "greedy"
        S = select_columns(X, r, r_prime, mode).indices
    S = tuple(sorted(S))
    diagnostic = d * projection_residual(X, S)
    cs = build_conditioners(sol, S)
    alphas = list(cs.vectors)
    weights = np.array([max(float(cs.vectors[a] @ cs.vectors[a]), 0.0) for a in alphas])
    weights[weights < 1e-12] = 0.0
    if weights.sum() <= 0:
        raise SolverError("every conditioner has zero norm")
    weights /= weights.sum()
    probs = {a: inclusion_probabilities(sol, cs, a, n) for a, w in zip(alphas, weights) if w > 0}
    expected_size = float(sum(w * probs[a].sum() for a, w in zip(alphas, weights) if w > 0))

    rng = np.random.default_rng(seed)
    best = None
    values, sizes = [], []
    for _ in range(trials):
        a = alphas[rng.choice(len(alphas), p=weights)]
        p = probs[a]
        members = rng.random(n) < p
        val = _cut_size(g, members)
        values.append(val)
        sizes.append(int(members.sum()))
        if best is None or val < best[1]:
            best = (members, val, a, p)
    members, val, a, p = best
    return RoundingOutcome(
        chosen=tuple(int(u) for u in np.flatnonzero(members)),
        value=val,
        S=S,
        alpha=a,
        probabilities=p,
        mean_value=float(np.mean(values)),
        mean_size=float(np.mean(sizes)),
        expected_size=expected_size,
        diagnostic=float(diagnostic),
        degree=d,
        trials=trials,
        sizes=sizes,
    )


# ---------------------------------------------------------------- clique conditioning


def condition_on_vertex(sol: SosSolution, g: Graph, w: int) -> tuple[SosSolution, Graph, list]:
    """Restrict a clique solution to the neighborhood of ``w``.

    Returns ``(U, G_w, ids)`` with ``U_S = V_{S + w} / ||V_w||`` on the graph
    induced by the neighbors of ``w``; ``ids[i]`` is the original vertex of
    new vertex ``i``. The level drops by one.
    """
    nw = sol.norm2((w,))
    if nw <= 1e-10:
        raise ValidationError(f"vertex {w} has a zero vector")
    if sol.level < 1:
        raise ValidationError("solution level must be at least 1")
    gw, ids = g.induced(g.neighbors(w))
    level = sol.level - 1
    scale = 1.0 / math.sqrt(nw)
    keys = subsets_upto(gw.n, level)
    vectors = {}
    for key in keys:
        orig = tuple(sorted([ids[i] for i in key] + [w]))
        vectors[key] = sol.vec(orig) * scale
    return SosSolution(level, sol.dim, vectors, keys, {"conditioned_on": w}), gw, ids


# ---------------------------------------------------------------- planted clique


def planted_threshold(n: int, r: int, eps: float) -> float:
    """``4 sqrt(n) / ((1 - eps) sqrt 2)^(r + 1)``."""
    return 4.0 * math.sqrt(n) / ((1.0 - eps) * math.sqrt(2.0)) ** (r + 1)


@dataclass
class Distinction:
    label: str
    frac: float
    threshold: float

    def __str__(self) -> str:
        return self.label


def distinguish_planted(g: Graph, r: int, eps: float, tol: float = 1e-6, max_iter: int = 50000) -> Distinction:
    """Say "planted" iff the level-``r`` clique value exceeds the threshold."""
    rel = build_relaxation(RelaxationKind.CLIQUE, g, {}, r)
    sol, frac = solve_relaxation(rel, tol=tol, max_iter=max_iter)
    if not sol.info["converged"]:
        raise SolverError("clique relaxation did not converge")
    thr = planted_threshold(g.n, r, eps)
    return Distinction("planted" if frac > thr else "random", frac, thr)
