"""Acceptance suite: one check per numbered criterion.

Each ``criterion_*`` function returns ``(passed, detail)``; the wall-clock
limit is checked on top. Under pytest every criterion prints one
``ACCEPTANCE`` line in the terminal summary. Running this file directly
prints the same lines without pytest.
"""

from __future__ import annotations

import time
from itertools import combinations, permutations

import numpy as np
import pytest

from soslab.instances import (
    FactorGraph,
    Graph,
    all_minors_nonsingular,
    check_kwise_uniform,
    check_plausibility,
    complete_graph,
    cycle_graph,
    disjoint_union,
    empty_graph,
    gnp_half,
    parity_code,
    planted_clique,
    plausibility_bruteforce,
    random_csp,
    spectral_stats,
    vandermonde_code,
)
from soslab.polycore import MultilinearPoly, subsets_upto
from soslab.pseudo import (
    pcal_clique_coeff,
    pcal_clique_oracle,
    pcal_csp_coeff,
    pe_to_vectors,
    square_value,
    vectors_to_pe,
)
from soslab.reductions import brute_force_opt, csp_to_dks, csp_to_ssbve, hyper_tuple_bound
from soslab.relaxations import build_relaxation, lovasz_theta, objective_value, solve_relaxation, verify_solution
from soslab.rounding import conditioner_report, distinguish_planted, gs_round, gw_round, select_columns
from soslab.sdpcore import hw_pairing_bound

RESULTS: list[str] = []


def _solve(kind, inst, r, tol=1e-6, max_iter=50000, **params):
    rel = build_relaxation(kind, inst, params, r)
    sol, frac = solve_relaxation(rel, tol=tol, max_iter=max_iter)
    return rel, sol, frac


def criterion_1():
    vals = {
        "K8": (lovasz_theta(complete_graph(8), "primal"), lovasz_theta(complete_graph(8), "dual"), 1.0, 1e-3),
        "E10": (lovasz_theta(empty_graph(10), "primal"), lovasz_theta(empty_graph(10), "dual"), 10.0, 1e-3),
        "C5": (lovasz_theta(cycle_graph(5), "primal"), lovasz_theta(cycle_graph(5), "dual"), 2.2360, 2e-3),
    }
    ok = all(abs(p - want) <= tol and abs(d - want) <= tol for p, d, want, tol in vals.values())
    return ok, " ".join(f"{k}={p:.5f}/{d:.5f}" for k, (p, d, _, _) in vals.items())


def criterion_2():
    worst = -np.inf
    good = 0
    for s in range(50):
        g = gnp_half(20, s)
        # degenerate seeds converge sublinearly; 1e-5 is still far inside the 1e-3 margin
        frac = _solve("clique", g, 1, tol=1e-5)[2]
        th = lovasz_theta(g.complement(), tol=1e-5)
        worst = max(worst, frac - th)
        good += frac <= th + 1e-3
    return good == 50, f"{good}/50 within, max FRAC-theta {worst:.2e}"


def criterion_3():
    parts, ok = [], True
    for n in (50, 100):
        fracs = [_solve("clique", gnp_half(n, s), 1)[2] for s in range(20)]
        ratio = float(np.median(fracs)) / np.sqrt(n)
        ok &= 1.5 <= ratio <= 2.6
        parts.append(f"n={n} median/sqrt(n)={ratio:.3f}")
    return ok, " ".join(parts) + " (band [1.5, 2.6])"


def criterion_4():
    worst = -np.inf
    for s in range(10):
        g = gnp_half(25, s)
        worst = max(worst, _solve("clique", g, 2)[2] - _solve("clique", g, 1)[2])
    return worst <= 1e-3, f"max(level2 - level1) = {worst:.2e}"


def criterion_5():
    worst = np.inf
    for s in range(10):
        g = gnp_half(20, s)
        _, sol, frac = _solve("maxcut_gw", g, 1, tol=1e-7)
        vecs = np.vstack([sol.vec((u,)) for u in range(g.n)])
        worst = min(worst, gw_round(vecs, g, samples=2000, seed=s).mean_cut / frac)
    return worst >= 0.85, f"min mean_cut/FRAC = {worst:.4f}"


def criterion_6():
    two = disjoint_union(complete_graph(6), complete_graph(6))
    g = Graph(12, two.edges + ((5, 6),))
    _, sol, frac = _solve("bisection", g, 3, tol=1e-7, k=6)
    rep = conditioner_report(sol, 12, 2)
    a = max(rep.values()) <= 1e-4
    out = gs_round(sol, g, 6, 1, 3, 0.2, seed=0, trials=500, allow_irregular=True)
    b = abs(np.mean(out.sizes) - 6) <= 0.5
    bound = frac / ((1 - 0.2) * spectral_stats(g).lambda_(2))
    c = out.diagnostic <= bound + 1e-3
    best = gs_round(sol, g, 6, 1, 3, 0.2, seed=1, trials=50, allow_irregular=True).value
    d = best <= 2
    detail = (f"(a) max bullet err {max(rep.values()):.1e} (b) mean|R'|={np.mean(out.sizes):.3f} "
              f"(c) {out.diagnostic:.4f} <= {bound:.4f} (d) best cut {best}")
    return a and b and c and d, detail


def criterion_7():
    rng = np.random.default_rng(7)
    good = 0
    for _ in range(50):
        x = rng.standard_normal((8, 12))
        tail = np.sum(np.linalg.svd(x, compute_uv=False)[2:] ** 2)
        good += select_columns(x, 2, 4, "exhaustive").residual <= 5 / 3 * tail * (1 + 1e-9)
    return good == 50, f"{good}/50 within the 5/3 bound"


def criterion_8():
    rng = np.random.default_rng(8)
    bound_ok = exact_ok = 0
    for i in range(100):
        d = 4 + i % 5
        a, b = rng.standard_normal((2, d, d))
        a, b = (a + a.T) / 2, (b + b.T) / 2
        hw = hw_pairing_bound(a, b)
        bound_ok += hw <= np.linalg.norm(a - b) ** 2 + 1e-9
        if d == 4:
            la, lb = np.linalg.eigvalsh(a), np.linalg.eigvalsh(b)
            best = min(sum((la[j] - lb[p[j]]) ** 2 for j in range(4)) for p in permutations(range(4)))
            exact_ok += abs(hw - best) <= 1e-12
    return bound_ok == 100 and exact_ok == 20, f"bound {bound_ok}/100, permutation match {exact_ok}/20"


def criterion_9():
    c53, c74 = vandermonde_code(5, 3), vandermonde_code(7, 4)
    checks = [check_kwise_uniform(c53, 2), check_kwise_uniform(c74, 3),
              all_minors_nonsingular(c53), all_minors_nonsingular(c74)]
    return all(checks), f"uniform(5,3;2)={checks[0]} uniform(7,4;3)={checks[1]} minors={checks[2]}/{checks[3]}"


def criterion_10():
    rng = np.random.default_rng(10)
    agree = 0
    for _ in range(100):
        n, m, K = int(rng.integers(4, 13)), int(rng.integers(0, 9)), int(rng.choice([3, 4]))
        K = min(K, n)
        scopes = [tuple(sorted(rng.choice(n, size=K, replace=False).tolist())) for _ in range(m)]
        fg = FactorGraph.from_scopes(n, scopes)
        tau, zeta, eta = int(rng.choice([3, 4])), float(rng.uniform(0.05, 0.9)), float(rng.uniform(0.05, 0.5))
        agree += check_plausibility(fg, tau, zeta, eta).holds == plausibility_bruteforce(fg, tau, zeta, eta)[0]
    dup = check_plausibility(FactorGraph.from_scopes(3, [(0, 1, 2), (0, 1, 2)]), 3, 0.1, 1.0)
    ok = agree == 100 and dup.holds is False and dup.witness == (0, 1)
    return ok, f"{agree}/100 agree, duplicate witness {dup.witness}"


def _first_unsat_xor(n=10, m=8):
    for seed in range(10_000):
        inst = random_csp(n, m, 3, 2, parity_code(3), seed)
        opt = brute_force_opt("csp", inst)
        if opt < m:
            return seed, inst, opt
    raise RuntimeError("no unsatisfiable instance found")


def criterion_11():
    seed, inst, opt = _first_unsat_xor()
    _, sol, frac = _solve("csp", inst, 2, tol=1e-6, max_iter=15_000)
    conv = sol.info["converged"]
    return abs(frac - inst.m) <= 1e-2, f"seed {seed}: OPT={opt}, level-2 FRAC={frac:.4f} (target m={inst.m}, converged={conv})"


def _tiny_source():
    inst = random_csp(4, 2, 2, 2, parity_code(2), 0)
    _, sol, _ = _solve("csp", inst, 4, tol=1e-9)
    return inst, sol


def criterion_12():
    inst, sol = _tiny_source()
    red, mapped = csp_to_dks(inst, sol)
    rel = build_relaxation("dks", red.graph, {"k": red.k}, mapped.level)
    viol = verify_solution(rel, mapped, 1e-3)
    obj = objective_value(rel, mapped)
    target = red.delta * inst.m * inst.K
    sred, smapped = csp_to_ssbve(inst, source_sol=sol, level=1)
    srel = build_relaxation("ssbve", sred.bipartite, {"l": sred.l}, smapped.level)
    sviol = verify_solution(srel, smapped, 1e-3)
    ok = not viol and abs(obj - target) <= 1e-3 and not sviol
    return ok, f"DkS violations {len(viol)}, objective {obj:.6f} vs {target}; SSBVE violations {len(sviol)}"


def criterion_13():
    worst = np.inf
    for g in (complete_graph(4), cycle_graph(5)):
        _, sol, _ = _solve("dks", g, 4, tol=1e-7, k=3)
        for p in (0, 1):
            lhs, rhs = hyper_tuple_bound(sol, g.edges, p)
            worst = min(worst, lhs - rhs)
    return worst >= -1e-3, f"min(lhs - rhs) = {worst:.2e}"


def criterion_14():
    _, sol, _ = _solve("clique", cycle_graph(5), 4, tol=1e-10)
    pe = vectors_to_pe(sol)
    back = pe_to_vectors(pe, 2)
    err = max(abs(back.vec(a) @ back.vec(b) - pe[tuple(sorted(set(a) | set(b)))]) for a in back.keys for b in back.keys)
    rng = np.random.default_rng(14)
    low = np.inf
    for _ in range(30):
        h = MultilinearPoly({S: float(rng.standard_normal()) for S in subsets_upto(5, 2)})
        low = min(low, square_value(pe, h))
    return err <= 1e-8 and low >= -1e-6, f"round-trip moment error {err:.1e}, min E[h^2] {low:.3e}"


def criterion_15():
    mismatches = checked = 0
    for n in range(2, 6):
        pairs = list(combinations(range(n), 2))
        for k in range(1, min(3, n) + 1):
            for S in subsets_upto(n, 2):
                for size in range(4):
                    for T in combinations(pairs, size):
                        got = pcal_clique_oracle(n, k, S, T)
                        t = len(set(S).union(*T))
                        if len(S) > k:
                            mismatches += got != 0
                        elif t <= k:
                            mismatches += got != pcal_clique_coeff(n, k, t)
                        checked += 1
    sixth = pcal_clique_oracle(4, 2, (), [(1, 2)]) == pcal_clique_coeff(4, 2, 2)
    rng = np.random.default_rng(15)
    agree = low_degree = odd = 0
    for _ in range(200):
        n, m = int(rng.integers(3, 9)), int(rng.integers(1, 4))
        inst = random_csp(n, m, 3, 2, parity_code(3), int(rng.integers(10**6)))
        slots = [(i, j) for i in range(m) for j in range(3)]
        T = [slots[s] for s in np.flatnonzero(rng.random(len(slots)) < 0.6)]
        if rng.random() < 0.5:
            S = tuple(sorted({inst.scopes[i][j] for i, j in T}))
        else:
            S = tuple(sorted(rng.choice(n, size=int(rng.integers(0, 4)), replace=False).tolist()))
        fast, slow = pcal_csp_coeff(inst, S, T), pcal_csp_coeff(inst, S, T, "bruteforce")
        agree += fast == slow
        per = {}
        for i, _ in T:
            per[i] = per.get(i, 0) + 1
        par = np.zeros(n, dtype=int)
        par[list(S)] += 1
        for i, j in T:
            par[inst.scopes[i][j]] += 1
        if any(c <= 2 for c in per.values()):
            low_degree += slow == 0
        elif np.any(par % 2):
            odd += slow == 0
    ok = mismatches == 0 and sixth and agree == 200 and low_degree > 0 and odd > 0
    return ok, (f"clique {checked} queries, {mismatches} mismatches, 1/6 case {sixth}; csp {agree}/200 agree, "
                f"degree<=2 zeros {low_degree}, odd-degree zeros {odd}")


def criterion_16():
    null = sum(distinguish_planted(gnp_half(100, s), 1, 0.1).label == "random" for s in range(20))
    planted = sum(distinguish_planted(planted_clique(100, 40, s)[0], 1, 0.1).label == "planted" for s in range(20))
    return null >= 18 and planted >= 18, f"G(100,1/2) {null}/20, planted k=40 {planted}/20"


CRITERIA = {
    1: (criterion_1, 10), 2: (criterion_2, 120), 3: (criterion_3, 600), 4: (criterion_4, 900),
    5: (criterion_5, 120), 6: (criterion_6, 300), 7: (criterion_7, 60), 8: (criterion_8, 30),
    9: (criterion_9, 30), 10: (criterion_10, 300), 11: (criterion_11, 300), 12: (criterion_12, 600),
    13: (criterion_13, 300), 14: (criterion_14, 120), 15: (criterion_15, 300), 16: (criterion_16, 600),
}


def run_criterion(num: int) -> tuple[bool, str]:
    fn, limit = CRITERIA[num]
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < limit
    line = f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'} [{elapsed:7.1f}s / {limit}s] {detail}"
    RESULTS.append(line)
    return ok, line


@pytest.mark.acceptance
@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num):
    ok, line = run_criterion(num)
    assert ok, line


if __name__ == "__main__":
    import sys

    chosen = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    for num in chosen:
        print(run_criterion(num)[1], flush=True)
