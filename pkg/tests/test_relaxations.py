import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from soslab.errors import BudgetExceeded, ValidationError
from soslab.instances import (
    Graph,
    complete_graph,
    cycle_graph,
    disjoint_union,
    empty_graph,
    gnp_half,
    parity_code,
    random_csp,
)
from soslab.polycore import MultilinearPoly
from soslab.reductions import brute_force_opt
from soslab.relaxations import (
    BooleanProgram,
    SosSolution,
    build_relaxation,
    integral_solution,
    lovasz_theta,
    objective_value,
    solve_relaxation,
    union_consistency_error,
    verify_solution,
)

SLOW = settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def solve(kind, inst, r, **params):
    rel = build_relaxation(kind, inst, params, r)
    sol, frac = solve_relaxation(rel, tol=1e-7)
    assert sol.info["converged"]
    return rel, sol, frac


def test_clique_examples():
    assert solve("clique", complete_graph(3), 1)[2] == pytest.approx(3.0, abs=1e-4)
    assert solve("clique", empty_graph(3), 1)[2] == pytest.approx(1.0, abs=1e-4)


def test_maxcut_c5():
    frac = solve("maxcut_gw", cycle_graph(5), 1)[2]
    assert frac == pytest.approx(2.5 * (1 + np.cos(np.pi / 5)), abs=1e-3)


def test_clique_level1_below_theta_of_complement():
    g = gnp_half(12, 7)
    frac = solve("clique", g, 1)[2]
    assert frac <= lovasz_theta(g.complement()) + 1e-3


def test_dks_and_bisection_examples():
    assert solve("dks", cycle_graph(4), 2, k=2)[2] >= 1 - 1e-3
    two_k4 = disjoint_union(complete_graph(4), complete_graph(4))
    assert solve("bisection", two_k4, 2, k=4)[2] <= 1e-2


def test_pair_kinds_reject_level_one():
    for kind in ("dks", "bisection"):
        with pytest.raises(ValidationError, match="r >= 2"):
            build_relaxation(kind, cycle_graph(4), {"k": 2}, 1)


def test_csp_label_budget():
    inst = random_csp(40, 5, 3, 2, parity_code(3), 0)
    with pytest.raises(BudgetExceeded):
        build_relaxation("csp", inst, {}, 3)


def test_structure_and_serialization():
    rel = build_relaxation("clique", cycle_graph(4), {}, 2)
    assert rel.keys[0] == ()
    assert len(rel.keys) == 1 + 4 + 6
    data = json.loads(json.dumps(rel.to_json()))
    assert data["kind"] == "clique" and data["level"] == 2 and data["keys"][0] == "[]"
    sol = integral_solution(rel, [1, 1, 0, 0])
    back = SosSolution.from_json(json.loads(json.dumps(sol.to_json())))
    assert back.keys == sol.keys


def test_verify_solution_reports():
    rel, sol, _ = solve("clique", cycle_graph(5), 2)
    assert verify_solution(rel, sol, 1e-4) == []
    bad = SosSolution(sol.level, sol.dim, dict(sol.vectors), list(sol.keys))
    bad.vectors[(0,)] = 2 * bad.vectors[(0,)]
    assert any("consistency" in label or "norm" in label for label, _ in verify_solution(rel, bad, 1e-4))
    exact = integral_solution(rel, [1, 1, 0, 0, 0])
    assert verify_solution(rel, exact, 1e-12) == []
    assert objective_value(rel, exact) == pytest.approx(2.0)


def test_union_consistency_of_solved_solution():
    _, sol, _ = solve("mis", cycle_graph(6), 2)
    assert union_consistency_error(sol) <= 1e-5


def test_generic_program():
    x0, x1 = MultilinearPoly({(0,): 1}), MultilinearPoly({(1,): 1})
    prog = BooleanProgram(2, x0 + x1, "max", equalities=(x0 * x1,))
    assert solve("generic", prog, 2)[2] == pytest.approx(1.0, abs=1e-4)


graphs = st.builds(
    lambda n, seed: gnp_half(n, seed), st.integers(3, 6), st.integers(0, 10_000)
)


@SLOW
@given(graphs)
def test_dominance_clique_mis_maxcut(g: Graph):
    for kind in ("clique", "mis"):
        assert solve(kind, g, 2)[2] >= brute_force_opt(kind, g) - 1e-3
    if g.edges:
        assert solve("maxcut_gw", g, 1)[2] >= brute_force_opt("maxcut_gw", g) - 1e-3


@SLOW
@given(graphs)
def test_dominance_dks_bisection(g: Graph):
    k = g.n // 2
    assert solve("dks", g, 2, k=k)[2] >= brute_force_opt("dks", g, k) - 1e-3
    assert solve("bisection", g, 2, k=k)[2] <= brute_force_opt("bisection", g, k) + 1e-3


@SLOW
@given(st.integers(0, 10_000))
def test_dominance_csp(seed):
    inst = random_csp(5, 4, 3, 2, parity_code(3), seed)
    assert solve("csp", inst, 2)[2] >= brute_force_opt("csp", inst) - 1e-3


@SLOW
@given(graphs)
def test_level_monotone(g: Graph):
    for kind in ("clique", "mis"):
        assert solve(kind, g, 2)[2] <= solve(kind, g, 1)[2] + 1e-3
    k = g.n // 2
    assert solve("dks", g, 3, k=k)[2] <= solve("dks", g, 2, k=k)[2] + 1e-3
