import numpy as np
import pytest

from soslab.errors import ValidationError
from soslab.instances import Graph, complete_graph, cycle_graph, disjoint_union, gnp_half
from soslab.relaxations import build_relaxation, integral_solution, solve_relaxation, verify_solution
from soslab.rounding import (
    build_conditioners,
    column_selection_bound,
    condition_on_vertex,
    conditioner_report,
    distinguish_planted,
    gs_round,
    gw_round,
    planted_threshold,
    select_columns,
)
from soslab.sdpcore import projection_residual


@pytest.fixture(scope="module")
def two_k4():
    g = disjoint_union(complete_graph(4), complete_graph(4))
    rel = build_relaxation("bisection", g, {"k": 4}, 2)
    sol, _ = solve_relaxation(rel, tol=1e-8)
    return g, sol


@pytest.fixture(scope="module")
def two_k6():
    g = disjoint_union(complete_graph(6), complete_graph(6))
    rel = build_relaxation("bisection", g, {"k": 6}, 3)
    sol, frac = solve_relaxation(rel, tol=1e-7)
    assert sol.info["converged"]
    return g, sol, frac


def test_gw_examples():
    k2 = Graph(2, ((0, 1),))
    assert gw_round(np.array([[1.0, 0.0], [-1.0, 0.0]]), k2, samples=200).mean_cut == 1.0
    same = np.tile([0.6, 0.8], (5, 1))
    out = gw_round(same, cycle_graph(5), samples=200)
    assert out.best_cut == 0 and out.mean_cut == 0.0
    with pytest.raises(ValidationError):
        gw_round(np.zeros((2, 2)), k2)


def test_gw_on_c5_meets_ratio():
    g = cycle_graph(5)
    rel = build_relaxation("maxcut_gw", g, {}, 1)
    sol, frac = solve_relaxation(rel, tol=1e-8)
    vecs = np.vstack([sol.vec((u,)) for u in range(5)])
    out = gw_round(vecs, g, samples=2000, seed=1)
    assert out.mean_cut >= 0.85 * frac
    assert out.best_cut == 4


def test_conditioner_examples(two_k4):
    _, sol = two_k4
    cs = build_conditioners(sol, ())
    assert list(cs.vectors) == [()]
    np.testing.assert_array_equal(cs.vectors[()], sol.vec(()))
    cs = build_conditioners(sol, (2, 5))
    np.testing.assert_allclose(cs.vectors[(1, 1)], sol.vec((2, 5)), atol=1e-14)
    with pytest.raises(ValidationError):
        build_conditioners(sol, (1, 1))


def test_conditioners_orthogonal_on_solved_bisection(two_k4):
    _, sol = two_k4
    for u in range(8):
        cs = build_conditioners(sol, (u,))
        assert abs(cs.vectors[(0,)] @ cs.vectors[(1,)]) <= 1e-4
    rep = conditioner_report(sol, 8, 1)
    assert max(rep.values()) <= 1e-4


def test_select_columns_examples():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 6))
    assert select_columns(x, 2, 6).residual == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ValidationError):
        select_columns(x, 2, 7)


def test_select_columns_bound_and_greedy():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = rng.standard_normal((8, 12))
        exact = select_columns(x, 2, 4, "exhaustive")
        greedy = select_columns(x, 2, 4, "greedy")
        tail = np.sum(np.linalg.svd(x, compute_uv=False)[2:] ** 2)
        assert column_selection_bound(x, 2, 4) == pytest.approx(5 / 3 * tail)
        assert exact.residual <= 5 / 3 * tail * (1 + 1e-9)
        assert greedy.residual >= exact.residual - 1e-12
        assert exact.residual == pytest.approx(projection_residual(x, exact.indices))


def test_gs_empty_s_uses_norms(two_k4):
    g, sol = two_k4
    out = gs_round(sol, g, 4, 1, 1, 0.2, S=(), trials=5)
    norms = np.array([sol.norm2((u,)) for u in range(8)])
    np.testing.assert_allclose(out.probabilities, np.clip(norms, 0, 1), atol=1e-12)


def test_gs_on_two_k6(two_k6):
    g, sol, _ = two_k6
    out = gs_round(sol, g, 6, 1, 3, 0.2, seed=0, trials=50)
    assert out.value == 0
    for u, a in zip(out.S, out.alpha):
        assert (u in out.chosen) == bool(a)
    assert out.expected_size == pytest.approx(6.0, abs=1e-3)


def test_gs_mean_size(two_k6):
    g, sol, _ = two_k6
    out = gs_round(sol, g, 6, 1, 3, 0.2, seed=3, trials=500)
    assert abs(np.mean(out.sizes) - 6) <= 0.5


def test_gs_refuses_irregular_and_low_level(two_k6):
    g, sol, _ = two_k6
    bridged = Graph(12, g.edges + ((0, 6),))
    with pytest.raises(ValidationError, match="regular"):
        gs_round(sol, bridged, 6, 1, 3, 0.2)
    assert gs_round(sol, bridged, 6, 1, 3, 0.2, allow_irregular=True, trials=5).degree == 5
    with pytest.raises(ValidationError):
        gs_round(sol, g, 6, 1, 4, 0.2)


def test_condition_on_vertex_integral():
    g = complete_graph(4)
    rel = build_relaxation("clique", g, {}, 2)
    sol = integral_solution(rel, [1, 1, 1, 1])
    sub, gw, ids = condition_on_vertex(sol, g, 2)
    assert gw == complete_graph(3) and ids == [0, 1, 3]
    assert sub.level == 1 and sub.norm2(()) == pytest.approx(1.0)
    expect = integral_solution(build_relaxation("clique", gw, {}, 1), [1, 1, 1])
    for key in expect.keys:
        np.testing.assert_allclose(sub.vec(key), expect.vec(key), atol=1e-12)


def test_condition_on_vertex_solved():
    g = gnp_half(14, 1)
    rel = build_relaxation("clique", g, {}, 2)
    sol, _ = solve_relaxation(rel, tol=1e-8)
    w = max(range(g.n), key=lambda u: sol.norm2((u,)))
    sub, gw, _ = condition_on_vertex(sol, g, w)
    assert sub.norm2(()) == pytest.approx(1.0, abs=1e-9)
    viol = verify_solution(build_relaxation("clique", gw, {}, 1), sub, 1e-3)
    assert viol == []


def test_condition_rejects_zero_vertex():
    g = Graph(3, ((0, 1),))
    rel = build_relaxation("clique", g, {}, 2)
    sol = integral_solution(rel, [1, 1, 0])
    with pytest.raises(ValidationError):
        condition_on_vertex(sol, g, 2)


def test_planted_threshold_and_complete_graph():
    assert planted_threshold(100, 1, 0.1) == pytest.approx(40 / (0.9**2 * 2))
    assert planted_threshold(100, 1, 0.1) == pytest.approx(24.691358, abs=1e-6)
    d = distinguish_planted(complete_graph(30), 1, 0.1)
    assert d.label == "planted" and d.frac == pytest.approx(30, abs=1e-3)
