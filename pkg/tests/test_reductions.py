from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soslab.errors import BudgetExceeded, ValidationError
from soslab.instances import (
    CspInstance,
    complete_graph,
    cycle_graph,
    gnp_half,
    parity_code,
    random_csp,
)
from soslab.reductions import (
    brute_force_opt,
    build_dks_reduction,
    csp_to_dks,
    csp_to_ssbve,
    dks_to_dksh,
    hyper_tuple_bound,
)
from soslab.relaxations import (
    RelaxationKind,
    build_relaxation,
    integral_solution,
    objective_value,
    solve_relaxation,
    verify_solution,
)


@pytest.fixture(scope="module")
def tiny():
    """Complete 2-XOR source (n=4, m=2) solved at level 4."""
    inst = random_csp(4, 2, 2, 2, parity_code(2), 0)
    rel = build_relaxation("csp", inst, {}, 4)
    sol, frac = solve_relaxation(rel, tol=1e-9)
    assert sol.info["converged"] and frac == pytest.approx(inst.m, abs=1e-6)
    return inst, sol


def test_k_is_twice_m_at_natural_density():
    inst = random_csp(4, 4, 2, 2, parity_code(2), 3)
    red = build_dks_reduction(inst, delta=1)
    assert red.delta == 1 and red.k == 2 * inst.m


def test_dks_mapping(tiny):
    inst, sol = tiny
    red, mapped = csp_to_dks(inst, sol)
    assert mapped.level == 2
    rel = build_relaxation("dks", red.graph, {"k": red.k}, mapped.level)
    assert verify_solution(rel, mapped, 1e-3) == []
    assert objective_value(rel, mapped) == pytest.approx(red.delta * inst.m * inst.K, abs=1e-3)


def test_inconsistent_sets_map_to_zero(tiny):
    inst, sol = tiny
    red, mapped = csp_to_dks(inst, sol)
    nl = len(red.bipartite.left)
    right = red.bipartite.right
    for a, b in product(range(len(right)), repeat=2):
        (x, la, _), (y, lb, _) = right[a], right[b]
        if a < b and x == y and la != lb:
            assert np.all(mapped.vectors[(nl + a, nl + b)] == 0)


def test_mapping_rejects_low_source_level():
    inst = random_csp(4, 2, 2, 2, parity_code(2), 0)
    rel = build_relaxation("csp", inst, {}, 1)
    sol, _ = solve_relaxation(rel)
    with pytest.raises(ValidationError):
        csp_to_dks(inst, sol)


def test_ssbve_mapping(tiny):
    inst, sol = tiny
    red, mapped = csp_to_ssbve(inst, source_sol=sol, level=1)
    assert red.l == red.dks.delta * inst.m * inst.K
    assert len(red.bipartite.left) == len(red.dks.graph.edges)
    assert len(red.bipartite.right) == red.dks.graph.n
    assert mapped.norm2(()) == pytest.approx(1.0, abs=1e-9)
    rel = build_relaxation("ssbve", red.bipartite, {"l": red.l}, mapped.level)
    assert verify_solution(rel, mapped, 1e-3) == []


def _dksh_oracle(edges, rho):
    # ordered tuples, no shortcuts
    return {frozenset().union(*map(frozenset, combo)) for combo in product(edges, repeat=rho)}


def test_dksh_examples():
    c4 = cycle_graph(4)
    assert dks_to_dksh(c4, 1).hyperedges == c4.edges
    h = dks_to_dksh(c4, 2)
    assert {len(f) for f in h.hyperedges} <= {2, 3, 4}
    assert {frozenset(f) for f in h.hyperedges} == _dksh_oracle(c4.edges, 2)
    # 4 single edges, 4 paths on three vertices, one 4-set from two disjoint edges
    assert len(h.hyperedges) == 9
    with pytest.raises(BudgetExceeded):
        dks_to_dksh(complete_graph(12), 4, budget=100)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 7), st.integers(0, 1000), st.integers(1, 3))
def test_dksh_matches_oracle(n, seed, t):
    g = gnp_half(n, seed)
    h = dks_to_dksh(g, t)
    assert len(h.hyperedges) >= len(g.edges)
    assert h.arity <= 2**t
    assert {frozenset(f) for f in h.hyperedges} == _dksh_oracle(g.edges, 2 ** (t - 1))


def test_hyper_tuple_bound_on_indicator():
    g = cycle_graph(5)
    rel = build_relaxation("dks", g, {"k": 3}, 4)
    sol = integral_solution(rel, [1, 1, 1, 0, 0])
    for p in (0, 1, 2):
        lhs, rhs = hyper_tuple_bound(sol, g.edges, p)
        assert lhs == rhs == 2 ** (2**p)


def test_hyper_tuple_bound_p0_is_frac():
    g = complete_graph(4)
    rel = build_relaxation("dks", g, {"k": 3}, 2)
    sol, frac = solve_relaxation(rel, tol=1e-8)
    lhs, rhs = hyper_tuple_bound(sol, g.edges, 0)
    assert lhs == rhs
    assert lhs == pytest.approx(frac, abs=1e-6)


def test_brute_force_examples():
    assert brute_force_opt("clique", complete_graph(4)) == 4
    assert brute_force_opt("dks", cycle_graph(4), 3) == 2
    tri = CspInstance(3, ((0, 1), (1, 2), (0, 2)), ((1, 0),) * 3, parity_code(2))
    assert brute_force_opt("csp", tri) == 2
    assert brute_force_opt(RelaxationKind.MAXCUT_GW, cycle_graph(5)) == 4
    assert brute_force_opt("bisection", cycle_graph(6), 3) == 2
    with pytest.raises(BudgetExceeded):
        brute_force_opt("dks", gnp_half(40, 0), 20, budget=1000)
