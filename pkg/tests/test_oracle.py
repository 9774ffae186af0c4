import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatbp import (
    BudgetExceededError,
    FactorGraph,
    InfeasibleError,
    OracleBudget,
    brute_force_map,
    brute_force_marginals,
    compile_graph,
    random_rbm,
    rbm_exact_map,
    rbm_to_factor_graph,
    run_bp,
    score_assignment,
)
from flatbp.zoo import RBMSpec

from _reference import enumerate_scores, random_loopy_graph


def _chain3():
    g = FactorGraph()
    g.add_variables([2, 2, 2])
    g.add_dense_pairwise_factor(0, 1, [[0.5, 0.0], [0.0, 1.0]])
    g.add_dense_pairwise_factor(1, 2, [[0.0, 2.0], [0.3, 0.0]])
    return compile_graph(g), np.array([0.0, 0.2, 0.1, 0.0, -0.5, 0.0])


def test_chain_map_exhaustive():
    c, e = _chain3()
    table = enumerate_scores(c.graph, e)
    assert len(table) == 8
    best = max(table.values())
    x, score = brute_force_map(c, e)
    assert score == pytest.approx(best, abs=1e-12)
    assert table[tuple(x.tolist())] == pytest.approx(best, abs=1e-12)


def test_evidence_only_map():
    g = FactorGraph()
    g.add_variables([3, 2])
    c = compile_graph(g)
    e = np.array([0.0, 2.0, 1.0, -1.0, -1.0])
    x, score = brute_force_map(c, e)
    np.testing.assert_array_equal(x, [1, 0])  # tie in var 1 -> smallest
    assert score == pytest.approx(1.0)


def test_feasibility_dominates_evidence():
    g = FactorGraph()
    g.add_variables([2, 2])
    g.add_enumeration_factor([0, 1], [(1, 1)], [0.0])
    c = compile_graph(g)
    x, score = brute_force_map(c, np.array([3.0, 0.0, 3.0, 0.0]))
    np.testing.assert_array_equal(x, [1, 1])
    assert score == 0.0


def test_map_budget_and_infeasible():
    g = FactorGraph()
    g.add_variables([2] * 10)
    c = compile_graph(g)
    with pytest.raises(BudgetExceededError):
        brute_force_map(c, None, OracleBudget(512))
    brute_force_map(c, None, OracleBudget(1024))

    g = FactorGraph()
    g.add_variables([2, 2])
    g.add_enumeration_factor([0, 1], [(0, 1)], [0.0])
    g.add_enumeration_factor([0, 1], [(1, 0)], [0.0])
    with pytest.raises(InfeasibleError):
        brute_force_map(compile_graph(g))
    with pytest.raises(InfeasibleError):
        brute_force_marginals(compile_graph(g))
    with pytest.raises(ValueError):
        OracleBudget(0)


def test_marginals_closed_forms():
    g = FactorGraph()
    g.add_variables([2])
    c = compile_graph(g)
    np.testing.assert_allclose(brute_force_marginals(c, [0.0, 0.0])[0], [0.5, 0.5])
    np.testing.assert_allclose(brute_force_marginals(c, [0.0, math.log(3)])[0], [0.25, 0.75])


def test_chain_marginals_match_enumeration():
    c, e = _chain3()
    table = enumerate_scores(c.graph, e)
    z = sum(math.exp(s) for s in table.values())
    expected = [np.zeros(2) for _ in range(3)]
    for x, s in table.items():
        for i, xi in enumerate(x):
            expected[i][xi] += math.exp(s) / z
    for got, want in zip(brute_force_marginals(c, e), expected):
        np.testing.assert_allclose(got, want, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_marginals_sum_to_one_and_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    graph, e = random_loopy_graph(rng, max_vars=6)
    c = compile_graph(graph)
    table = enumerate_scores(graph, e)
    if not table:
        with pytest.raises(InfeasibleError):
            brute_force_marginals(c, e)
        return
    marg = brute_force_marginals(c, e)
    for m in marg:
        assert abs(m.sum() - 1.0) <= 1e-12
    x, score = brute_force_map(c, e)
    assert score == pytest.approx(max(table.values()), abs=1e-12)
    best = [k for k, v in table.items() if v == max(table.values())]
    assert tuple(x.tolist()) == min(best)


def test_rbm_exact_map_decoupled():
    b = np.array([0.5, -1.0, 2.0])
    c = np.array([-0.1, 0.3])
    rbm = RBMSpec(3, 2, None, b, c, np.zeros((3, 2)))
    x, score = rbm_exact_map(rbm)
    np.testing.assert_array_equal(x, [1, 0, 1, 0, 1])
    assert score == pytest.approx(2.8)


def test_rbm_exact_map_single_interaction():
    rbm = RBMSpec(1, 1, None, np.zeros(1), np.zeros(1), np.array([[2.0]]))
    x, score = rbm_exact_map(rbm)
    np.testing.assert_array_equal(x, [1, 1])
    assert score == 2.0


def test_rbm_exact_map_cap():
    rbm = RBMSpec(26, 1, None, np.zeros(26), np.zeros(1), np.zeros((26, 1)))
    with pytest.raises(BudgetExceededError):
        rbm_exact_map(rbm)


@pytest.mark.parametrize("seed", range(5))
def test_rbm_oracle_agrees_with_brute_force_8x8(seed):
    rbm = random_rbm(8, 8, seed)
    graph, e = rbm_to_factor_graph(rbm)
    c = compile_graph(graph)
    x1, s1 = rbm_exact_map(rbm)
    x2, s2 = brute_force_map(c, e)
    np.testing.assert_array_equal(x1, x2)
    assert s1 == pytest.approx(s2, abs=1e-9)


def test_rbm_oracle_chunking_is_transparent():
    rbm = random_rbm(10, 4, 3)
    a = rbm_exact_map(rbm, chunk_bits=3)
    b = rbm_exact_map(rbm)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]


def test_rbm_oracle_matches_direct_enumeration():
    rbm = random_rbm(3, 4, 11)
    best = max(
        (rbm.score(x), x) for x in itertools.product([0, 1], repeat=7)
    )
    x, score = rbm_exact_map(rbm)
    assert score == pytest.approx(best[0], abs=1e-12)
    assert tuple(x.tolist()) == best[1]


@pytest.mark.parametrize("seed", range(5))
def test_oracle_dominates_lbp(seed):
    rbm = random_rbm(6, 6, 100 + seed)
    graph, e = rbm_to_factor_graph(rbm)
    c = compile_graph(graph)
    _, res = run_bp(c, e)
    _, best = brute_force_map(c, e)
    assert best >= res.score - 1e-12
    assert score_assignment(c, e, res.decoded) == res.score
