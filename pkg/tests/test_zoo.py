import numpy as np
import pytest

from flatbp import (
    brute_force_map,
    compile_graph,
    ising_grid,
    random_rbm,
    rbm_to_factor_graph,
    run_bp,
    score_assignments,
)
from flatbp.zoo import rbm_for_units


def test_random_rbm_deterministic():
    a, b = random_rbm(15, 15, 7), random_rbm(15, 15, 7)
    assert a == b
    assert a != random_rbm(15, 15, 8)


def test_random_rbm_stream_order():
    rbm = random_rbm(1, 1, 42)
    draws = np.random.Generator(np.random.PCG64(42)).standard_normal(3)
    assert rbm.hidden_bias[0] == draws[0]
    assert rbm.visible_bias[0] == draws[1]
    assert rbm.weights[0, 0] == draws[2]


def test_random_rbm_frozen_values():
    # pins the generator stream so silent changes to seeding are caught
    rbm = random_rbm(2, 2, 0)
    ref = np.random.Generator(np.random.PCG64(0)).standard_normal(8)
    np.testing.assert_array_equal(
        np.concatenate([rbm.hidden_bias, rbm.visible_bias, rbm.weights.ravel()]), ref
    )
    assert rbm.hidden_bias[0] == pytest.approx(0.12573022, abs=1e-8)


def test_random_rbm_distribution():
    # 10^4 draws: mean |z| = sqrt(2/pi), sd of the mean sqrt((1 - 2/pi) / 10^4)
    rbm = random_rbm(100, 98, 2024)
    x = np.concatenate([rbm.hidden_bias, rbm.visible_bias, rbm.weights.ravel()])
    assert x.size == 100 + 98 + 9800 == 9998
    n = x.size
    assert abs(np.abs(x).mean() - np.sqrt(2 / np.pi)) < 5 * np.sqrt((1 - 2 / np.pi) / n)
    assert abs(x.mean()) < 5 / np.sqrt(n)
    assert abs(x.var() - 1) < 5 * np.sqrt(2 / n)


def test_random_rbm_rejects_empty_layers():
    with pytest.raises(ValueError):
        random_rbm(0, 3, 1)
    with pytest.raises(ValueError):
        rbm_for_units(31, 1)


def test_rbm_units_split():
    rbm = rbm_for_units(40, 1)
    assert rbm.num_hidden == rbm.num_visible == 20


def test_rbm_graph_score_example():
    from flatbp.zoo import RBMSpec

    rbm = RBMSpec(1, 1, None, np.array([1.0]), np.array([-1.0]), np.array([[2.0]]))
    graph, e = rbm_to_factor_graph(rbm)
    c = compile_graph(graph)
    assert score_assignments(c, e, [[1, 1]])[0] == 2.0


def test_rbm_graph_without_weights():
    rbm = random_rbm(3, 2, 5)
    rbm.weights[:] = 0.0
    graph, e = rbm_to_factor_graph(rbm)
    c = compile_graph(graph)
    x = np.array([[1, 0, 1, 1, 1], [0, 0, 0, 0, 0]])
    want = x[:, :3] @ rbm.hidden_bias + x[:, 3:] @ rbm.visible_bias
    np.testing.assert_allclose(score_assignments(c, e, x), want, atol=1e-12)


def test_rbm_graph_matches_direct_formula():
    rbm = random_rbm(4, 4, 9)
    graph, e = rbm_to_factor_graph(rbm)
    c = compile_graph(graph)
    graph.validate()
    assert np.all(np.isfinite(e))
    xs = np.random.default_rng(1).integers(0, 2, size=(100, 8))
    direct = np.array([rbm.score(x) for x in xs])
    np.testing.assert_allclose(score_assignments(c, e, xs), direct, rtol=0, atol=1e-12)


def test_ising_small_grids():
    g, e = ising_grid(1, 1, 0)
    assert g.num_variables == 1 and g.factors == [] and e.shape == (2,)
    g, e = ising_grid(2, 2, 0)
    assert g.num_variables == 4 and len(g.factors) == 4
    g, e = ising_grid(3, 4, 0)
    assert len(g.factors) == 3 * 3 + 2 * 4
    with pytest.raises(ValueError):
        ising_grid(0, 3, 0)


def test_ising_deterministic():
    g1, e1 = ising_grid(3, 3, 4, 0.5, 2.0)
    g2, e2 = ising_grid(3, 3, 4, 0.5, 2.0)
    np.testing.assert_array_equal(e1, e2)
    assert g1.factors == g2.factors


@pytest.mark.parametrize("seed", range(4))
def test_ising_3x3_lbp_below_oracle(seed):
    g, e = ising_grid(3, 3, seed)
    c = compile_graph(g)
    _, res = run_bp(c, e)
    _, best = brute_force_map(c, e)
    assert res.score <= best + 1e-12
