import csv
from dataclasses import fields

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatbp import FactorGraph, GraphError, compile_graph, rbm_to_factor_graph
from flatbp.wiring import dump_wiring_csv
from flatbp.zoo import rbm_for_units

from _reference import random_loopy_graph, random_tree_graph


def _unary_graph():
    g = FactorGraph()
    g.add_variables([2])
    g.add_enumeration_factor([0], [(0,), (1,)], [0.0, 0.5])
    return g


def test_counts_unary():
    w = compile_graph(_unary_graph()).wiring
    assert (w.num_var_states, w.num_edge_states, w.num_config_entries) == (2, 2, 2)


def test_counts_pairwise():
    g = FactorGraph()
    g.add_variables([2, 2])
    g.add_dense_pairwise_factor(0, 1, np.zeros((2, 2)))
    w = compile_graph(g).wiring
    assert (w.num_var_states, w.num_edge_states, w.num_config_entries) == (4, 4, 8)


def test_counts_rbm_30():
    # counting oracle: 225 factors x 2 edges x 2 states; 225 x 4 configs x 2 positions
    num_factors = 15 * 15
    graph, _ = rbm_to_factor_graph(rbm_for_units(30, 0))
    w = compile_graph(graph).wiring
    assert w.num_var_states == 30 * 2
    assert w.num_edge_states == num_factors * 2 * 2
    assert w.num_config_entries == num_factors * 4 * 2
    assert (w.num_var_states, w.num_edge_states, w.num_config_entries) == (60, 900, 1800)


def test_layout_small_example():
    g = FactorGraph()
    g.add_variables([2, 3])
    g.add_enumeration_factor([1, 0], [(2, 0), (0, 1)], [1.0, 2.0])
    w = compile_graph(g).wiring
    np.testing.assert_array_equal(w.var_state_offset, [0, 2, 5])
    np.testing.assert_array_equal(w.edge_var, [1, 0])
    np.testing.assert_array_equal(w.edge_state_offset, [0, 3, 5])
    np.testing.assert_array_equal(w.edge_to_var, [2, 3, 4, 0, 1])
    # entries: config 0 -> (edge0 state2, edge1 state0), config 1 -> (edge0 state0, edge1 state1)
    np.testing.assert_array_equal(w.config_entry_to_edge_state, [2, 3, 0, 4])
    np.testing.assert_array_equal(w.config_segment, [0, 0, 1, 1])
    np.testing.assert_array_equal(w.config_log_potentials, [1.0, 2.0])
    np.testing.assert_array_equal(w.edge_state_entry_offset, [0, 1, 1, 2, 3, 4])
    np.testing.assert_array_equal(w.edge_state_entry_order, [2, 0, 1, 3])


def test_flat_index_of_examples():
    g = FactorGraph()
    g.add_variables([2, 3])
    c = compile_graph(g)
    assert c.flat_index_of(1, 0) == 2
    assert c.flat_index_of(0, 1) == 1
    with pytest.raises(IndexError):
        c.flat_index_of(1, 3)
    with pytest.raises(IndexError):
        c.flat_index_of(2, 0)
    with pytest.raises(IndexError):
        c.variable_state_of(5)


def test_empty_graph():
    c = compile_graph(FactorGraph())
    w = c.wiring
    assert (w.num_var_states, w.num_edge_states, w.num_config_entries) == (0, 0, 0)


def test_compile_rejects_invalid_graph():
    from flatbp.graph import EnumerationFactor, Variable

    g = FactorGraph(
        [Variable(0, 2)], [EnumerationFactor((0,), np.array([[5]]), np.array([0.0]))]
    )
    with pytest.raises(GraphError):
        compile_graph(g)


def test_compiled_graph_is_a_snapshot():
    g = _unary_graph()
    c = compile_graph(g)
    g.add_variables([2])
    assert c.num_variables == 1
    with pytest.raises(ValueError):
        c.wiring.edge_to_var[0] = 1


def _graphs(seed):
    rng = np.random.default_rng(seed)
    if seed % 2:
        return random_tree_graph(rng)[0]
    return random_loopy_graph(rng)[0]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_index_spaces_round_trip(seed):
    c = compile_graph(_graphs(seed))
    w = c.wiring
    seen = set()
    for v, d in enumerate(w.cardinalities):
        for s in range(d):
            idx = c.flat_index_of(v, s)
            assert c.variable_state_of(idx) == (v, s)
            seen.add(idx)
    assert seen == set(range(w.num_var_states))

    seen = set()
    for e in range(w.num_edges):
        for s in range(w.cardinalities[w.edge_var[e]]):
            idx = c.edge_state_index(e, s)
            assert c.edge_state_of(idx) == (e, s)
            assert w.edge_to_var[idx] == c.flat_index_of(int(w.edge_var[e]), s)
            seen.add(idx)
    assert seen == set(range(w.num_edge_states))

    seen = set()
    for a, f in enumerate(c.graph.factors):
        for k in range(f.num_configs):
            idx = c.config_index(a, k)
            assert c.config_of(idx) == (a, k)
            seen.add(idx)
    assert seen == set(range(w.num_configs))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_wiring_invariants(seed):
    graph = _graphs(seed)
    w = compile_graph(graph).wiring
    assert w.num_config_entries == sum(f.arity * f.num_configs for f in graph.factors)
    assert w.num_edge_states == sum(
        graph.variables[v].cardinality for f in graph.factors for v in f.scope
    )
    # each configuration's entries hit distinct edges of its own factor
    for g_idx in range(w.num_configs):
        lo, hi = w.config_entry_offset[g_idx], w.config_entry_offset[g_idx + 1]
        es = w.config_entry_to_edge_state[lo:hi]
        edges = np.searchsorted(w.edge_state_offset, es, side="right") - 1
        assert len(set(edges.tolist())) == hi - lo
        factor = np.searchsorted(w.factor_config_offset, g_idx, side="right") - 1
        assert set(w.edge_factor[edges].tolist()) == {factor}
        assert np.all(w.config_segment[lo:hi] == g_idx)
    # gather table is the stable inverse of the scatter table
    for es in range(w.num_edge_states):
        entries = w.entries_of_edge_state(es)
        assert np.all(w.config_entry_to_edge_state[entries] == es)
        assert np.all(np.diff(entries) > 0)
    # variable states touched by some factor are hit by an edge state
    touched = {w.var_state_offset[v] + s for v in set(w.edge_var.tolist())
               for s in range(w.cardinalities[v])}
    assert touched == set(w.edge_to_var.tolist())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_compile_is_deterministic(seed):
    graph = _graphs(seed)
    a, b = compile_graph(graph).wiring, compile_graph(graph).wiring
    for f in fields(a):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, np.ndarray):
            assert x.dtype == y.dtype
            np.testing.assert_array_equal(x, y)
        else:
            assert x == y


def test_dump_wiring_csv(tmp_path):
    c = compile_graph(_unary_graph())
    paths = dump_wiring_csv(c, tmp_path / "wiring")
    names = {p.rsplit("/", 1)[-1] for p in paths}
    assert "edge_to_var.csv" in names and "config_log_potentials.csv" in names
    with open(tmp_path / "wiring" / "config_log_potentials.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows == [["index", "value"], ["0", "0.0"], ["1", "0.5"]]
