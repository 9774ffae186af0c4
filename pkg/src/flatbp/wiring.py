"""Compile a factor graph into flat index tables.

Every structured entity gets a position on one of three global axes:

* variable states ``(variable, state)``, ordered by variable id;
* edge states ``(edge, state)``, where edges are ordered by factor index and
  then scope position;
* configurations ``(factor, config)``, ordered by factor then config row.

A config entry is a ``(configuration, scope position)`` pair. The primary
table maps each entry to the edge state it selects; the reverse grouping
(entries per edge state) is obtained once by a stable sort.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, fields

import numpy as np

from flatbp.graph import FactorGraph, GraphError


@dataclass(frozen=True)
class Wiring:
    cardinalities: np.ndarray
    num_var_states: int
    num_edge_states: int
    num_configs: int
    num_config_entries: int
    var_state_offset: np.ndarray  # (num_vars + 1,)
    edge_var: np.ndarray  # (num_edges,)
    edge_factor: np.ndarray  # (num_edges,)
    edge_state_offset: np.ndarray  # (num_edges + 1,)
    edge_to_var: np.ndarray  # (num_edge_states,)
    factor_edge_offset: np.ndarray  # (num_factors + 1,)
    factor_config_offset: np.ndarray  # (num_factors + 1,)
    config_entry_to_edge_state: np.ndarray  # (num_config_entries,)
    config_segment: np.ndarray  # (num_config_entries,)
    config_entry_offset: np.ndarray  # (num_configs + 1,)
    config_log_potentials: np.ndarray  # (num_configs,)
    edge_state_entry_order: np.ndarray  # (num_config_entries,) entries sorted by edge state
    edge_state_entry_offset: np.ndarray  # (num_edge_states + 1,)
    var_edge_order: np.ndarray  # (num_edges,) edges sorted by variable
    var_edge_offset: np.ndarray  # (num_vars + 1,)
    # mixed-radix keys of configurations, used to look up assignments
    edge_key_stride: np.ndarray  # (num_edges,)
    factor_key_offset: np.ndarray  # (num_factors + 1,)
    sorted_config_keys: np.ndarray  # (num_configs,)
    sorted_config_ids: np.ndarray  # (num_configs,)

    @property
    def num_variables(self) -> int:
        return len(self.cardinalities)

    @property
    def num_edges(self) -> int:
        return len(self.edge_var)

    @property
    def num_factors(self) -> int:
        return len(self.factor_edge_offset) - 1

    @property
    def factor_degree(self) -> np.ndarray:
        return np.diff(self.factor_edge_offset)

    @property
    def edge_count(self) -> np.ndarray:
        """Number of incident factors per variable."""
        return np.diff(self.var_edge_offset)

    def edges_of_variable(self, var: int) -> np.ndarray:
        lo, hi = self.var_edge_offset[var], self.var_edge_offset[var + 1]
        return self.var_edge_order[lo:hi]

    def entries_of_edge_state(self, edge_state: int) -> np.ndarray:
        lo = self.edge_state_entry_offset[edge_state]
        hi = self.edge_state_entry_offset[edge_state + 1]
        return self.edge_state_entry_order[lo:hi]


def _offsets(sizes) -> np.ndarray:
    out = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=out[1:])
    return out


def build_wiring(graph: FactorGraph) -> Wiring:
    cards = np.array(graph.cardinalities, dtype=np.int64)
    var_state_offset = _offsets(cards)

    scopes = [np.array(f.scope, dtype=np.int64) for f in graph.factors]
    factor_edge_offset = _offsets([len(s) for s in scopes])
    factor_config_offset = _offsets([f.num_configs for f in graph.factors])
    edge_var = np.concatenate(scopes) if scopes else np.zeros(0, dtype=np.int64)
    edge_factor = np.repeat(
        np.arange(len(scopes), dtype=np.int64), np.diff(factor_edge_offset)
    )
    edge_state_offset = _offsets(cards[edge_var])
    num_edge_states = int(edge_state_offset[-1])

    # edge state -> variable state
    edge_of_state = np.repeat(np.arange(len(edge_var)), cards[edge_var])
    state_in_edge = np.arange(num_edge_states) - edge_state_offset[edge_of_state]
    edge_to_var = var_state_offset[edge_var[edge_of_state]] + state_in_edge

    entry_to_edge_state = []
    for a, factor in enumerate(graph.factors):
        e0, e1 = factor_edge_offset[a], factor_edge_offset[a + 1]
        entry_to_edge_state.append(
            (edge_state_offset[e0:e1][None, :] + factor.valid_configs).reshape(-1)
        )
    if entry_to_edge_state:
        config_entry_to_edge_state = np.concatenate(entry_to_edge_state)
        config_log_potentials = np.concatenate(
            [f.log_potentials for f in graph.factors]
        ).astype(np.float64)
    else:
        config_entry_to_edge_state = np.zeros(0, dtype=np.int64)
        config_log_potentials = np.zeros(0, dtype=np.float64)

    num_configs = int(factor_config_offset[-1])
    config_arity = np.repeat(
        np.diff(factor_edge_offset), np.diff(factor_config_offset)
    )
    config_entry_offset = _offsets(config_arity)
    config_segment = np.repeat(np.arange(num_configs, dtype=np.int64), config_arity)

    edge_state_entry_order = np.argsort(config_entry_to_edge_state, kind="stable")
    edge_state_entry_offset = _offsets(
        np.bincount(config_entry_to_edge_state, minlength=num_edge_states)
    )
    var_edge_order = np.argsort(edge_var, kind="stable")
    var_edge_offset = _offsets(np.bincount(edge_var, minlength=len(cards)))

    strides = []
    key_sizes = []
    for factor in graph.factors:
        scope_cards = [int(cards[v]) for v in factor.scope]
        stride = [1] * len(scope_cards)
        for p in range(len(scope_cards) - 2, -1, -1):
            stride[p] = stride[p + 1] * scope_cards[p + 1]
        strides.extend(stride)
        key_sizes.append(stride[0] * scope_cards[0])
    if sum(key_sizes) >= 2**62:
        raise GraphError("factor scopes too large to index configurations")
    edge_key_stride = np.array(strides, dtype=np.int64)
    factor_key_offset = _offsets(np.array(key_sizes, dtype=np.int64))
    config_keys = np.zeros(num_configs, dtype=np.int64)
    for a, factor in enumerate(graph.factors):
        e0, e1 = factor_edge_offset[a], factor_edge_offset[a + 1]
        c0, c1 = factor_config_offset[a], factor_config_offset[a + 1]
        config_keys[c0:c1] = factor_key_offset[a] + factor.valid_configs @ edge_key_stride[e0:e1]
    sorted_config_ids = np.argsort(config_keys, kind="stable")

    wiring = Wiring(
        cardinalities=cards,
        num_var_states=int(var_state_offset[-1]),
        num_edge_states=num_edge_states,
        num_configs=num_configs,
        num_config_entries=len(config_entry_to_edge_state),
        var_state_offset=var_state_offset,
        edge_var=edge_var,
        edge_factor=edge_factor,
        edge_state_offset=edge_state_offset,
        edge_to_var=edge_to_var.astype(np.int64),
        factor_edge_offset=factor_edge_offset,
        factor_config_offset=factor_config_offset,
        config_entry_to_edge_state=config_entry_to_edge_state.astype(np.int64),
        config_segment=config_segment,
        config_entry_offset=config_entry_offset,
        config_log_potentials=config_log_potentials,
        edge_state_entry_order=edge_state_entry_order.astype(np.int64),
        edge_state_entry_offset=edge_state_entry_offset,
        var_edge_order=var_edge_order.astype(np.int64),
        var_edge_offset=var_edge_offset,
        edge_key_stride=edge_key_stride,
        factor_key_offset=factor_key_offset,
        sorted_config_keys=config_keys[sorted_config_ids],
        sorted_config_ids=sorted_config_ids.astype(np.int64),
    )
    for f in fields(wiring):
        value = getattr(wiring, f.name)
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
    return wiring


@dataclass(frozen=True, eq=False)
class CompiledGraph:
    graph: FactorGraph
    wiring: Wiring

    @property
    def num_var_states(self) -> int:
        return self.wiring.num_var_states

    @property
    def num_edge_states(self) -> int:
        return self.wiring.num_edge_states

    @property
    def num_config_entries(self) -> int:
        return self.wiring.num_config_entries

    @property
    def num_variables(self) -> int:
        return self.wiring.num_variables

    def flat_index_of(self, var: int, state: int) -> int:
        w = self.wiring
        if not 0 <= var < w.num_variables:
            raise IndexError(f"variable {var} out of range")
        if not 0 <= state < w.cardinalities[var]:
            raise IndexError(f"state {state} out of range for variable {var}")
        return int(w.var_state_offset[var] + state)

    def variable_state_of(self, index: int) -> tuple[int, int]:
        w = self.wiring
        if not 0 <= index < w.num_var_states:
            raise IndexError(f"variable state index {index} out of range")
        var = int(np.searchsorted(w.var_state_offset, index, side="right") - 1)
        return var, int(index - w.var_state_offset[var])

    def edge_state_index(self, edge: int, state: int) -> int:
        w = self.wiring
        if not 0 <= edge < w.num_edges:
            raise IndexError(f"edge {edge} out of range")
        if not 0 <= state < w.cardinalities[w.edge_var[edge]]:
            raise IndexError(f"state {state} out of range for edge {edge}")
        return int(w.edge_state_offset[edge] + state)

    def edge_state_of(self, index: int) -> tuple[int, int]:
        w = self.wiring
        if not 0 <= index < w.num_edge_states:
            raise IndexError(f"edge state index {index} out of range")
        edge = int(np.searchsorted(w.edge_state_offset, index, side="right") - 1)
        return edge, int(index - w.edge_state_offset[edge])

    def config_index(self, factor: int, config: int) -> int:
        w = self.wiring
        if not 0 <= factor < w.num_factors:
            raise IndexError(f"factor {factor} out of range")
        lo, hi = w.factor_config_offset[factor], w.factor_config_offset[factor + 1]
        if not 0 <= config < hi - lo:
            raise IndexError(f"config {config} out of range for factor {factor}")
        return int(lo + config)

    def config_of(self, index: int) -> tuple[int, int]:
        w = self.wiring
        if not 0 <= index < w.num_configs:
            raise IndexError(f"config index {index} out of range")
        factor = int(np.searchsorted(w.factor_config_offset, index, side="right") - 1)
        return factor, int(index - w.factor_config_offset[factor])


def compile_graph(graph: FactorGraph) -> CompiledGraph:
    """Validate ``graph`` and build its flat layout.

    The returned object holds a snapshot of the graph, so later edits to
    ``graph`` do not leak into it; recompile after changing the model.
    """
    graph.validate()
    snapshot = FactorGraph(list(graph.variables), list(graph.factors))
    return CompiledGraph(snapshot, build_wiring(snapshot))


def dump_wiring_csv(compiled: CompiledGraph, directory: str | os.PathLike) -> list[str]:
    """Write each array table of the wiring to ``<directory>/<name>.csv``.

    Every file has two columns, ``index`` and ``value``. Returns the paths.
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    for f in fields(compiled.wiring):
        value = getattr(compiled.wiring, f.name)
        if not isinstance(value, np.ndarray):
            continue
        path = os.path.join(directory, f"{f.name}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(value.tolist()):
                writer.writerow([i, repr(v) if isinstance(v, float) else v])
        paths.append(path)
    return paths
