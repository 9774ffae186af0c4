"""Exact inference by enumeration, for testing and benchmarking.

These routines work from the symbolic factor list rather than the flat
wiring tables, so they stay independent of the message passing code they
are used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from flatbp.inference import check_evidence
from flatbp.wiring import CompiledGraph

MAX_RBM_HIDDEN = 25


class BudgetExceededError(RuntimeError):
    pass


class InfeasibleError(RuntimeError):
    """Every joint state is forbidden by some factor."""


@dataclass(frozen=True)
class OracleBudget:
    max_joint_states: int = 2**22

    def __post_init__(self):
        if self.max_joint_states <= 0:
            raise ValueError("max_joint_states must be positive")


def joint_score_table(
    compiled: CompiledGraph, evidence=None, budget: OracleBudget | None = None
) -> np.ndarray:
    """Dense score of every joint state, ``-inf`` where forbidden.

    Axis ``i`` of the result indexes the state of variable ``i``.
    """
    budget = budget or OracleBudget()
    graph = compiled.graph
    cards = graph.cardinalities
    size = math.prod(cards)
    if size > budget.max_joint_states:
        raise BudgetExceededError(
            f"{size} joint states exceed the oracle budget of {budget.max_joint_states}"
        )
    evidence = check_evidence(compiled, evidence)
    n = len(cards)
    table = np.zeros(cards, dtype=np.float64)
    offset = 0
    for v, d in enumerate(cards):
        shape = [1] * n
        shape[v] = d
        table += evidence[offset:offset + d].reshape(shape)
        offset += d

    for factor in graph.factors:
        scope_cards = [cards[v] for v in factor.scope]
        dense = np.full(scope_cards, -np.inf)
        dense[tuple(factor.valid_configs.T)] = factor.log_potentials
        order = np.argsort(factor.scope)
        dense = np.transpose(dense, order)
        shape = [1] * n
        for v in factor.scope:
            shape[v] = cards[v]
        table += dense.reshape(shape)
    return table


def brute_force_map(
    compiled: CompiledGraph, evidence=None, budget: OracleBudget | None = None
) -> tuple[np.ndarray, float]:
    """Exact MAP; ties go to the lexicographically smallest assignment."""
    table = joint_score_table(compiled, evidence, budget)
    flat = table.reshape(-1)
    best = int(np.argmax(flat))
    if flat[best] == -np.inf:
        raise InfeasibleError("no joint state is allowed by all factors")
    cards = compiled.graph.cardinalities
    assignment = np.array(np.unravel_index(best, cards), dtype=np.int64).reshape(-1)
    return assignment, float(flat[best])


def brute_force_marginals(
    compiled: CompiledGraph, evidence=None, budget: OracleBudget | None = None
) -> list[np.ndarray]:
    """Marginals of ``p(x) ∝ exp(score(x))`` over the allowed joint states."""
    table = joint_score_table(compiled, evidence, budget)
    peak = table.max()
    if peak == -np.inf:
        raise InfeasibleError("no joint state is allowed by all factors")
    weights = np.exp(table - peak)
    weights /= weights.sum()
    n = weights.ndim
    return [
        weights.sum(axis=tuple(a for a in range(n) if a != v)) for v in range(n)
    ]


def rbm_exact_map(rbm, chunk_bits: int = 16) -> tuple[np.ndarray, float]:
    """Exact MAP of an RBM by enumerating hidden layer states.

    ``rbm`` needs ``hidden_bias`` (H,), ``visible_bias`` (V,) and ``weights``
    (H, V). For a fixed hidden vector the visible units decouple: each one is
    on exactly when its total input is positive. Hidden vectors are visited
    in lexicographic order and the first maximum wins, so the result matches
    ``brute_force_map`` on the hidden-then-visible graph, ties included.
    """
    b = np.asarray(rbm.hidden_bias, dtype=np.float64)
    c = np.asarray(rbm.visible_bias, dtype=np.float64)
    W = np.asarray(rbm.weights, dtype=np.float64)
    H = b.size
    if H > MAX_RBM_HIDDEN:
        raise BudgetExceededError(
            f"{H} hidden units exceed the enumeration cap of {MAX_RBM_HIDDEN}"
        )
    shifts = np.arange(H - 1, -1, -1, dtype=np.int64)
    best_score = -np.inf
    best_hidden = np.zeros(H, dtype=np.int64)
    total = 1 << H
    step = 1 << chunk_bits
    for start in range(0, total, step):
        codes = np.arange(start, min(start + step, total), dtype=np.int64)
        hidden = (codes[:, None] >> shifts) & 1
        field = c + hidden @ W
        scores = hidden @ b + np.maximum(field, 0.0).sum(axis=1)
        i = int(np.argmax(scores))
        if scores[i] > best_score:
            best_score = float(scores[i])
            best_hidden = hidden[i]
    visible = (c + best_hidden @ W > 0).astype(np.int64)
    return np.concatenate([best_hidden, visible]), best_score
