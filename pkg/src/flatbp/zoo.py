"""Seeded random models for benchmarks and tests.

All draws come from numpy's PCG64 bit generator through
``Generator.standard_normal``, which gives the same stream on every platform
for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from flatbp.graph import FactorGraph

GENERATOR_NAME = "numpy.random.PCG64/standard_normal"


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class RBMSpec:
    num_hidden: int
    num_visible: int
    seed: int | None
    hidden_bias: np.ndarray
    visible_bias: np.ndarray
    weights: np.ndarray  # (num_hidden, num_visible)

    def __post_init__(self):
        if self.hidden_bias.shape != (self.num_hidden,):
            raise ValueError("hidden_bias shape does not match num_hidden")
        if self.visible_bias.shape != (self.num_visible,):
            raise ValueError("visible_bias shape does not match num_visible")
        if self.weights.shape != (self.num_hidden, self.num_visible):
            raise ValueError("weights shape does not match layer sizes")

    def __eq__(self, other):
        if not isinstance(other, RBMSpec):
            return NotImplemented
        return (
            self.num_hidden == other.num_hidden
            and self.num_visible == other.num_visible
            and self.seed == other.seed
            and np.array_equal(self.hidden_bias, other.hidden_bias)
            and np.array_equal(self.visible_bias, other.visible_bias)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None  # type: ignore[assignment]

    def score(self, assignment) -> float:
        """Direct RBM score of a hidden-then-visible binary assignment."""
        x = np.asarray(assignment, dtype=np.float64)
        h, v = x[: self.num_hidden], x[self.num_hidden:]
        return float(self.hidden_bias @ h + self.visible_bias @ v + h @ self.weights @ v)


def random_rbm(num_hidden: int, num_visible: int, seed: int) -> RBMSpec:
    """RBM with i.i.d. N(0, 1) biases and weights.

    Stream order: hidden biases, visible biases, then weights row-major.
    """
    if num_hidden < 1 or num_visible < 1:
        raise ValueError("an RBM needs at least one hidden and one visible unit")
    rng = _rng(seed)
    b = rng.standard_normal(num_hidden)
    c = rng.standard_normal(num_visible)
    W = rng.standard_normal((num_hidden, num_visible))
    return RBMSpec(num_hidden, num_visible, seed, b, c, W)


def rbm_for_units(units: int, seed: int) -> RBMSpec:
    """RBM with ``units`` total, split evenly between the two layers."""
    if units < 2 or units % 2:
        raise ValueError(f"total units must be even and >= 2, got {units}")
    return random_rbm(units // 2, units // 2, seed)


def rbm_to_factor_graph(rbm: RBMSpec) -> tuple[FactorGraph, np.ndarray]:
    """Binary graph with hidden units first, then visible units.

    Biases become evidence ``[0, bias]`` and every hidden/visible pair gets a
    dense factor ``[[0, 0], [0, w]]``.
    """
    graph = FactorGraph()
    hidden = graph.add_variables([2] * rbm.num_hidden)
    visible = graph.add_variables([2] * rbm.num_visible)
    for j, hj in enumerate(hidden):
        for k, vk in enumerate(visible):
            graph.add_dense_pairwise_factor(hj, vk, [[0.0, 0.0], [0.0, rbm.weights[j, k]]])
    biases = np.concatenate([rbm.hidden_bias, rbm.visible_bias])
    evidence = np.stack([np.zeros_like(biases), biases], axis=1).reshape(-1)
    return graph, evidence


def ising_grid(
    height: int,
    width: int,
    seed: int,
    coupling_scale: float = 1.0,
    field_scale: float = 1.0,
) -> tuple[FactorGraph, np.ndarray]:
    """Binary spin grid with nearest-neighbour couplings.

    State 0 is spin -1 and state 1 is spin +1. Fields are drawn first (one
    per site, row-major), then couplings for horizontal bonds, then vertical
    bonds. A coupling ``J`` contributes ``J * s_i * s_j`` and a field ``h``
    contributes ``h * s_i``.
    """
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be >= 1")
    rng = _rng(seed)
    fields = field_scale * rng.standard_normal(height * width)
    horizontal = coupling_scale * rng.standard_normal((height, width - 1))
    vertical = coupling_scale * rng.standard_normal((height - 1, width))

    graph = FactorGraph()
    graph.add_variables([2] * (height * width))

    def site(r, c):
        return r * width + c

    for r in range(height):
        for c in range(width - 1):
            J = horizontal[r, c]
            graph.add_dense_pairwise_factor(site(r, c), site(r, c + 1), [[J, -J], [-J, J]])
    for r in range(height - 1):
        for c in range(width):
            J = vertical[r, c]
            graph.add_dense_pairwise_factor(site(r, c), site(r + 1, c), [[J, -J], [-J, J]])
    evidence = np.stack([-fields, fields], axis=1).reshape(-1)
    return graph, evidence
