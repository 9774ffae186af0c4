"""Symbolic discrete factor graphs built from enumeration factors.

A factor lists the configurations of its scope that are allowed, each with a
finite log potential. Any configuration that is not listed is forbidden, so
there is never a need to store ``-inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Base class for malformed factor graph input."""


class InvalidCardinalityError(GraphError):
    pass


class InvalidScopeError(GraphError):
    pass


class InvalidConfigError(GraphError):
    pass


class DuplicateConfigError(GraphError):
    pass


class ArityError(GraphError):
    pass


class InvalidPotentialError(GraphError):
    pass


@dataclass(frozen=True)
class Variable:
    id: int
    cardinality: int


@dataclass(frozen=True, eq=False)
class EnumerationFactor:
    """A factor given by its valid configurations.

    ``valid_configs`` has shape ``(num_configs, arity)``; row ``c`` holds the
    state of every scope variable in configuration ``c`` and
    ``log_potentials[c]`` its score. Both arrays are read-only.
    """

    scope: tuple[int, ...]
    valid_configs: np.ndarray
    log_potentials: np.ndarray

    @property
    def arity(self) -> int:
        return len(self.scope)

    @property
    def num_configs(self) -> int:
        return self.valid_configs.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EnumerationFactor):
            return NotImplemented
        return (
            self.scope == other.scope
            and np.array_equal(self.valid_configs, other.valid_configs)
            and np.array_equal(self.log_potentials, other.log_potentials)
        )

    __hash__ = None  # type: ignore[assignment]


def _check_factor(
    cardinalities: Sequence[int],
    scope: tuple[int, ...],
    configs: np.ndarray,
    log_potentials: np.ndarray,
) -> None:
    if len(scope) == 0:
        raise InvalidScopeError("factor scope must be nonempty")
    if len(set(scope)) != len(scope):
        raise InvalidScopeError(f"duplicate variable in scope {scope}")
    for v in scope:
        if not 0 <= v < len(cardinalities):
            raise InvalidScopeError(f"scope references unknown variable {v}")
    if configs.ndim != 2 or configs.shape[1] != len(scope):
        raise ArityError(
            f"configs must have shape (m, {len(scope)}), got {configs.shape}"
        )
    if configs.shape[0] != log_potentials.shape[0]:
        raise ArityError(
            f"{configs.shape[0]} configs but {log_potentials.shape[0]} log potentials"
        )
    if configs.shape[0] == 0:
        raise InvalidConfigError("a factor needs at least one valid configuration")
    bounds = np.array([cardinalities[v] for v in scope])
    bad = (configs < 0) | (configs >= bounds)
    if bad.any():
        row = int(np.flatnonzero(bad.any(axis=1))[0])
        raise InvalidConfigError(
            f"config {tuple(configs[row].tolist())} out of bounds for "
            f"cardinalities {tuple(bounds.tolist())}"
        )
    if np.unique(configs, axis=0).shape[0] != configs.shape[0]:
        raise DuplicateConfigError("valid configurations must be distinct")
    if not np.all(np.isfinite(log_potentials)):
        raise InvalidPotentialError("log potentials must be finite")


@dataclass
class FactorGraph:
    """Variables with integer ids ``0..n-1`` plus a list of factors."""

    variables: list[Variable] = field(default_factory=list)
    factors: list[EnumerationFactor] = field(default_factory=list)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def cardinalities(self) -> list[int]:
        return [v.cardinality for v in self.variables]

    def add_variables(self, cardinalities: Iterable[int]) -> list[int]:
        cards = [int(c) for c in cardinalities]
        for c in cards:
            if c < 2:
                raise InvalidCardinalityError(f"cardinality must be >= 2, got {c}")
        start = len(self.variables)
        ids = list(range(start, start + len(cards)))
        self.variables.extend(Variable(i, c) for i, c in zip(ids, cards))
        return ids

    def add_enumeration_factor(
        self,
        scope: Sequence[int],
        valid_configs,
        log_potentials,
    ) -> int:
        scope = tuple(int(v) for v in scope)
        configs = np.array(valid_configs, dtype=np.int64)
        if configs.ndim == 1 and configs.size == 0:
            configs = configs.reshape(0, len(scope))
        logpots = np.array(log_potentials, dtype=np.float64).reshape(-1)
        _check_factor(self.cardinalities, scope, configs, logpots)
        configs.setflags(write=False)
        logpots.setflags(write=False)
        self.factors.append(EnumerationFactor(scope, configs, logpots))
        return len(self.factors) - 1

    def add_dense_pairwise_factor(self, var_i: int, var_j: int, log_potential_matrix) -> int:
        """Add a factor over every ``d_i * d_j`` configuration, row-major."""
        matrix = np.asarray(log_potential_matrix, dtype=np.float64)
        cards = self.cardinalities
        for v in (var_i, var_j):
            if not 0 <= v < len(cards):
                raise InvalidScopeError(f"unknown variable {v}")
        shape = (cards[var_i], cards[var_j])
        if matrix.shape != shape:
            raise ArityError(f"matrix shape {matrix.shape} does not match {shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidPotentialError("log potential matrix has non-finite entries")
        configs = np.stack(np.unravel_index(np.arange(matrix.size), shape), axis=1)
        return self.add_enumeration_factor((var_i, var_j), configs, matrix.reshape(-1))

    def validate(self) -> None:
        """Re-check every invariant; raise the matching GraphError on failure."""
        for pos, var in enumerate(self.variables):
            if var.id != pos:
                raise GraphError(f"variable ids must be dense, found {var.id} at {pos}")
            if var.cardinality < 2:
                raise InvalidCardinalityError(
                    f"variable {var.id} has cardinality {var.cardinality}"
                )
        cards = self.cardinalities
        for factor in self.factors:
            _check_factor(
                cards,
                factor.scope,
                np.asarray(factor.valid_configs),
                np.asarray(factor.log_potentials),
            )
