"""scikit-learn style front end for loopy BP.

``fit`` takes a :class:`~flatbp.graph.FactorGraph` and compiles it. The
``X`` passed to ``predict`` and friends is evidence: one row of flat
per-variable-state log potentials per instance, each row solved separately.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from flatbp.graph import FactorGraph
from flatbp.inference import (
    MAX_PRODUCT,
    SUM_PRODUCT,
    BPOptions,
    ConfigurationError,
    run_bp,
    score_assignments,
)
from flatbp.wiring import CompiledGraph, compile_graph


def check_evidence_rows(compiled: CompiledGraph, X) -> np.ndarray:
    """Coerce evidence to a finite 2-D float array with one row per instance."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_min_features=0)
    if X.shape[1] != compiled.num_var_states:
        raise ConfigurationError(
            f"evidence rows must have {compiled.num_var_states} entries, got {X.shape[1]}"
        )
    return X


def check_graph(graph) -> FactorGraph:
    if not isinstance(graph, FactorGraph):
        raise TypeError(f"expected a FactorGraph, got {type(graph).__name__}")
    graph.validate()
    return graph


class LoopyBP(BaseEstimator):
    """Damped parallel loopy belief propagation.

    Parameters
    ----------
    mode : {"max_product", "sum_product"}
    num_iters : int, default=200
    damping : float, default=0.5
        Weight kept from the previous factor-to-variable message.
    convergence_tol : float, default=0.0
        Stop early once no message moves more than this. ``0`` disables it.
    neg_inf_clamp : float, default=-1e20
    tie_tolerance : float, default=1e-10
        Belief gap below which states count as tied; ties go to the lowest state.

    Attributes
    ----------
    compiled_ : CompiledGraph
    n_variables_ : int
    n_var_states_ : int
    """

    def __init__(
        self,
        mode=MAX_PRODUCT,
        num_iters=200,
        damping=0.5,
        convergence_tol=0.0,
        neg_inf_clamp=-1e20,
        tie_tolerance=1e-10,
    ):
        self.mode = mode
        self.num_iters = num_iters
        self.damping = damping
        self.convergence_tol = convergence_tol
        self.neg_inf_clamp = neg_inf_clamp
        self.tie_tolerance = tie_tolerance

    def _options(self, mode=None) -> BPOptions:
        return BPOptions(
            mode=mode or self.mode,
            num_iters=self.num_iters,
            damping=self.damping,
            convergence_tol=self.convergence_tol,
            neg_inf_clamp=self.neg_inf_clamp,
            tie_tolerance=self.tie_tolerance,
        )

    def _check_fitted(self):
        if not hasattr(self, "compiled_"):
            raise NotFittedError("call fit with a FactorGraph first")

    def fit(self, graph, y=None):
        self._options()
        self.compiled_ = compile_graph(check_graph(graph))
        self.n_variables_ = self.compiled_.num_variables
        self.n_var_states_ = self.compiled_.num_var_states
        return self

    def infer(self, X, mode=None):
        """Run BP on each evidence row; return the list of InferenceResults."""
        self._check_fitted()
        X = check_evidence_rows(self.compiled_, X)
        options = self._options(mode)
        return [run_bp(self.compiled_, row, options)[1] for row in X]

    def predict(self, X) -> np.ndarray:
        """Decoded states, shape ``(n_samples, n_variables)``."""
        results = self.infer(X)
        return np.array([r.decoded for r in results], dtype=np.int64).reshape(
            len(results), self.n_variables_
        )

    def predict_marginals(self, X) -> list[list[np.ndarray]]:
        """Sum-product marginals per row, regardless of ``mode``."""
        return [r.marginals for r in self.infer(X, mode=SUM_PRODUCT)]

    def score_samples(self, X, assignments) -> np.ndarray:
        """Log-domain score of ``assignments[i]`` under evidence ``X[i]``."""
        self._check_fitted()
        X = check_evidence_rows(self.compiled_, X)
        assignments = np.asarray(assignments).reshape(len(X), -1)
        return np.array(
            [score_assignments(self.compiled_, e, a[None, :])[0] for e, a in zip(X, assignments)]
        )

    def fit_predict(self, graph, X) -> np.ndarray:
        return self.fit(graph).predict(X)
