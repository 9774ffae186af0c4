"""Discrete factor graphs and damped loopy belief propagation on flat arrays."""

from flatbp.estimator import LoopyBP
from flatbp.graph import (
    ArityError,
    DuplicateConfigError,
    EnumerationFactor,
    FactorGraph,
    GraphError,
    InvalidCardinalityError,
    InvalidConfigError,
    InvalidPotentialError,
    InvalidScopeError,
    Variable,
)
from flatbp.inference import (
    INVALID_SCORE,
    MAX_PRODUCT,
    SUM_PRODUCT,
    BPOptions,
    ConfigurationError,
    InferenceResult,
    MessageState,
    beliefs_to_marginals,
    check_evidence,
    compute_beliefs,
    damp,
    decode_map_states,
    init_messages,
    run_bp,
    score_assignment,
    score_assignments,
    update_ftov,
    update_vtof,
)
from flatbp.oracle import (
    BudgetExceededError,
    InfeasibleError,
    OracleBudget,
    brute_force_map,
    brute_force_marginals,
    rbm_exact_map,
)
from flatbp.uai import parse_uai, read_uai, uai_to_graph, write_uai
from flatbp.wiring import CompiledGraph, Wiring, compile_graph
from flatbp.zoo import RBMSpec, ising_grid, random_rbm, rbm_to_factor_graph

__version__ = "0.1.0"
