"""Damped parallel loopy belief propagation on flat message arrays.

Messages live in the log domain, one entry per edge state. Each iteration
recomputes every variable-to-factor message from the previous
factor-to-variable messages, then every factor-to-variable message from the
new variable-to-factor messages, and finally damps and normalizes the latter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from flatbp.segment import segment_argmax, segment_logsumexp, segment_max
from flatbp.wiring import CompiledGraph

MAX_PRODUCT = "max_product"
SUM_PRODUCT = "sum_product"
DEFAULT_CLAMP = -1e20
DEFAULT_TIE_TOLERANCE = 1e-10

# Returned by score_assignment when some factor forbids the assignment.
INVALID_SCORE = float("-inf")


class ConfigurationError(ValueError):
    """Inputs do not fit the compiled graph, or options are out of range."""


@dataclass(frozen=True)
class BPOptions:
    mode: str = MAX_PRODUCT
    num_iters: int = 200
    damping: float = 0.5
    convergence_tol: float = 0.0
    neg_inf_clamp: float = DEFAULT_CLAMP
    # beliefs within this relative distance of the maximum count as tied
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE

    def __post_init__(self):
        if self.mode not in (MAX_PRODUCT, SUM_PRODUCT):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.num_iters < 0:
            raise ConfigurationError("num_iters must be >= 0")
        if not 0.0 <= self.damping < 1.0:
            raise ConfigurationError("damping must lie in [0, 1)")
        if self.convergence_tol < 0:
            raise ConfigurationError("convergence_tol must be >= 0")
        if not (np.isfinite(self.neg_inf_clamp) and self.neg_inf_clamp < 0):
            raise ConfigurationError("neg_inf_clamp must be a finite negative number")
        if self.tie_tolerance < 0:
            raise ConfigurationError("tie_tolerance must be >= 0")


@dataclass
class MessageState:
    ftov: np.ndarray
    vtof: np.ndarray


@dataclass
class InferenceResult:
    beliefs: np.ndarray
    decoded: np.ndarray
    score: float
    iterations_run: int
    final_delta: float
    marginals: list[np.ndarray] | None = field(default=None, repr=False)


def check_evidence(compiled: CompiledGraph, evidence=None) -> np.ndarray:
    """Return evidence as a float array sized to the graph (zeros if None)."""
    if evidence is None:
        return np.zeros(compiled.num_var_states)
    values = np.asarray(evidence, dtype=np.float64)
    if values.shape != (compiled.num_var_states,):
        raise ConfigurationError(
            f"evidence must have shape ({compiled.num_var_states},), got {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("evidence must be finite")
    return values


def _check_messages(compiled: CompiledGraph, messages: np.ndarray, name: str) -> np.ndarray:
    messages = np.asarray(messages, dtype=np.float64)
    if messages.shape != (compiled.num_edge_states,):
        raise ConfigurationError(
            f"{name} must have shape ({compiled.num_edge_states},), got {messages.shape}"
        )
    return messages


def _split_large(values: np.ndarray, clamp: float) -> tuple[np.ndarray, np.ndarray]:
    # Near-clamp entries are summed separately so that excluding one of them
    # from a total does not cancel away the small terms.
    large = np.abs(values) >= np.sqrt(-clamp)
    return np.where(large, 0.0, values), np.where(large, values, 0.0)


def init_messages(compiled: CompiledGraph) -> MessageState:
    n = compiled.num_edge_states
    return MessageState(ftov=np.zeros(n), vtof=np.zeros(n))


def update_vtof(
    compiled: CompiledGraph,
    evidence: np.ndarray,
    ftov: np.ndarray,
    neg_inf_clamp: float = DEFAULT_CLAMP,
) -> np.ndarray:
    """Evidence plus all incoming factor messages except the edge's own."""
    w = compiled.wiring
    ftov = _check_messages(compiled, ftov, "ftov")
    small, large = _split_large(ftov, neg_inf_clamp)
    total_small = np.bincount(w.edge_to_var, weights=small, minlength=w.num_var_states)
    total_large = np.bincount(w.edge_to_var, weights=large, minlength=w.num_var_states)
    vtof = (
        evidence[w.edge_to_var]
        + (total_small[w.edge_to_var] - small)
        + (total_large[w.edge_to_var] - large)
    )
    return np.maximum(vtof, neg_inf_clamp)


def update_ftov(
    compiled: CompiledGraph,
    vtof: np.ndarray,
    mode: str = MAX_PRODUCT,
    neg_inf_clamp: float = DEFAULT_CLAMP,
) -> np.ndarray:
    """Undamped factor-to-variable messages.

    For every config entry, the configuration's total score minus the entry's
    own incoming message is reduced into the entry's edge state, by max or by
    log-sum-exp. Edge states that no configuration supports get the clamp.
    """
    w = compiled.wiring
    vtof = _check_messages(compiled, vtof, "vtof")
    if w.num_config_entries == 0:
        return np.full(w.num_edge_states, neg_inf_clamp)

    gathered = vtof[w.config_entry_to_edge_state]
    small, large = _split_large(gathered, neg_inf_clamp)
    config_small = np.add.reduceat(small, w.config_entry_offset[:-1])
    config_large = np.add.reduceat(large, w.config_entry_offset[:-1])
    seg = w.config_segment
    entry_values = (
        w.config_log_potentials[seg]
        + (config_small[seg] - small)
        + (config_large[seg] - large)
    )
    entry_values = np.maximum(entry_values, neg_inf_clamp)

    by_edge_state = entry_values[w.edge_state_entry_order]
    if mode == MAX_PRODUCT:
        raw = segment_max(by_edge_state, w.edge_state_entry_offset, neg_inf_clamp)
    elif mode == SUM_PRODUCT:
        raw = segment_logsumexp(by_edge_state, w.edge_state_entry_offset, neg_inf_clamp)
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return np.maximum(raw, neg_inf_clamp)


def normalize_messages(
    compiled: CompiledGraph, messages: np.ndarray, neg_inf_clamp: float = DEFAULT_CLAMP
) -> np.ndarray:
    """Shift each edge's message so its maximum entry is zero."""
    w = compiled.wiring
    if w.num_edge_states == 0:
        return messages.copy()
    peaks = np.maximum.reduceat(messages, w.edge_state_offset[:-1])
    shifted = messages - np.repeat(peaks, np.diff(w.edge_state_offset))
    return np.maximum(shifted, neg_inf_clamp)


def damp(
    compiled: CompiledGraph,
    old_ftov: np.ndarray,
    raw_ftov: np.ndarray,
    damping: float,
    neg_inf_clamp: float = DEFAULT_CLAMP,
) -> np.ndarray:
    if not 0.0 <= damping < 1.0:
        raise ConfigurationError("damping must lie in [0, 1)")
    if damping == 0.0:
        blended = raw_ftov
    else:
        # (1 - a) * raw + a * old, arranged so raw == old is reproduced exactly
        blended = old_ftov + (1.0 - damping) * (raw_ftov - old_ftov)
    return normalize_messages(compiled, blended, neg_inf_clamp)


def compute_beliefs(
    compiled: CompiledGraph,
    evidence: np.ndarray,
    ftov: np.ndarray,
    neg_inf_clamp: float = DEFAULT_CLAMP,
) -> np.ndarray:
    w = compiled.wiring
    incoming = np.bincount(w.edge_to_var, weights=ftov, minlength=w.num_var_states)
    return np.maximum(evidence + incoming, neg_inf_clamp)


def decode_map_states(
    compiled: CompiledGraph,
    beliefs: np.ndarray,
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE,
) -> np.ndarray:
    """Per-variable argmax of the beliefs, ties going to the lowest state.

    Max-product often produces exactly tied beliefs, which rounding can then
    split either way. A state ties with the maximum ``m`` when it is within
    ``tie_tolerance * max(1, |m|)`` of it.
    """
    offsets = compiled.wiring.var_state_offset
    if len(offsets) == 1:
        return np.zeros(0, dtype=np.int64)
    peaks = np.maximum.reduceat(beliefs, offsets[:-1])
    cutoff = peaks - tie_tolerance * np.maximum(1.0, np.abs(peaks))
    near_top = beliefs >= np.repeat(cutoff, np.diff(offsets))
    return segment_argmax(near_top.astype(np.float64), offsets)


def beliefs_to_marginals(compiled: CompiledGraph, beliefs: np.ndarray) -> list[np.ndarray]:
    """Softmax of each variable's belief vector."""
    offsets = compiled.wiring.var_state_offset
    out = []
    for lo, hi in zip(offsets[:-1], offsets[1:]):
        b = beliefs[lo:hi]
        p = np.exp(b - b.max())
        out.append(p / p.sum())
    return out


def score_assignments(compiled: CompiledGraph, evidence, assignments) -> np.ndarray:
    """Scores of a batch of assignments, shape ``(n, num_variables)``.

    Entries are ``INVALID_SCORE`` where some factor has no valid
    configuration matching the assignment.
    """
    w = compiled.wiring
    evidence = check_evidence(compiled, evidence)
    x = np.asarray(assignments)
    if x.ndim != 2 or x.shape[1] != w.num_variables:
        raise ConfigurationError(
            f"assignments must have shape (n, {w.num_variables}), got {x.shape}"
        )
    if not np.issubdtype(x.dtype, np.integer):
        if not np.all(np.equal(np.mod(x, 1), 0)):
            raise IndexError("assignment states must be integers")
        x = x.astype(np.int64)
    if np.any(x < 0) or np.any(x >= w.cardinalities):
        raise IndexError("assignment state out of range")

    scores = evidence[w.var_state_offset[:-1] + x].sum(axis=1)
    if w.num_factors == 0:
        return scores
    contributions = x[:, w.edge_var] * w.edge_key_stride
    keys = np.add.reduceat(contributions, w.factor_edge_offset[:-1], axis=1)
    keys = keys + w.factor_key_offset[:-1]
    pos = np.searchsorted(w.sorted_config_keys, keys)
    pos = np.minimum(pos, w.num_configs - 1)
    found = w.sorted_config_keys[pos] == keys
    logpots = w.config_log_potentials[w.sorted_config_ids[pos]]
    valid = found.all(axis=1)
    factor_total = np.where(found, logpots, 0.0).sum(axis=1)
    return np.where(valid, scores + factor_total, INVALID_SCORE)


def score_assignment(compiled: CompiledGraph, evidence, assignment) -> float:
    x = np.asarray(assignment).reshape(1, -1)
    return float(score_assignments(compiled, evidence, x)[0])


def run_bp(
    compiled: CompiledGraph,
    evidence=None,
    options: BPOptions | None = None,
    init: MessageState | None = None,
) -> tuple[MessageState, InferenceResult]:
    """Run damped parallel LBP and decode.

    ``init`` resumes from earlier messages; by default all messages start at
    zero. Iteration stops after ``options.num_iters`` rounds, or earlier when
    ``convergence_tol > 0`` and the largest change in any factor-to-variable
    message drops to or below it.
    """
    options = options or BPOptions()
    evidence = check_evidence(compiled, evidence)
    clamp = options.neg_inf_clamp
    if init is None:
        ftov = init_messages(compiled).ftov
    else:
        ftov = _check_messages(compiled, init.ftov, "ftov").copy()

    iterations = 0
    delta = 0.0
    for _ in range(options.num_iters):
        vtof = update_vtof(compiled, evidence, ftov, clamp)
        raw = update_ftov(compiled, vtof, options.mode, clamp)
        new_ftov = damp(compiled, ftov, raw, options.damping, clamp)
        delta = float(np.max(np.abs(new_ftov - ftov))) if new_ftov.size else 0.0
        ftov = new_ftov
        iterations += 1
        if options.convergence_tol > 0 and delta <= options.convergence_tol:
            break

    state = MessageState(ftov=ftov, vtof=update_vtof(compiled, evidence, ftov, clamp))
    beliefs = compute_beliefs(compiled, evidence, ftov, clamp)
    decoded = decode_map_states(compiled, beliefs, options.tie_tolerance)
    result = InferenceResult(
        beliefs=beliefs,
        decoded=decoded,
        score=score_assignment(compiled, evidence, decoded),
        iterations_run=iterations,
        final_delta=delta,
    )
    if options.mode == SUM_PRODUCT:
        result.marginals = beliefs_to_marginals(compiled, beliefs)
    return state, result
