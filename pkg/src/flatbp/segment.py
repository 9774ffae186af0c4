"""Segment reductions over sorted flat arrays.

Segments are described by an offsets array of length ``n + 1``; segment ``i``
covers ``values[offsets[i]:offsets[i + 1]]`` and may be empty. Reductions
run in a fixed left-to-right order, so results are bitwise reproducible.
"""

import numpy as np


def _nonempty_starts(offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nonempty = offsets[1:] > offsets[:-1]
    return nonempty, offsets[:-1][nonempty]


def segment_sum(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    out = np.zeros(len(offsets) - 1, dtype=np.float64)
    nonempty, starts = _nonempty_starts(offsets)
    if starts.size:
        out[nonempty] = np.add.reduceat(values, starts)
    return out


def segment_max(values: np.ndarray, offsets: np.ndarray, empty_value: float) -> np.ndarray:
    out = np.full(len(offsets) - 1, empty_value, dtype=np.float64)
    nonempty, starts = _nonempty_starts(offsets)
    if starts.size:
        out[nonempty] = np.maximum.reduceat(values, starts)
    return out


def segment_logsumexp(
    values: np.ndarray, offsets: np.ndarray, empty_value: float
) -> np.ndarray:
    """``log(sum(exp(segment)))`` with the segment max factored out."""
    peak = segment_max(values, offsets, empty_value)
    seg_ids = np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))
    shifted = np.exp(values - peak[seg_ids])
    out = peak.copy()
    nonempty, starts = _nonempty_starts(offsets)
    if starts.size:
        out[nonempty] += np.log(np.add.reduceat(shifted, starts))
    return out


def segment_argmax(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Position of the first maximum within each (nonempty) segment."""
    sizes = np.diff(offsets)
    if sizes.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(sizes == 0):
        raise ValueError("segment_argmax needs nonempty segments")
    padded = np.full((sizes.size, int(sizes.max())), -np.inf)
    rows = np.repeat(np.arange(sizes.size), sizes)
    cols = np.arange(offsets[-1]) - offsets[:-1][rows]
    padded[rows, cols] = values
    return np.argmax(padded, axis=1)
