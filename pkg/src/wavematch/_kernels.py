"""Compiled inner loops for interval scoring over long streams."""

import numba as nb
import numpy as np

# starts per cache block; the running counts stay resident while every
# template position sweeps over the block
_BLOCK = 4096
# int16 block accumulator
MAX_POSITIONS = 32767


@nb.njit(cache=True, nogil=True)
def interval_scores_contiguous(x, lower, upper, stride, n_starts, out):
    m = lower.shape[0]
    acc = np.empty(_BLOCK, np.int16)
    for b0 in range(0, n_starts, _BLOCK):
        b1 = min(b0 + _BLOCK, n_starts)
        width = b1 - b0
        acc[:] = 0
        for i in range(m):
            lo = lower[i]
            hi = upper[i]
            off = b0 + i * stride
            # local slice lets LLVM prove no aliasing and vectorise the sweep
            seg = x[off:off + width]
            for s in range(width):
                v = seg[s]
                acc[s] += np.int16((v >= lo) & (v <= hi))
        out[b0:b1] = acc[:width]


@nb.njit(cache=True, nogil=True)
def interval_scores_at(x, lower, upper, stride, starts, out):
    m = lower.shape[0]
    for k in range(starts.shape[0]):
        s = starts[k]
        acc = 0
        for i in range(m):
            v = x[s + i * stride]
            acc += (v >= lower[i]) & (v <= upper[i])
        out[k] = acc


def all_interval_scores(x: np.ndarray, lower: np.ndarray, upper: np.ndarray, stride: int) -> np.ndarray:
    """Interval score for every start index ``0 .. len(x) - span``."""
    if lower.shape[0] > MAX_POSITIONS:
        raise ValueError(f"at most {MAX_POSITIONS} compared positions supported")
    span = (lower.shape[0] - 1) * stride + 1
    n_starts = x.shape[0] - span + 1
    if n_starts <= 0:
        return np.zeros(0, dtype=np.int32)
    out = np.empty(n_starts, dtype=np.int32)
    interval_scores_contiguous(
        np.ascontiguousarray(x, dtype=np.int16),
        np.ascontiguousarray(lower, dtype=np.int16),
        np.ascontiguousarray(upper, dtype=np.int16),
        int(stride),
        n_starts,
        out,
    )
    return out


def interval_scores_for(x, lower, upper, stride, starts) -> np.ndarray:
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    out = np.empty(starts.shape[0], dtype=np.int32)
    if starts.size:
        interval_scores_at(
            np.ascontiguousarray(x, dtype=np.int16),
            np.ascontiguousarray(lower, dtype=np.int16),
            np.ascontiguousarray(upper, dtype=np.int16),
            int(stride),
            starts,
            out,
        )
    return out


@nb.njit(cache=True, nogil=True)
def lane_scores(buf, start, lanes, stride, lower, upper, threshold, scores, valid):
    """Comparator bank plus adder tree for ``lanes`` matcher lanes of one cycle.

    Lane ``j`` reads ``buf[start + j + i*stride]`` for every template position
    ``i``. ``scores`` must be int16. Returns the number of valid lanes.
    """
    m = lower.shape[0]
    scores[:] = 0
    for i in range(m):
        lo = lower[i]
        hi = upper[i]
        off = start + i * stride
        seg = buf[off:off + lanes]
        for j in range(lanes):
            v = seg[j]
            scores[j] += np.int16((v >= lo) & (v <= hi))
    n_valid = 0
    for j in range(lanes):
        ok = scores[j] >= threshold
        valid[j] = ok
        n_valid += ok
    return n_valid


@nb.njit(cache=True, nogil=True, fastmath=True)
def dots_at(x, c, starts, out):
    """``out[k] = sum_i x[starts[k] + i] * c[i]`` in float64."""
    n = c.shape[0]
    for k in range(starts.shape[0]):
        s = starts[k]
        acc = 0.0
        for i in range(n):
            acc += x[s + i] * c[i]
        out[k] = acc
