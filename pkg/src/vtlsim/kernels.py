"""Numeric kernels for the channel model.

Each kernel has a numba version and a pure-numpy version with identical
results. Set ``VTLSIM_DISABLE_NUMBA=1`` (or run without numba installed) to
force the numpy path. Randomness never enters a kernel: callers draw the
uniforms, so both paths consume the generator identically.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("VTLSIM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
except ImportError:
    njit = None

USING_NUMBA = njit is not None


def delivery_probability_np(sums, reliable_sum, cutoff_sum, zero_sum, p_max, p_cutoff):
    s = np.asarray(sums, dtype=np.float64)
    return np.interp(s, [reliable_sum, cutoff_sum, zero_sum], [p_max, p_cutoff, 0.0])


def success_indices_np(uniforms, p):
    return np.flatnonzero(np.asarray(uniforms) < p)


def gap_stats_np(uniforms, p):
    """(n_received, mean gap in slots) for Bernoulli(p) deliveries."""
    idx = success_indices_np(uniforms, p)
    if idx.size < 2:
        return idx.size, np.nan
    return idx.size, float(idx[-1] - idx[0]) / (idx.size - 1)


def _delivery_probability_loop(sums, reliable_sum, cutoff_sum, zero_sum, p_max, p_cutoff):
    # segment selection and arithmetic mirror np.interp so both paths agree bitwise
    out = np.empty(sums.shape[0], dtype=np.float64)
    slope1 = (p_cutoff - p_max) / (cutoff_sum - reliable_sum)
    slope2 = (0.0 - p_cutoff) / (zero_sum - cutoff_sum)
    for i in range(sums.shape[0]):
        s = sums[i]
        if s <= reliable_sum:
            out[i] = p_max
        elif s < cutoff_sum:
            out[i] = slope1 * (s - reliable_sum) + p_max
        elif s < zero_sum:
            out[i] = slope2 * (s - cutoff_sum) + p_cutoff
        else:
            out[i] = 0.0
    return out


def _gap_stats_loop(uniforms, p):
    n = 0
    first = -1
    last = -1
    for i in range(uniforms.shape[0]):
        if uniforms[i] < p:
            if first < 0:
                first = i
            last = i
            n += 1
    if n < 2:
        return n, np.nan
    return n, (last - first) / (n - 1)


if USING_NUMBA:
    _dp_jit = njit(cache=True)(_delivery_probability_loop)
    _gap_jit = njit(cache=True)(_gap_stats_loop)

    def delivery_probability_vec(sums, reliable_sum, cutoff_sum, zero_sum, p_max, p_cutoff):
        s = np.ascontiguousarray(sums, dtype=np.float64)
        return _dp_jit(s, float(reliable_sum), float(cutoff_sum), float(zero_sum),
                       float(p_max), float(p_cutoff))

    def gap_stats(uniforms, p):
        n, mean = _gap_jit(np.ascontiguousarray(uniforms, dtype=np.float64), float(p))
        return int(n), float(mean)
else:
    delivery_probability_vec = delivery_probability_np

    def gap_stats(uniforms, p):
        n, mean = gap_stats_np(uniforms, p)
        return int(n), float(mean)
