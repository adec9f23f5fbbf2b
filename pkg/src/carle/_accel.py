"""Hot numeric kernels: numba fast path with a pure-numpy fallback.

Set ``CARLE_DISABLE_NUMBA=1`` to force the numpy path. Both paths compute
the same sums; tests assert agreement and ``benchmarks/bench_kernels.py``
compares their speed.
"""

import math
import os

import numpy as np

# envelope exp(-tau^2/2) drops below 1e-8 beyond this |tau|
TRUNC_TAU = math.sqrt(2.0 * math.log(1e8))


def _numba_disabled() -> bool:
    return os.environ.get("CARLE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}


_HAVE_NUMBA = False
if not _numba_disabled():
    # workqueue is always available; avoids the broken-TBB probe warning
    os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
    try:
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _HAVE_NUMBA = False


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return "numba" if _HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Wavelet scalogram kernel
#
# out[i, b] = (dt / sqrt(a_i)) * sum_t x[t] * conj(psi)((t - b) / a_i)
# with psi(tau) = exp(1j * phase_coeff * tau) * exp(-tau^2 / 2), the signal
# treated as zero outside the window, and the sum truncated where the
# envelope falls below 1e-8.
# ---------------------------------------------------------------------------


def _cwt_numpy(x, scales, phase_coeff, dt):
    n_samples = x.shape[0]
    out = np.empty((scales.shape[0], n_samples), dtype=np.complex128)
    for i in range(scales.shape[0]):
        a = scales[i]
        half = int(math.ceil(TRUNC_TAU * a))
        tau = np.arange(-half, half + 1, dtype=np.float64) / a
        kernel = np.exp(-0.5 * tau * tau) * np.exp(-1j * phase_coeff * tau)
        full = np.convolve(x, kernel[::-1])
        out[i] = full[half:half + n_samples] * (dt / math.sqrt(a))
    return out


if _HAVE_NUMBA:

    @njit(cache=True, parallel=True, fastmath=True)
    def _cwt_numba(x, scales, phase_coeff, dt, out):  # pragma: no cover - compiled
        n_samples = x.shape[0]
        for i in prange(scales.shape[0]):
            a = scales[i]
            half = int(math.ceil(TRUNC_TAU * a))
            inv_a = 1.0 / a
            norm = dt / math.sqrt(a)
            width = 2 * half + 1
            taps_re = np.empty(width)
            taps_im = np.empty(width)
            for d in range(width):
                tau = (d - half) * inv_a
                env = math.exp(-0.5 * tau * tau)
                ang = phase_coeff * tau
                taps_re[d] = env * math.cos(ang)
                taps_im[d] = -env * math.sin(ang)
            for b in range(n_samples):
                lo = b - half
                if lo < 0:
                    lo = 0
                hi = b + half
                if hi > n_samples - 1:
                    hi = n_samples - 1
                acc_re = 0.0
                acc_im = 0.0
                for t in range(lo, hi + 1):
                    d = t - b + half
                    acc_re += x[t] * taps_re[d]
                    acc_im += x[t] * taps_im[d]
                out[i, b] = complex(acc_re * norm, acc_im * norm)


def cwt_scalogram(x, scales, phase_coeff, dt):
    """Complex wavelet coefficients of one window, shape (n_scales, len(x))."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    scales = np.ascontiguousarray(scales, dtype=np.float64)
    if _HAVE_NUMBA:
        out = np.empty((scales.shape[0], x.shape[0]), dtype=np.complex128)
        _cwt_numba(x, scales, float(phase_coeff), float(dt), out)
        return out
    return _cwt_numpy(x, scales, float(phase_coeff), float(dt))


# ---------------------------------------------------------------------------
# CART split scan
#
# Given one feature column sorted ascending (with targets aligned), find the
# split position minimising SSE_left + SSE_right. Candidate thresholds are
# midpoints between distinct adjacent values; the lowest-threshold minimum
# wins. Returns (sse, threshold, left_count); left_count < 0 means no split.
# ---------------------------------------------------------------------------


def _split_scan_numpy(values, targets, min_leaf):
    n = targets.shape[0]
    if n < 2 * min_leaf:
        return math.inf, 0.0, -1
    c1 = np.cumsum(targets)
    c2 = np.cumsum(targets * targets)
    tot1 = c1[-1]
    tot2 = c2[-1]
    i = np.arange(1, n)  # left-side count at each candidate position
    valid = (i >= min_leaf) & (n - i >= min_leaf) & (values[:-1] < values[1:])
    if not valid.any():
        return math.inf, 0.0, -1
    s1 = c1[:-1]
    s2 = c2[:-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        sse = (s2 - s1 * s1 / i) + ((tot2 - s2) - (tot1 - s1) * (tot1 - s1) / (n - i))
    sse = np.where(valid, sse, math.inf)
    j = int(np.argmin(sse))  # first minimum = lowest threshold wins
    return float(sse[j]), 0.5 * (values[j] + values[j + 1]), j + 1


if _HAVE_NUMBA:

    @njit(cache=True)
    def _split_scan_numba(values, targets, min_leaf):  # pragma: no cover - compiled
        n = targets.shape[0]
        best_sse = math.inf
        best_thr = 0.0
        best_pos = -1
        s1 = 0.0
        s2 = 0.0
        tot1 = 0.0
        tot2 = 0.0
        for i in range(n):
            t = targets[i]
            tot1 += t
            tot2 += t * t
        for i in range(1, n):
            y = targets[i - 1]
            s1 += y
            s2 += y * y
            if i < min_leaf or n - i < min_leaf:
                continue
            if values[i - 1] >= values[i]:
                continue
            sse = (s2 - s1 * s1 / i) + ((tot2 - s2) - (tot1 - s1) * (tot1 - s1) / (n - i))
            if sse < best_sse:
                best_sse = sse
                best_thr = 0.5 * (values[i - 1] + values[i])
                best_pos = i
        return best_sse, best_thr, best_pos


def split_scan(values, targets, min_leaf):
    """Best variance-reduction split of one sorted feature column."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if _HAVE_NUMBA:
        return _split_scan_numba(values, targets, int(min_leaf))
    return _split_scan_numpy(values, targets, int(min_leaf))
