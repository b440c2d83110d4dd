"""Hot numeric kernels for the Monte-Carlo experiments.

Two interchangeable backends: numba @njit kernels (default) and a pure-numpy
fallback, selected at import time by the FTNIM_DISABLE_NUMBA environment
variable.  Both produce identical decisions for the same inputs; the numba
path exists purely for speed (see benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("FTNIM_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLE:
    try:
        from numba import njit
        NUMBA_ENABLED = True
    except ImportError:    # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _apply_tapped_delay_py(x, taps, block_len, profile):
    """y_k = sum_l taps[row(k), l] * x_{k-l} with block-constant rows."""
    n = len(x)
    y = np.zeros(n, dtype=np.complex128)
    if taps.shape[0] == 1:
        for l in profile:
            y[l:] += taps[0, l] * x[:n - l]
        return y
    rows = np.minimum(np.arange(n) // block_len, taps.shape[0] - 1)
    for l in profile:
        y[l:] += taps[rows[l:], l] * x[:n - l]
    return y


def _identify_frames_py(stream, n_frames, frame_len, ptc, expected, stride,
                        l_c, c1, c2, r0):
    """Pilot-location decisions for every frame of a whitened stream."""
    n_p = len(ptc)
    delta_max = frame_len - n_p
    out = np.empty(n_frames, dtype=np.int64)
    for i in range(n_frames):
        frame = stream[i * frame_len:(i + 1) * frame_len]
        # full correlation field; the window sums need arbitrary lags anyway
        sw = np.lib.stride_tricks.sliding_window_view(frame, n_p)
        vals = np.abs(sw[:delta_max + 1] @ ptc) ** 2
        ev = vals[expected]
        peak = ev.max()
        keep = expected[ev >= c1 * peak]
        cands = np.unique(keep - (keep % stride))
        csum = np.concatenate(([0.0], np.cumsum(vals)))
        n_hat, r_th2 = 0, 0.0
        for d0 in cands:
            dl = d0 + l_c
            if dl > delta_max:
                continue
            lo0, hi0 = max(d0 - r0, 0), min(d0 + r0, delta_max)
            lam0 = (csum[hi0 + 1] - csum[lo0] - vals[d0]) / (hi0 - lo0)
            lo1, hi1 = max(dl - r0, 0), min(dl + r0, delta_max)
            lam1 = (csum[hi1 + 1] - csum[lo1] - vals[dl]) / (hi1 - lo1)
            den = lam0 + lam1
            mu = np.inf if den == 0.0 else (vals[d0] + vals[dl]) / den
            if mu > r_th2:
                r_th2 = c2 * mu
                n_hat = d0
        out[i] = n_hat
    return out


if NUMBA_ENABLED:

    @njit(cache=True)
    def _apply_tapped_delay_nb(x, taps, block_len, profile):
        n = len(x)
        y = np.zeros(n, dtype=np.complex128)
        n_rows = taps.shape[0]
        for l in profile:
            if n_rows == 1:
                c = taps[0, l]
                for k in range(l, n):
                    y[k] += c * x[k - l]
            else:
                for k in range(l, n):
                    row = min(k // block_len, n_rows - 1)
                    y[k] += taps[row, l] * x[k - l]
        return y

    @njit(cache=True)
    def _identify_frames_nb(stream, n_frames, frame_len, ptc, expected, stride,
                            l_c, c1, c2, r0):
        n_p = len(ptc)
        delta_max = frame_len - n_p
        out = np.empty(n_frames, dtype=np.int64)
        vals = np.empty(delta_max + 1, dtype=np.float64)
        for i in range(n_frames):
            base = i * frame_len
            for d in range(delta_max + 1):
                acc = 0.0 + 0.0j
                for m in range(n_p):
                    acc += stream[base + d + m] * ptc[m]
                vals[d] = acc.real * acc.real + acc.imag * acc.imag
            peak = 0.0
            for j in range(len(expected)):
                if vals[expected[j]] > peak:
                    peak = vals[expected[j]]
            thr = c1 * peak
            n_hat = 0
            r_th2 = 0.0
            prev_d0 = -1
            for j in range(len(expected)):
                d = expected[j]
                if vals[d] < thr:
                    continue
                d0 = d - (d % stride)
                if d0 == prev_d0:
                    continue
                prev_d0 = d0
                dl = d0 + l_c
                if dl > delta_max:
                    continue
                lo0 = max(d0 - r0, 0)
                hi0 = min(d0 + r0, delta_max)
                s0 = 0.0
                for q in range(lo0, hi0 + 1):
                    s0 += vals[q]
                lam0 = (s0 - vals[d0]) / (hi0 - lo0)
                lo1 = max(dl - r0, 0)
                hi1 = min(dl + r0, delta_max)
                s1 = 0.0
                for q in range(lo1, hi1 + 1):
                    s1 += vals[q]
                lam1 = (s1 - vals[dl]) / (hi1 - lo1)
                den = lam0 + lam1
                mu = np.inf if den == 0.0 else (vals[d0] + vals[dl]) / den
                if mu > r_th2:
                    r_th2 = c2 * mu
                    n_hat = d0
            out[i] = n_hat
        return out


def apply_tapped_delay(x, taps, block_len, profile) -> np.ndarray:
    """Time-varying tapped-delay-line filter (no noise)."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    taps = np.ascontiguousarray(taps, dtype=np.complex128)
    profile = np.asarray(profile, dtype=np.int64)
    if NUMBA_ENABLED:
        return _apply_tapped_delay_nb(x, taps, int(block_len), profile)
    return _apply_tapped_delay_py(x, taps, int(block_len), profile)


def identify_frames(stream, n_frames, frame_len, p_tilde_conj, expected,
                    stride, l_c, c1, c2, r0) -> np.ndarray:
    """Run the pilot-location detector on every frame of a whitened stream.

    `expected` must be sorted ascending; candidate pairs are therefore
    visited in ascending delta_c0 order, matching the reference detector.
    """
    stream = np.ascontiguousarray(stream, dtype=np.complex128)
    ptc = np.ascontiguousarray(p_tilde_conj, dtype=np.complex128)
    expected = np.ascontiguousarray(expected, dtype=np.int64)
    expected = expected[expected <= frame_len - len(ptc)]
    if NUMBA_ENABLED:
        return _identify_frames_nb(stream, int(n_frames), int(frame_len), ptc,
                                   expected, int(stride), int(l_c),
                                   float(c1), float(c2), int(r0))
    return _identify_frames_py(stream, int(n_frames), int(frame_len), ptc,
                               expected, int(stride), int(l_c),
                               float(c1), float(c2), int(r0))
