"""Pilot sequence location identification.

The receiver correlates the whitened samples with the whitened pilot at the
expected spike locations, thresholds against the strongest peak, and ranks the
surviving candidate pairs (delta_c0, delta_c0 + L_c) by a local-contrast
measure that exploits the two-path structure of the HF channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .framing import PlacementSet
from .waveform import TapSet


@dataclass(frozen=True)
class WhitenedPilot:
    """Pilot after FTN-induced ISI and whitening, with cached |R_pp(d)|^2."""

    p_tilde: np.ndarray
    autocorr_sq: np.ndarray

    @property
    def n_p(self) -> int:
        return len(self.p_tilde)

    @property
    def peak(self) -> float:
        """|R_pp(0)|^2 = (sum |p~_k|^2)^2."""
        return float(self.autocorr_sq[0])


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds of the identification algorithm.

    c1: fraction of the strongest correlation admitted as candidates
    c2: factor applied to the running measure threshold on each update
    r0: local-average radius, must stay below the channel memory
    """

    c1: float = 0.5
    c2: float = 1.0
    r0: int | None = None    # None: use l_c - 1

    def __post_init__(self):
        if not 0.0 < self.c1 <= 1.0:
            raise ValueError(f"c1 must be in (0, 1], got {self.c1}")
        if self.c2 <= 0.0:
            raise ValueError(f"c2 must be positive, got {self.c2}")

    def radius(self, l_c: int) -> int:
        r0 = self.r0 if self.r0 is not None else l_c - 1
        if not 0 < r0 < max(l_c, 2):
            raise ValueError(f"r0={r0} must be in (0, l_c={l_c})")
        return r0


def whitened_pilot(p, v: TapSet) -> WhitenedPilot:
    """p~_k = sum_j p_j v_{k-j} for k = 0..N_p-1, plus its |autocorrelation|^2."""
    p = np.asarray(p, dtype=complex)
    n_p = len(p)
    pt = np.convolve(p, np.asarray(v.taps))[:n_p]
    ac = np.array([np.dot(pt[:n_p - d], pt[d:].conj()) for d in range(n_p)])
    return WhitenedPilot(p_tilde=pt, autocorr_sq=np.abs(ac) ** 2)


def cross_corr_sq(r_tilde, wp: WhitenedPilot, deltas) -> dict:
    """|R_rp(delta)|^2 = |sum_m r~_{delta+m} p~*_m|^2 for each requested lag."""
    r = np.asarray(r_tilde, dtype=complex)
    out = {}
    ptc = wp.p_tilde.conj()
    n_p = wp.n_p
    for d in np.asarray(deltas, dtype=int):
        if d < 0 or d + n_p > len(r):
            raise ValueError(f"lag {d} out of range for {len(r)} samples")
        out[int(d)] = float(np.abs(np.dot(r[d:d + n_p], ptc)) ** 2)
    return out


def local_lambda(values, delta: int, r0: int, delta_min: int, delta_max: int) -> float:
    """Average of |R|^2 over the radius-r0 window around delta, excluding
    delta itself; the window is truncated at [delta_min, delta_max]."""
    lo = max(delta - r0, delta_min)
    hi = min(delta + r0, delta_max)
    if hi <= lo:
        raise ValueError("zero-width local window")
    total = sum(values[j] for j in range(lo, hi + 1))
    return (total - values[delta]) / (hi - lo)


def measure_mu(values, d0: int, dl: int, r0: int, bounds) -> float:
    """Joint two-spike contrast (values at both expected spikes over the sum
    of their local averages); returns +inf on a zero background."""
    delta_min, delta_max = bounds
    if not d0 < dl:
        raise ValueError("d0 must be below dl")
    num = values[d0] + values[dl]
    den = (local_lambda(values, d0, r0, delta_min, delta_max)
           + local_lambda(values, dl, r0, delta_min, delta_max))
    if den == 0.0:
        return math.inf
    return num / den


def dump_cross_corr_csv(r_tilde, wp: WhitenedPilot, ps: PlacementSet,
                        path, all_lags: bool = False) -> None:
    """Write |R_rp(delta)|^2 as CSV rows (delta, value) for plotting.

    By default only the expected spike locations are dumped; set all_lags for
    the full lag axis.
    """
    r = np.asarray(r_tilde, dtype=complex)
    delta_max = len(r) - wp.n_p
    if all_lags:
        deltas = range(delta_max + 1)
    else:
        deltas = [int(d) for d in ps.expected if d <= delta_max]
    values = cross_corr_sq(r, wp, deltas)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta,corr_sq\n")
        for d in deltas:
            fh.write(f"{d},{values[d]:.10g}\n")


def psi_diagnostic(wp: WhitenedPilot, r0: int) -> np.ndarray:
    """Local contrast of the pilot's own |autocorrelation|^2 (diagnostic only)."""
    n = len(wp.autocorr_sq)
    out = np.empty(n)
    for d in range(n):
        lam = local_lambda(wp.autocorr_sq, d, r0, 0, n - 1)
        out[d] = math.inf if lam == 0.0 else wp.autocorr_sq[d] / lam
    return out


def identify(r_tilde, wp: WhitenedPilot, ps: PlacementSet,
             cfg: DetectorConfig | None = None) -> int:
    """Identify the pilot location within one frame of whitened samples.

    Correlations are evaluated on the expected-location set only; candidates
    above c1 times the peak are reduced modulo the placement stride to
    (delta_c0, delta_c0 + L_c) pairs and ranked by the running-threshold
    measure, ascending in delta_c0.  Returns the winning delta_c0.
    """
    if cfg is None:
        cfg = DetectorConfig()
    r = np.asarray(r_tilde, dtype=complex)
    n_p = wp.n_p
    delta_max = len(r) - n_p
    r0 = cfg.radius(ps.l_c)
    ptc = wp.p_tilde.conj()

    cache: dict = {}

    def val(d: int) -> float:
        if d not in cache:
            cache[d] = float(np.abs(np.dot(r[d:d + n_p], ptc)) ** 2)
        return cache[d]

    spikes = [d for d in ps.expected if d <= delta_max]
    peak = max(val(d) for d in spikes)
    cand = sorted({d - (d % ps.stride) for d in spikes if val(d) >= cfg.c1 * peak})

    def lam(d: int) -> float:
        lo = max(d - r0, 0)
        hi = min(d + r0, delta_max)
        total = sum(val(j) for j in range(lo, hi + 1))
        return (total - val(d)) / (hi - lo)

    n_hat, r_th2 = 0, 0.0
    for d0 in cand:
        dl = d0 + ps.l_c
        if dl > delta_max:
            continue
        den = lam(d0) + lam(dl)
        mu = math.inf if den == 0.0 else (val(d0) + val(dl)) / den
        if mu > r_th2:
            r_th2 = cfg.c2 * mu
            n_hat = d0
    return n_hat
