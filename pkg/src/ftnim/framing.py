"""Pilot placement by index modulation: location sets, bit mapping, frame
assembly, and spectral-efficiency figures."""

from __future__ import annotations

from dataclasses import dataclass
from math import log2

import numpy as np


class NoIndexCapacityError(ValueError):
    """The frame geometry leaves no bits to carry in the pilot location."""


@dataclass(frozen=True)
class FrameConfig:
    n_p: int   # pilot length in symbols
    n_s: int   # data symbols per frame
    l_c: int   # channel memory
    l_h: int   # ISI half-length

    def __post_init__(self):
        if self.n_p <= self.l_h + self.l_c - 1:
            raise ValueError(
                f"n_p={self.n_p} must exceed l_h + l_c - 1 = {self.l_h + self.l_c - 1} "
                "to leave a useful pilot segment")

    @property
    def n(self) -> int:
        return self.n_p + self.n_s


@dataclass(frozen=True)
class PlacementSet:
    """Transmitter locations P, receiver spike locations P_hat, and geometry."""

    allowed: np.ndarray    # ordered set P of transmitter locations
    expected: np.ndarray   # ordered set P_hat of receiver spike locations
    n_b: int               # bits carried by the location
    stride: int            # spacing 2**ceil(log2(l_c + 1))
    l_c: int


@dataclass(frozen=True)
class SymbolFrame:
    symbols: np.ndarray
    pilot_location: int
    im_bits: np.ndarray


def placement_set(n_s: int, l_c: int) -> PlacementSet:
    """Allowed pilot locations: multiples of 2**ceil(log2(l_c+1)) below
    2**floor(log2(n_s+1)), carrying n_b = floor(log2(n_s+1)) - ceil(log2(l_c+1))
    bits; expected receiver spikes sit at {p, p + l_c} for each allowed p."""
    if n_s < 1 or l_c < 0:
        raise ValueError("n_s must be >= 1 and l_c >= 0")
    # exact integer log2: ceil(log2(l_c + 1)) and floor(log2(n_s + 1))
    ceil_log_lc = (l_c).bit_length()
    stride = 1 << ceil_log_lc
    n_b = ((n_s + 1).bit_length() - 1) - ceil_log_lc
    if n_b <= 0:
        raise NoIndexCapacityError(
            f"no index-modulation capacity for n_s={n_s}, l_c={l_c}")
    allowed = np.arange(2 ** n_b) * stride
    expected = np.unique(np.concatenate([allowed, allowed + l_c]))
    return PlacementSet(allowed=allowed, expected=expected, n_b=n_b,
                        stride=stride, l_c=l_c)


def encode_location(bits, ps: PlacementSet) -> int:
    """Map n_b bits (MSB-first) to a pilot location: value * stride."""
    bits = np.asarray(bits, dtype=int)
    if len(bits) != ps.n_b:
        raise ValueError(f"expected {ps.n_b} bits, got {len(bits)}")
    value = int(bits @ (1 << np.arange(ps.n_b - 1, -1, -1)))
    return value * ps.stride


def decode_location(n_sp: int, ps: PlacementSet) -> np.ndarray:
    """Exact inverse of encode_location; n_sp must be an allowed location."""
    if n_sp % ps.stride or not 0 <= n_sp < 2 ** ps.n_b * ps.stride:
        raise ValueError(f"location {n_sp} not in the allowed placement set")
    value = n_sp // ps.stride
    shifts = np.arange(ps.n_b - 1, -1, -1)
    return (value >> shifts) & 1


def build_frame(bits, pilot, data_symbols, ps: PlacementSet,
                fc: FrameConfig) -> SymbolFrame:
    """Assemble one frame: pilot at the encoded location, data filling the
    remaining positions in ascending index order."""
    pilot = np.asarray(pilot, dtype=complex)
    data = np.asarray(data_symbols, dtype=complex)
    if len(pilot) != fc.n_p:
        raise ValueError(f"pilot length {len(pilot)} != n_p={fc.n_p}")
    if len(data) != fc.n_s:
        raise ValueError(f"data length {len(data)} != n_s={fc.n_s}")
    n_sp = encode_location(bits, ps)
    if n_sp + fc.n_p > fc.n:
        raise ValueError(f"pilot at {n_sp} overruns the frame")
    symbols = np.empty(fc.n, dtype=complex)
    mask = np.ones(fc.n, dtype=bool)
    mask[n_sp:n_sp + fc.n_p] = False
    symbols[~mask] = pilot
    symbols[mask] = data
    return SymbolFrame(symbols=symbols, pilot_location=n_sp,
                       im_bits=np.asarray(bits, dtype=int))


def pilot_positions(frame: SymbolFrame, n_p: int) -> np.ndarray:
    return np.arange(frame.pilot_location, frame.pilot_location + n_p)


def se_figures(n_p: int, n_s: int, m_order: int, tau: float, beta: float,
               r_c: float, n_b: int):
    """Spectral efficiencies (bits/sec/Hz) and improvement percentages.

    Returns (se_nyquist, se_ftn, se_im_ftn, gain_over_nyquist_pct,
    gain_over_ftn_pct).
    """
    if min(n_p, n_s, m_order) <= 0 or tau <= 0 or r_c <= 0 or n_b < 0:
        raise ValueError("arguments must be positive (n_b >= 0)")
    bits = log2(m_order)
    overhead = n_s / (n_s + n_p)
    se_nyq = overhead * bits * r_c / (1.0 + beta)
    se_ftn = se_nyq / tau
    se_im = (n_s * r_c * bits + n_b) / (n_s + n_p) / (tau * (1.0 + beta))
    g_nyq = (se_im - se_nyq) / se_nyq * 100.0
    g_ftn = (se_im - se_ftn) / se_ftn * 100.0
    return se_nyq, se_ftn, se_im, g_nyq, g_ftn
