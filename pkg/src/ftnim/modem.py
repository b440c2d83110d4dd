"""Bit/symbol mapping for pilot and data constellations (BPSK, QPSK, 8-PSK)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray
    bits_per_symbol: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if len(pts) != 2 ** self.bits_per_symbol:
            raise ValueError("point count must be 2**bits_per_symbol")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise ValueError("constellation must have unit average energy")
        object.__setattr__(self, "points", pts)

    @property
    def order(self) -> int:
        return len(self.points)


def _gray(n: int) -> int:
    return n ^ (n >> 1)


def _make_bpsk() -> Constellation:
    # bit 0 -> +1, bit 1 -> -1
    return Constellation("BPSK", np.array([1.0 + 0j, -1.0 + 0j]), 1)


def _make_qpsk() -> Constellation:
    # Gray map on I/Q: bits (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2)
    pts = np.array([(1 - 2 * (v >> 1)) + 1j * (1 - 2 * (v & 1)) for v in range(4)])
    return Constellation("QPSK", pts / np.sqrt(2.0), 2)


def _make_psk8() -> Constellation:
    # Gray-coded phases at multiples of pi/4
    pts = np.array([np.exp(1j * np.pi / 4.0 * _gray(v)) for v in range(8)])
    return Constellation("PSK8", pts, 3)


BPSK = _make_bpsk()
QPSK = _make_qpsk()
PSK8 = _make_psk8()

_BY_NAME = {"BPSK": BPSK, "QPSK": QPSK, "PSK8": PSK8, "8PSK": PSK8}


def get_constellation(name: str) -> Constellation:
    try:
        return _BY_NAME[name.upper()]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; expected one of "
                         f"{sorted(set(_BY_NAME))}") from None


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map a bit sequence (MSB-first per symbol) to constellation symbols."""
    bits = np.asarray(bits, dtype=int)
    if bits.ndim != 1 or len(bits) % c.bits_per_symbol:
        raise ValueError(
            f"bit count {len(bits)} not divisible by {c.bits_per_symbol}")
    groups = bits.reshape(-1, c.bits_per_symbol)
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return c.points[groups @ weights]


def demodulate_hard(symbols, c: Constellation) -> np.ndarray:
    """Nearest-point hard decision, inverse of modulate on noiseless input."""
    symbols = np.asarray(symbols, dtype=complex)
    idx = np.argmin(np.abs(symbols[:, None] - c.points[None, :]), axis=1)
    shifts = np.arange(c.bits_per_symbol - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).reshape(-1)


def draw_symbols(rng: np.random.Generator, c: Constellation, n: int) -> np.ndarray:
    """n i.i.d. uniform symbols from the constellation."""
    return c.points[rng.integers(0, c.order, n)]
