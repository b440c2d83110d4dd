"""ITU-R HF channel generators: static and doubly-selective two-tap Watterson
processes plus a static multi-tap comparison channel.

All generators are seed-parameterized pure constructors; a ChannelProcess is
immutable after construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline


class ChannelModelId(Enum):
    MODEL1 = "model1"   # ITU-R Poor: two taps, Rayleigh, 1 Hz Gaussian Doppler
    MODEL2 = "model2"   # static two-tap, same delay spread as model 1
    MODEL3 = "model3"   # static 7-tap, constant over two successive frames


# ITU-R Poor defaults: 2.1 ms delay spread, 2400 symbols/s, 1 Hz two-sided
# Doppler spread (sigma_d = 0.5 Hz).
DELAY_SPREAD_MS = 2.1
SYMBOL_RATE_NYQUIST = 2400.0
DOPPLER_SPREAD_HZ = 1.0
MODEL3_N_TAPS = 7


@dataclass(frozen=True)
class ChannelProcess:
    """Time-varying tap matrix c_{k,l} over a superframe.

    taps has one row per block of `block_len` symbols (a single row means the
    channel is constant for all n_symbols); row k, column l is the complex
    gain of the path delayed by l symbol intervals.
    """

    taps: np.ndarray
    block_len: int
    l_c: int
    delay_profile: tuple
    doppler_hz: float
    symbol_rate: float
    n_symbols: int

    def tap_matrix(self) -> np.ndarray:
        """Expand to an explicit (n_symbols, l_c + 1) matrix."""
        idx = np.minimum(np.arange(self.n_symbols) // self.block_len,
                         len(self.taps) - 1)
        return self.taps[idx]

    def row_at(self, k: int) -> np.ndarray:
        return self.taps[min(k // self.block_len, len(self.taps) - 1)]


def make_lc(delay_spread_ms: float, symbol_rate: float, tau: float) -> int:
    """Channel memory L_c = round(delay spread / FTN symbol interval).

    The tapped-delay-line model then has L_c + 1 taps.  Emits a warning when
    the delay spread is not close to an integer number of symbol intervals
    (the model forces integer-delay taps).
    """
    if delay_spread_ms < 0 or symbol_rate <= 0 or tau <= 0:
        raise ValueError("arguments must be positive")
    intervals = delay_spread_ms * 1e-3 * symbol_rate / tau
    l_c = int(round(intervals))
    if abs(intervals - l_c) > 0.1:
        warnings.warn(
            f"delay spread of {intervals:.3f} symbol intervals is not integer-"
            f"friendly for tau={tau}; rounding to L_c={l_c}", stacklevel=2)
    return l_c


def _rayleigh_pair(rng: np.random.Generator) -> tuple:
    c = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.5
    return c[0], c[1]


def make_model2(seed, n_symbols: int = 1, l_c: int | None = None,
                tau: float = 0.84) -> ChannelProcess:
    """Static two-tap Watterson channel: i.i.d. CN(0, 1/2) taps at delays
    0 and L_c, constant over the whole superframe."""
    if l_c is None:
        l_c = make_lc(DELAY_SPREAD_MS, SYMBOL_RATE_NYQUIST, tau)
    rng = np.random.default_rng(seed)
    c0, cl = _rayleigh_pair(rng)
    row = np.zeros(l_c + 1, dtype=complex)
    row[0], row[l_c] = c0, cl
    return ChannelProcess(taps=row[None, :], block_len=max(n_symbols, 1),
                          l_c=l_c, delay_profile=(0, l_c), doppler_hz=0.0,
                          symbol_rate=SYMBOL_RATE_NYQUIST / tau,
                          n_symbols=n_symbols)


def gaussian_doppler_path(rng: np.random.Generator, n_symbols: int,
                          symbol_rate: float, sigma_d: float) -> np.ndarray:
    """One unit-variance Rayleigh path with Gaussian Doppler spectrum.

    The target autocorrelation is exp(-2*(pi*sigma_d*t)^2).  White complex
    Gaussian noise is filtered at a low rate (>= 32 samples per 1/e coherence
    time) by a Gaussian FIR, then cubic-interpolated to the symbol rate.
    """
    if sigma_d <= 0.0:
        z = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
        return np.full(n_symbols, z)
    t_coh = 1.0 / (np.sqrt(2.0) * np.pi * sigma_d)   # 1/e point of the ACF
    f_lo = np.ceil(32.0 / t_coh)
    # FIR with |G(f)|^2 = exp(-f^2 / (2 sigma_d^2)) => g(t) ~ exp(-4 pi^2 sigma_d^2 t^2)
    alpha = 4.0 * np.pi ** 2 * sigma_d ** 2
    span = int(np.ceil(f_lo * 4.0 / (np.pi * sigma_d)))   # reach exp(-16)
    tg = np.arange(-span, span + 1) / f_lo
    g = np.exp(-alpha * tg ** 2)
    g /= np.linalg.norm(g)
    duration = n_symbols / symbol_rate
    n_lo = int(np.ceil(duration * f_lo)) + 2 * span + 4
    w = (rng.standard_normal(n_lo) + 1j * rng.standard_normal(n_lo)) / np.sqrt(2.0)
    path_lo = np.convolve(w, g, mode="valid")
    t_lo = np.arange(len(path_lo)) / f_lo
    t_sym = np.arange(n_symbols) / symbol_rate
    spline = CubicSpline(t_lo, path_lo)
    return spline(t_sym)


def make_model1(seed, n_symbols: int, tau: float = 0.84,
                doppler_spread_hz: float = DOPPLER_SPREAD_HZ,
                l_c: int | None = None) -> ChannelProcess:
    """ITU-R Poor channel: two independent Rayleigh paths at delays 0 and L_c,
    each with a Gaussian Doppler spectrum, equal average power 1/2."""
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    if l_c is None:
        l_c = make_lc(DELAY_SPREAD_MS, SYMBOL_RATE_NYQUIST, tau)
    symbol_rate = SYMBOL_RATE_NYQUIST / tau
    sigma_d = doppler_spread_hz / 2.0     # two-sided spread convention
    rng = np.random.default_rng(seed)
    taps = np.zeros((n_symbols, l_c + 1), dtype=complex)
    taps[:, 0] = gaussian_doppler_path(rng, n_symbols, symbol_rate, sigma_d) / np.sqrt(2.0)
    taps[:, l_c] = gaussian_doppler_path(rng, n_symbols, symbol_rate, sigma_d) / np.sqrt(2.0)
    return ChannelProcess(taps=taps, block_len=1, l_c=l_c,
                          delay_profile=(0, l_c), doppler_hz=doppler_spread_hz,
                          symbol_rate=symbol_rate, n_symbols=n_symbols)


def make_model3(seed, n_frames: int = 2, frame_len: int = 288,
                tau: float = 0.8, n_taps: int = MODEL3_N_TAPS,
                profile: str | float = "two-path") -> ChannelProcess:
    """Static Rayleigh channel over a 7-tap delay line, held constant over
    two successive frames and redrawn independently every two frames.

    The default power-delay profile keeps the two-nonzero-path structure
    (delays 0 and n_taps - 1, power 1/2 each) that the location detector is
    built around; pass "uniform" for equal power on every tap or a ratio in
    (0, 1) for an exponentially decaying profile.
    """
    rng = np.random.default_rng(seed)
    l_c = n_taps - 1
    if profile == "two-path":
        powers = np.zeros(n_taps)
        powers[0] = powers[l_c] = 0.5
    elif profile == "uniform":
        powers = np.full(n_taps, 1.0 / n_taps)
    else:
        ratio = float(profile)
        if not 0.0 < ratio < 1.0:
            raise ValueError("decay ratio must be in (0, 1)")
        powers = ratio ** np.arange(n_taps)
        powers /= powers.sum()
    n_blocks = (n_frames + 1) // 2
    draws = (rng.standard_normal((n_blocks, n_taps))
             + 1j * rng.standard_normal((n_blocks, n_taps))) / np.sqrt(2.0)
    taps = draws * np.sqrt(powers)
    return ChannelProcess(taps=taps, block_len=2 * frame_len, l_c=l_c,
                          delay_profile=tuple(np.flatnonzero(powers > 0)),
                          doppler_hz=0.0,
                          symbol_rate=SYMBOL_RATE_NYQUIST / tau,
                          n_symbols=n_frames * frame_len)


def apply_channel(x, ch: ChannelProcess, noise_sigma: float,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """y_k = sum_l c_{k,l} x_{k-l} + n_k with complex Gaussian noise of
    per-sample variance noise_sigma**2."""
    x = np.asarray(x, dtype=complex)
    n = len(x)
    if n > ch.n_symbols:
        raise ValueError(f"input length {n} exceeds channel span {ch.n_symbols}")
    y = np.zeros(n, dtype=complex)
    if len(ch.taps) == 1:
        row = ch.taps[0]
        for l in ch.delay_profile:
            y[l:] += row[l] * x[:n - l]
    else:
        taps = ch.tap_matrix()[:n]
        for l in ch.delay_profile:
            y[l:] += taps[l:, l] * x[:n - l]
    if noise_sigma > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        y += noise_sigma * (rng.standard_normal(n)
                            + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    return y


def export_csv(ch: ChannelProcess, path, decimate: int = 1) -> None:
    """Dump tap trajectories as CSV rows (k, l, re, im) for debugging."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,l,re,im\n")
        for k in range(0, ch.n_symbols, decimate):
            row = ch.row_at(k)
            for l in ch.delay_profile:
                fh.write(f"{k},{l},{row[l].real:.10g},{row[l].imag:.10g}\n")
