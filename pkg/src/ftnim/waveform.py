"""Discrete-time FTN ISI model: sampled raised-cosine taps and noise whitening.

All processing runs at the symbol spacing tau*T with T normalized to 1, so the
model is fully described by the tap vector h_k = RC(k*tau) and a causal
whitening filter v obtained by minimum-phase spectral factorization of h.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Frequency grid for the cepstral factorization.
FACTOR_NFFT = 4096

# Relative floor applied to the sampled spectrum before taking logs.  The
# truncated tap sequence can ripple slightly negative when the folded
# spectrum has a true null band (tau < 1/(1+beta)); small dips are clamped,
# dips beyond NEG_SPECTRUM_TOL signal a genuinely non-factorizable input.
SPECTRUM_FLOOR_REL = 1e-3
NEG_SPECTRUM_TOL = 5e-2


class SpectralFactorizationError(ValueError):
    """Raised when the tap spectrum is too negative to factor."""


@dataclass(frozen=True)
class PulseConfig:
    """Raised-cosine pulse sampled at the FTN symbol spacing.

    beta: roll-off factor in [0, 1]
    tau:  FTN packing ratio in (0, 1]; tau = 1 is Nyquist signaling
    l_h:  half-length of the truncated ISI response (2*l_h + 1 taps)
    """

    beta: float
    tau: float
    l_h: int

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.l_h < 1:
            raise ValueError(f"l_h must be >= 1, got {self.l_h}")


@dataclass(frozen=True)
class TapSet:
    """A finite complex tap vector with a designated zero-lag position."""

    taps: np.ndarray
    center: int = 0

    def __post_init__(self):
        taps = np.asarray(self.taps)
        if taps.ndim != 1 or taps.size < 1:
            raise ValueError("taps must be a non-empty 1-D vector")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        object.__setattr__(self, "taps", taps)

    def __len__(self):
        return len(self.taps)


def raised_cosine(t, beta: float) -> np.ndarray:
    """Unit-peak raised-cosine autocorrelation pulse h(t) for T = 1.

    h(t) = sinc(t) * cos(pi*beta*t) / (1 - (2*beta*t)^2), with the removable
    singularity at |t| = 1/(2*beta) evaluated by its limit.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    denom = 1.0 - (2.0 * beta * t) ** 2
    sing = np.isclose(denom, 0.0, atol=1e-10)
    reg = ~sing
    out[reg] = np.sinc(t[reg]) * np.cos(np.pi * beta * t[reg]) / denom[reg]
    if beta > 0.0 and np.any(sing):
        out[sing] = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta))
    return out


def rc_isi_taps(cfg: PulseConfig) -> TapSet:
    """Sampled, truncated RC ISI response h_k = RC(k*tau), k = -l_h..l_h.

    The center tap is exactly 1; at tau = 1 the set collapses to a unit
    impulse (Nyquist orthogonality).
    """
    k = np.arange(-cfg.l_h, cfg.l_h + 1)
    return TapSet(raised_cosine(k * cfg.tau, cfg.beta), center=cfg.l_h)


def default_l_h(beta: float, tau: float, energy_fraction: float = 0.9999,
                k_max: int = 400) -> int:
    """Smallest l_h whose 2*l_h+1 tap window keeps `energy_fraction` of sum h_k^2."""
    k = np.arange(-k_max, k_max + 1)
    e = raised_cosine(k * tau, beta) ** 2
    total = e.sum()
    for l_h in range(1, k_max):
        if e[k_max - l_h:k_max + l_h + 1].sum() >= energy_fraction * total:
            return l_h
    return k_max


def _sampled_spectrum(h: np.ndarray, center: int, nfft: int = FACTOR_NFFT) -> np.ndarray:
    buf = np.zeros(nfft)
    right = h[center:]
    left = h[:center]
    buf[:len(right)] = right
    if len(left):
        buf[-len(left):] = left
    return np.fft.fft(buf).real


def _clamped_log_spectrum(h: np.ndarray, center: int) -> np.ndarray:
    spec = _sampled_spectrum(h, center)
    peak = spec.max()
    if peak <= 0.0 or spec.min() < -NEG_SPECTRUM_TOL * peak:
        raise SpectralFactorizationError(
            f"tap spectrum is not factorizable (min {spec.min():.3e}, max {peak:.3e})")
    return np.maximum(spec, SPECTRUM_FLOOR_REL * peak)


def _minimum_phase_response(h: np.ndarray, center: int) -> np.ndarray:
    """Frequency response V(w) of the minimum-phase spectral factor of h."""
    nfft = FACTOR_NFFT
    cep = np.fft.ifft(np.log(_clamped_log_spectrum(h, center))).real
    folded = np.zeros(nfft)
    folded[0] = cep[0]
    folded[1:nfft // 2] = 2.0 * cep[1:nfft // 2]
    folded[nfft // 2] = cep[nfft // 2]
    return np.exp(np.fft.fft(folded) / 2.0)


def whitening_filter(cfg: PulseConfig) -> TapSet:
    """Causal minimum-phase factor v of the RC tap sequence, truncated to l_h taps.

    v satisfies h_k ~= sum_j v_j v_{j+k}, so the composite discrete channel
    after noise whitening is s * c * v driven by white noise.
    """
    h = rc_isi_taps(cfg)
    vw = _minimum_phase_response(h.taps, h.center)
    v = np.fft.ifft(vw).real[:cfg.l_h]
    return TapSet(v, center=0)


def receiver_whitening_filter(cfg: PulseConfig, n_taps: int = 96) -> TapSet:
    """Finite-length approximation of the anticausal inverse factor 1/V*(w).

    Applying this filter to the matched-filter output decorrelates the noise;
    tap j multiplies the sample j steps ahead (lookahead FIR).  `center` is
    set to n_taps - 1 so apply_fir aligns the zero-lag tap correctly.
    """
    h = rc_isi_taps(cfg)
    vw = _minimum_phase_response(h.taps, h.center)
    w = np.fft.ifft(1.0 / np.conj(vw)).real
    # anticausal support: lag +j lives at index -j mod NFFT
    taps = w[(-np.arange(n_taps)) % FACTOR_NFFT][::-1]
    return TapSet(taps, center=n_taps - 1)


def apply_fir(x, f: TapSet) -> np.ndarray:
    """Same-length linear convolution with zero-padded edges.

    y_k = sum_j f.taps[j] * x[k - (j - f.center)]; a causal TapSet
    (center = 0) therefore gives y = (x * f)[:len(x)].
    """
    x = np.asarray(x)
    full = np.convolve(x, np.asarray(f.taps))
    return full[f.center:f.center + len(x)]


def colored_noise(h: TapSet, n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary complex Gaussian noise with autocovariance sigma^2 * h_k.

    Uses FFT circulant embedding of the banded covariance; spectral samples
    are clamped at zero, i.e. the nearest PSD process when truncation ripple
    makes the tap spectrum dip slightly negative.
    """
    taps = np.asarray(h.taps)
    l_h = h.center
    m = 1 << int(np.ceil(np.log2(max(n + len(taps), 2 * len(taps)))))
    lam = np.maximum(_sampled_spectrum(taps, l_h, m), 0.0)
    w = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
    z = np.fft.ifft(np.sqrt(lam) * np.fft.fft(w))
    return sigma * z[:n]
