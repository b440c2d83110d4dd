"""LSSE channel estimation from the useful pilot segment, MSE-optimal pilot
design (exhaustive and relaxed), and per-symbol linear interpolation."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz
from scipy.optimize import minimize

from .modem import Constellation
from .waveform import TapSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PilotDesign:
    """A pilot sequence with its precomputed estimation operator.

    t_matrix rows are sliding length-(l_h + l_c) windows of the pilot (newest
    symbol first); v_matrix is the banded convolution matrix of the whitening
    taps; pinv is the left pseudo-inverse of t_matrix @ v_matrix.
    """

    pilot: np.ndarray
    t_matrix: np.ndarray
    v_matrix: np.ndarray
    pinv: np.ndarray
    predicted_mse: float
    l_h: int
    l_c: int

    @property
    def n_p(self) -> int:
        return len(self.pilot)

    @property
    def segment_length(self) -> int:
        """Number of useful pilot samples consumed by lsse_estimate."""
        return self.n_p - self.l_h - self.l_c + 1


@dataclass(frozen=True)
class ChannelEstimate:
    c_hat: np.ndarray
    frame_index: int = 0
    per_symbol: np.ndarray | None = None


def pilot_toeplitz(pilot: np.ndarray, l_h: int, l_c: int) -> np.ndarray:
    """T[r, j] = pilot[l_h + l_c - 1 + r - j], shape
    (n_p - l_h - l_c + 1) x (l_h + l_c)."""
    first_col = pilot[l_h + l_c - 1:]
    first_row = pilot[l_h + l_c - 1::-1][:l_h + l_c]
    return toeplitz(first_col, first_row)


def whitening_conv_matrix(v: np.ndarray, l_h: int, l_c: int) -> np.ndarray:
    """V[j, l] = v[j - l] for 0 <= j - l < l_h, shape (l_h + l_c) x (l_c + 1)."""
    out = np.zeros((l_h + l_c, l_c + 1), dtype=complex)
    for l in range(l_c + 1):
        out[l:l + l_h, l] = v
    return out


def build_design(pilot, v: TapSet, l_h: int, l_c: int) -> PilotDesign:
    """Precompute T, V, and the left pseudo-inverse of T @ V for a pilot."""
    pilot = np.asarray(pilot, dtype=complex)
    n_p = len(pilot)
    if n_p <= l_h + l_c - 1:
        raise ValueError(f"pilot too short: need n_p > l_h + l_c - 1 = {l_h + l_c - 1}")
    vt = np.asarray(v.taps, dtype=complex)
    if len(vt) != l_h:
        raise ValueError(f"whitening filter has {len(vt)} taps, expected l_h={l_h}")
    t_matrix = pilot_toeplitz(pilot, l_h, l_c)
    v_matrix = whitening_conv_matrix(vt, l_h, l_c)
    a = t_matrix @ v_matrix
    if np.linalg.matrix_rank(a) < l_c + 1:
        raise ValueError("rank-deficient T @ V; pilot cannot resolve all taps")
    pinv = np.linalg.pinv(a)
    predicted = float(np.trace(pinv @ pinv.conj().T).real)
    return PilotDesign(pilot=pilot, t_matrix=t_matrix, v_matrix=v_matrix,
                       pinv=pinv, predicted_mse=predicted, l_h=l_h, l_c=l_c)


def lsse_estimate(r_p, design: PilotDesign, frame_index: int = 0) -> ChannelEstimate:
    """Least-squares tap estimate from the useful pilot samples
    (lags n_sp + l_h + l_c - 1 .. n_sp + n_p - 1 of the whitened stream)."""
    r_p = np.asarray(r_p, dtype=complex)
    if len(r_p) != design.segment_length:
        raise ValueError(
            f"expected {design.segment_length} useful pilot samples, got {len(r_p)}")
    return ChannelEstimate(c_hat=design.pinv @ r_p, frame_index=frame_index)


def mse_predict(design: PilotDesign, sigma_sq: float) -> float:
    """Estimation MSE sigma^2 * trace(pinv @ pinv^H)."""
    return sigma_sq * design.predicted_mse


def _check_dims(n_p: int, l_h: int, l_c: int) -> None:
    if n_p < l_h + 2 * l_c:
        raise ValueError(
            f"n_p={n_p} gives fewer useful pilot rows than the {l_c + 1} taps "
            f"to estimate; need n_p >= l_h + 2*l_c = {l_h + 2 * l_c}")


def _trace_inv_gram(pilot: np.ndarray, v_matrix: np.ndarray, l_h: int, l_c: int) -> float:
    a = pilot_toeplitz(pilot, l_h, l_c) @ v_matrix
    gram = a.conj().T @ a
    try:
        trace = float(np.trace(np.linalg.inv(gram)).real)
    except np.linalg.LinAlgError:
        return np.inf
    # a numerically singular gram can "invert" to garbage; the true trace of
    # an HPD inverse is positive
    return trace if trace > 0.0 else np.inf


def pilot_search_exhaustive(constellation: Constellation, n_p: int, v: TapSet,
                            l_h: int, l_c: int, limit: int = 2 ** 20) -> PilotDesign:
    """Enumerate all constellation^n_p pilots and return the minimum-MSE design."""
    _check_dims(n_p, l_h, l_c)
    order = constellation.order
    if order ** n_p > limit:
        raise ValueError(
            f"search space {order}**{n_p} exceeds limit {limit}; "
            "use pilot_search_relaxed instead")
    v_matrix = whitening_conv_matrix(np.asarray(v.taps, dtype=complex), l_h, l_c)
    best_seq, best_mse = None, np.inf
    for idx in itertools.product(range(order), repeat=n_p):
        pilot = constellation.points[list(idx)]
        mse = _trace_inv_gram(pilot, v_matrix, l_h, l_c)
        if mse < best_mse:
            best_seq, best_mse = pilot, mse
    return build_design(best_seq, v, l_h, l_c)


def _round_to_constellation(phases: np.ndarray, constellation: Constellation) -> np.ndarray:
    pts = constellation.points
    sym = np.exp(1j * phases)
    return pts[np.argmin(np.abs(sym[:, None] - pts[None, :]), axis=1)]


def pilot_search_relaxed(constellation: Constellation, n_p: int, v: TapSet,
                         l_h: int, l_c: int, restarts: int = 100,
                         seed=0) -> PilotDesign:
    """Multi-start continuous phase relaxation of the MSE criterion.

    Each restart minimizes the predicted MSE over per-symbol phases from a
    uniform random start, then rounds to the nearest constellation points;
    the rounded start itself also enters the candidate pool, so the result
    never loses to its own initializations.  Deterministic for a fixed seed.
    """
    _check_dims(n_p, l_h, l_c)
    v_matrix = whitening_conv_matrix(np.asarray(v.taps, dtype=complex), l_h, l_c)

    def objective(phases):
        return _trace_inv_gram(np.exp(1j * phases), v_matrix, l_h, l_c)

    streams = np.random.SeedSequence(seed).spawn(restarts)
    best_seq, best_mse = None, np.inf
    for restart in range(restarts):
        # independent per-restart stream: restarts can run in any order or in
        # parallel without changing the result
        theta0 = np.random.default_rng(streams[restart]).uniform(
            0.0, 2.0 * np.pi, n_p)
        candidates = [_round_to_constellation(theta0, constellation)]
        result = minimize(objective, theta0, method="L-BFGS-B",
                          options={"maxiter": 300})
        if result.success or np.isfinite(result.fun):
            candidates.append(_round_to_constellation(result.x, constellation))
        else:
            logger.warning("relaxed pilot search restart %d did not converge: %s",
                           restart, result.message)
        for pilot in candidates:
            mse = _trace_inv_gram(pilot, v_matrix, l_h, l_c)
            if mse < best_mse:
                best_seq, best_mse = pilot, mse
    return build_design(best_seq, v, l_h, l_c)


def interpolate(c_hat_i, c_hat_next, n_s: int) -> np.ndarray:
    """Per-symbol tap trajectory between two frame estimates.

    Row k (k = 0..n_s) is c_i + (k / n_s) * (c_next - c_i); the endpoints
    reproduce the two estimates exactly.
    """
    c_i = np.asarray(c_hat_i, dtype=complex)
    c_n = np.asarray(c_hat_next, dtype=complex)
    if c_i.shape != c_n.shape:
        raise ValueError("tap vectors must have equal length")
    steps = np.arange(n_s + 1)[:, None] / n_s
    return c_i[None, :] + steps * (c_n - c_i)[None, :]


# --- pilot files and design cache -----------------------------------------

def save_pilot(path, pilot: np.ndarray, constellation: Constellation) -> None:
    """Write a pilot as plain-text constellation indices, one per line."""
    idx = np.argmin(np.abs(pilot[:, None] - constellation.points[None, :]), axis=1)
    Path(path).write_text("".join(f"{i}\n" for i in idx), encoding="utf-8")


def load_pilot(path, constellation: Constellation) -> np.ndarray:
    """Read a pilot written by save_pilot (blank lines and # comments allowed)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    idx = [int(s) for s in (ln.strip() for ln in lines)
           if s and not s.startswith("#")]
    if any(i < 0 or i >= constellation.order for i in idx):
        raise ValueError(f"pilot index out of range for {constellation.name}")
    return constellation.points[idx]


def design_cache_key(constellation: Constellation, n_p: int, tau: float,
                     beta: float, l_h: int, l_c: int) -> str:
    return (f"{constellation.name.lower()}_np{n_p}_tau{tau:g}_beta{beta:g}"
            f"_lh{l_h}_lc{l_c}")


def bundled_pilot_dir() -> Path:
    """Directory of pilot sequences shipped with the package (produced by
    pilot_search_relaxed with seed 0, 100 restarts)."""
    return Path(__file__).parent / "data" / "pilots"


def cached_design(cache_dir, constellation: Constellation, n_p: int,
                  tau: float, beta: float, v: TapSet, l_h: int, l_c: int,
                  restarts: int = 100, seed=0) -> PilotDesign:
    """Load a cached pilot for this geometry, or run the relaxed search and
    cache the result."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / (design_cache_key(constellation, n_p, tau, beta, l_h, l_c) + ".txt")
    if path.exists():
        pilot = load_pilot(path, constellation)
        return build_design(pilot, v, l_h, l_c)
    design = pilot_search_relaxed(constellation, n_p, v, l_h, l_c,
                                  restarts=restarts, seed=seed)
    save_pilot(path, design.pilot, constellation)
    return design
