"""End-to-end Monte-Carlo harness: Eb/N0 bookkeeping, superframe simulation,
PSLIE/MSE aggregation, CSV output, and deterministic parallel execution."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channel import (ChannelModelId, ChannelProcess, DELAY_SPREAD_MS,
                      SYMBOL_RATE_NYQUIST, make_lc, make_model1, make_model2,
                      make_model3)
from .estimator import PilotDesign, interpolate
from .framing import PlacementSet, placement_set
from .modem import get_constellation
from .psli import DetectorConfig, WhitenedPilot, whitened_pilot
from .waveform import (PulseConfig, TapSet, apply_fir, colored_noise,
                       rc_isi_taps, receiver_whitening_filter, whitening_filter)

FRAMES_PER_SUPERFRAME = 144


@dataclass(frozen=True)
class ExperimentConfig:
    channel_model: ChannelModelId = ChannelModelId.MODEL2
    tau: float = 0.84
    beta: float = 0.35
    n_p: int = 32
    n_s: int = 256
    l_h: int | None = None    # None: smallest window keeping 99.99% tap energy
    data_constellation: str = "QPSK"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    ebn0_grid_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0)
    frames_per_superframe: int = FRAMES_PER_SUPERFRAME
    superframes: int = 10
    seed: int = 0
    rate_rc: float = 0.75            # SE bookkeeping only
    ebn0_includes_code_rate: bool = False
    noise_path: str = "white"        # "white" or "colored"
    use_identified_location: bool = False   # MSE experiment input
    interpolate_taps: bool = False          # MSE experiment, model 1
    snapshot_per_frame: bool = False        # freeze model-1 taps per frame
    delay_spread_ms: float = DELAY_SPREAD_MS
    doppler_spread_hz: float = 1.0

    def __post_init__(self):
        if not self.ebn0_grid_db:
            raise ValueError("ebn0_grid_db must be non-empty")
        if min(self.superframes, self.frames_per_superframe, self.n_p, self.n_s) < 1:
            raise ValueError("counts must be positive")
        if self.noise_path not in ("white", "colored"):
            raise ValueError(f"unknown noise path {self.noise_path!r}")
        if self.l_h is None:
            from .waveform import default_l_h
            object.__setattr__(self, "l_h", default_l_h(self.beta, self.tau))

    @property
    def l_c(self) -> int:
        if self.channel_model is ChannelModelId.MODEL3:
            from .channel import MODEL3_N_TAPS
            return MODEL3_N_TAPS - 1
        return make_lc(self.delay_spread_ms, SYMBOL_RATE_NYQUIST, self.tau)

    @property
    def frame_len(self) -> int:
        return self.n_p + self.n_s


@dataclass
class EbN0Point:
    ebn0_db: float
    pslie: float
    pslie_ci: tuple
    mse: float
    trials: int
    errors: int
    wall_time: float


@dataclass
class ExperimentResult:
    points: list
    config: ExperimentConfig
    seed: int


def ebn0_to_sigma(ebn0_db: float, m_order: int, r_c: float = 1.0) -> float:
    """Noise sigma for unit-average-energy symbols.

    sigma^2 = 1 / (r_c * log2(M) * 10**(ebn0/10)); the complex noise is split
    evenly between the two real dimensions.
    """
    if m_order < 2:
        raise ValueError("m_order must be >= 2")
    sigma_sq = 1.0 / (r_c * math.log2(m_order) * 10.0 ** (ebn0_db / 10.0))
    return math.sqrt(sigma_sq)


def wilson_interval(errors: int, trials: int, z: float = 1.96) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


# --- per-superframe simulation ---------------------------------------------

@dataclass(frozen=True)
class _Chain:
    """Precomputed filters, placement, and pilot for one configuration."""

    cfg: ExperimentConfig
    pulse: PulseConfig
    h: TapSet
    v: TapSet
    rx_filter: TapSet
    ps: PlacementSet
    wp: WhitenedPilot
    design: PilotDesign
    data_points: np.ndarray
    sigma_scale: float


def build_chain(cfg: ExperimentConfig, design: PilotDesign) -> _Chain:
    pulse = PulseConfig(beta=cfg.beta, tau=cfg.tau, l_h=cfg.l_h)
    h = rc_isi_taps(pulse)
    v = whitening_filter(pulse)
    rx = receiver_whitening_filter(pulse) if cfg.noise_path == "colored" else v
    ps = placement_set(cfg.n_s, cfg.l_c)
    wp = whitened_pilot(design.pilot, v)
    constellation = get_constellation(cfg.data_constellation)
    r_c = cfg.rate_rc if cfg.ebn0_includes_code_rate else 1.0
    return _Chain(cfg=cfg, pulse=pulse, h=h, v=v, rx_filter=rx, ps=ps, wp=wp,
                  design=design, data_points=constellation.points,
                  sigma_scale=r_c * math.log2(len(constellation.points)))


def _superframe_rng(seed: int, ebn0_index: int, sf_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        entropy=seed, spawn_key=(ebn0_index, sf_index)))


def _draw_channel(chain: _Chain, rng: np.random.Generator) -> ChannelProcess:
    cfg = chain.cfg
    n_symbols = cfg.frames_per_superframe * cfg.frame_len
    seed = rng.integers(0, 2 ** 63)
    if cfg.channel_model is ChannelModelId.MODEL1:
        ch = make_model1(seed, n_symbols, tau=cfg.tau,
                         doppler_spread_hz=cfg.doppler_spread_hz, l_c=cfg.l_c)
        if cfg.snapshot_per_frame:
            rows = ch.taps[::cfg.frame_len][:cfg.frames_per_superframe]
            ch = ChannelProcess(taps=rows, block_len=cfg.frame_len,
                                l_c=ch.l_c, delay_profile=ch.delay_profile,
                                doppler_hz=ch.doppler_hz,
                                symbol_rate=ch.symbol_rate, n_symbols=n_symbols)
        return ch
    if cfg.channel_model is ChannelModelId.MODEL2:
        return make_model2(seed, n_symbols=n_symbols, l_c=cfg.l_c, tau=cfg.tau)
    return make_model3(seed, n_frames=cfg.frames_per_superframe,
                       frame_len=cfg.frame_len, tau=cfg.tau)


def _simulate_superframe_stream(chain: _Chain, rng: np.random.Generator,
                                sigma: float):
    """Build one superframe, push it through the channel, return the whitened
    stream plus the true pilot locations and the channel process."""
    cfg = chain.cfg
    b = cfg.frames_per_superframe
    n = cfg.frame_len
    n_p = cfg.n_p
    pilot = chain.design.pilot
    locs = chain.ps.allowed[rng.integers(0, len(chain.ps.allowed), b)]
    data = chain.data_points[rng.integers(0, len(chain.data_points), (b, cfg.n_s))]
    stream = np.empty(b * n, dtype=complex)
    for i in range(b):
        frame = stream[i * n:(i + 1) * n]
        n_sp = locs[i]
        frame[n_sp:n_sp + n_p] = pilot
        mask = np.ones(n, dtype=bool)
        mask[n_sp:n_sp + n_p] = False
        frame[mask] = data[i]
    ch = _draw_channel(chain, rng)
    if cfg.noise_path == "white":
        s_tilde = apply_fir(stream, chain.v)
        r = _kernels.apply_tapped_delay(s_tilde, ch.taps, ch.block_len,
                                        ch.delay_profile)
        if sigma > 0.0:
            r = r + sigma * (rng.standard_normal(len(r))
                             + 1j * rng.standard_normal(len(r))) / np.sqrt(2.0)
    else:
        s_h = apply_fir(stream, chain.h)
        y = _kernels.apply_tapped_delay(s_h, ch.taps, ch.block_len,
                                        ch.delay_profile)
        if sigma > 0.0:
            y = y + colored_noise(chain.h, len(y), sigma, rng)
        r = apply_fir(y, chain.rx_filter)
    return r, locs, ch


def _psli_superframe(chain: _Chain, seed_tuple, sigma: float):
    rng = _superframe_rng(*seed_tuple)
    r, locs, _ = _simulate_superframe_stream(chain, rng, sigma)
    cfg = chain.cfg
    det = cfg.detector
    decided = _kernels.identify_frames(
        r, cfg.frames_per_superframe, cfg.frame_len, chain.wp.p_tilde.conj(),
        chain.ps.expected, chain.ps.stride, cfg.l_c,
        det.c1, det.c2, det.radius(cfg.l_c))
    return int(np.sum(decided != locs)), len(locs)


def _mse_superframe(chain: _Chain, seed_tuple, sigma: float):
    rng = _superframe_rng(*seed_tuple)
    r, locs, ch = _simulate_superframe_stream(chain, rng, sigma)
    cfg = chain.cfg
    design = chain.design
    n = cfg.frame_len
    b = cfg.frames_per_superframe
    if cfg.use_identified_location:
        det = cfg.detector
        used = _kernels.identify_frames(
            r, b, n, chain.wp.p_tilde.conj(), chain.ps.expected,
            chain.ps.stride, cfg.l_c, det.c1, det.c2, det.radius(cfg.l_c))
    else:
        used = locs
    offset = cfg.l_h + cfg.l_c - 1
    seg_len = design.segment_length
    estimates = np.empty((b, cfg.l_c + 1), dtype=complex)
    for i in range(b):
        start = i * n + int(used[i]) + offset
        estimates[i] = design.pinv @ r[start:start + cfg.n_p - offset]
    errors = 0.0
    if cfg.channel_model is ChannelModelId.MODEL1 and not cfg.snapshot_per_frame:
        # track the channel across each frame's data symbols; the estimate of
        # frame i is anchored at the center of its useful pilot segment, and
        # with interpolation enabled the per-symbol taps blend linearly
        # toward the next frame's estimate (held constant on the last frame)
        taps = ch.tap_matrix()
        anchors = np.array([i * n + int(used[i]) + offset + (seg_len - 1) / 2.0
                            for i in range(b)])
        for i in range(b):
            mask = np.ones(n, dtype=bool)
            mask[int(used[i]):int(used[i]) + cfg.n_p] = False
            data_pos = i * n + np.flatnonzero(mask)
            if cfg.interpolate_taps and i + 1 < b:
                alpha = (data_pos - anchors[i]) / (anchors[i + 1] - anchors[i])
                alpha = np.clip(alpha, 0.0, 1.0)[:, None]
                c_hat = (estimates[i][None, :]
                         + alpha * (estimates[i + 1] - estimates[i])[None, :])
            else:
                c_hat = np.broadcast_to(estimates[i], (cfg.n_s, cfg.l_c + 1))
            diff = c_hat - taps[data_pos]
            errors += float(np.mean(np.sum(np.abs(diff) ** 2, axis=1)))
    else:
        for i in range(b):
            truth = ch.row_at(i * n + int(used[i]) + offset)
            errors += float(np.sum(np.abs(estimates[i] - truth) ** 2))
    return errors, b, seg_len


def _run_chunk(args):
    """Worker task: a contiguous range of superframes at one grid point."""
    chain, ebn0_index, sf_start, sf_count, kind = args
    cfg = chain.cfg
    ebn0_db = cfg.ebn0_grid_db[ebn0_index]
    sigma = math.sqrt(1.0 / (chain.sigma_scale * 10.0 ** (ebn0_db / 10.0)))
    errors = 0
    trials = 0
    mse_sum = 0.0
    for sf in range(sf_start, sf_start + sf_count):
        seed_tuple = (cfg.seed, ebn0_index, sf)
        if kind == "psli":
            e, t = _psli_superframe(chain, seed_tuple, sigma)
            errors += e
            trials += t
        else:
            s, t, _ = _mse_superframe(chain, seed_tuple, sigma)
            mse_sum += s
            trials += t
    return ebn0_index, sf_start, errors, trials, mse_sum


def _chunk_sizes(total: int, n_chunks: int):
    base, extra = divmod(total, n_chunks)
    start = 0
    for i in range(n_chunks):
        count = base + (1 if i < extra else 0)
        if count:
            yield start, count
        start += count


def _execute(cfg: ExperimentConfig, design: PilotDesign, kind: str,
             workers: int = 1) -> ExperimentResult:
    chain = build_chain(cfg, design)
    n_chunks = max(1, min(cfg.superframes, workers * 4))
    tasks = [(chain, i, start, count, kind)
             for i in range(len(cfg.ebn0_grid_db))
             for start, count in _chunk_sizes(cfg.superframes, n_chunks)]
    t0 = time.perf_counter()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_run_chunk, tasks))
    else:
        raw = [_run_chunk(t) for t in tasks]
    # merge chunks in (grid point, superframe) order so float sums are
    # independent of the worker count
    raw.sort(key=lambda r: (r[0], r[1]))
    points = []
    for i, ebn0_db in enumerate(cfg.ebn0_grid_db):
        errors = trials = 0
        mse_sum = 0.0
        for (pi, _, e, t, s) in raw:
            if pi == i:
                errors += e
                trials += t
                mse_sum += s
        points.append(EbN0Point(
            ebn0_db=float(ebn0_db),
            pslie=errors / trials if kind == "psli" else math.nan,
            pslie_ci=(wilson_interval(errors, trials) if kind == "psli"
                      else (math.nan, math.nan)),
            mse=mse_sum / trials if kind == "mse" else math.nan,
            trials=trials, errors=errors,
            wall_time=time.perf_counter() - t0))
    return ExperimentResult(points=points, config=cfg, seed=cfg.seed)


def default_design(cfg: ExperimentConfig, pilot_constellation: str = "BPSK",
                   restarts: int = 100) -> PilotDesign:
    """Pilot design for a configuration: the bundled pilot for this geometry
    when one ships with the package, otherwise a fresh relaxed search."""
    from .estimator import (build_design, bundled_pilot_dir, design_cache_key,
                            load_pilot, pilot_search_relaxed)
    constellation = get_constellation(pilot_constellation)
    v = whitening_filter(PulseConfig(beta=cfg.beta, tau=cfg.tau, l_h=cfg.l_h))
    path = bundled_pilot_dir() / (design_cache_key(
        constellation, cfg.n_p, cfg.tau, cfg.beta, cfg.l_h, cfg.l_c) + ".txt")
    if path.exists():
        return build_design(load_pilot(path, constellation), v, cfg.l_h, cfg.l_c)
    return pilot_search_relaxed(constellation, cfg.n_p, v, cfg.l_h, cfg.l_c,
                                restarts=restarts, seed=cfg.seed)


def run_psli_experiment(cfg: ExperimentConfig, design: PilotDesign,
                        workers: int = 1) -> ExperimentResult:
    """Monte-Carlo pilot-location identification error rate over the grid."""
    return _execute(cfg, design, "psli", workers)


def run_mse_experiment(cfg: ExperimentConfig, design: PilotDesign,
                       workers: int = 1) -> ExperimentResult:
    """Monte-Carlo channel-estimation MSE over the grid."""
    return _execute(cfg, design, "mse", workers)


def emit_csv(result: ExperimentResult, path) -> None:
    """Write per-grid-point aggregates; byte-stable for identical inputs."""
    def fmt(x: float) -> str:
        return "nan" if math.isnan(x) else f"{x:.12g}"

    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("ebn0_db,pslie,pslie_ci_lo,pslie_ci_hi,mse,trials,seed\n")
            for p in result.points:
                fh.write(",".join([
                    fmt(p.ebn0_db), fmt(p.pslie), fmt(p.pslie_ci[0]),
                    fmt(p.pslie_ci[1]), fmt(p.mse), str(p.trials),
                    str(result.seed)]) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> list:
    """Parse a file written by emit_csv back into row dictionaries."""
    import csv
    with open(path, encoding="utf-8") as fh:
        return [
            {k: (int(v) if k in ("trials", "seed") else float(v))
             for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
