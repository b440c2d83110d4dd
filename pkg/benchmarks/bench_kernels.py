#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Run twice to compare backends:

    python benchmarks/bench_kernels.py
    FTNIM_DISABLE_NUMBA=1 python benchmarks/bench_kernels.py

or pass --both to fork a subprocess per backend and print a summary table.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def build_inputs(seed=0):
    from ftnim.estimator import pilot_search_relaxed
    from ftnim.modem import BPSK
    from ftnim.simkit import ExperimentConfig, build_chain
    from ftnim.waveform import PulseConfig, whitening_filter

    cfg = ExperimentConfig(tau=0.84, superframes=1, seed=seed)
    pulse = PulseConfig(beta=cfg.beta, tau=cfg.tau, l_h=cfg.l_h)
    v = whitening_filter(pulse)
    design = pilot_search_relaxed(BPSK, cfg.n_p, v, cfg.l_h, cfg.l_c,
                                  restarts=2, seed=seed)
    return cfg, build_chain(cfg, design)


def bench(repeats=5, superframes=20, seed=0):
    from ftnim import _kernels
    from ftnim.simkit import _psli_superframe

    cfg, chain = build_inputs(seed)
    sigma = 0.35
    n = cfg.frames_per_superframe * cfg.frame_len
    rng = np.random.default_rng(seed)
    stream = (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    taps = np.zeros((1, cfg.l_c + 1), dtype=complex)
    taps[0, 0] = taps[0, -1] = 0.7
    profile = np.array([0, cfg.l_c])

    # warmup (includes JIT compilation when numba is enabled)
    _kernels.apply_tapped_delay(stream, taps, n, profile)
    _psli_superframe(chain, (seed, 0, 0), sigma)

    t0 = time.perf_counter()
    for _ in range(repeats):
        _kernels.apply_tapped_delay(stream, taps, n, profile)
    t_delay = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    frames = 0
    for sf in range(superframes):
        _, f = _psli_superframe(chain, (seed, 0, sf), sigma)
        frames += f
    t_total = time.perf_counter() - t0

    return {
        "backend": "numba" if _kernels.NUMBA_ENABLED else "numpy",
        "tapped_delay_ms": t_delay * 1e3,
        "psli_frames_per_s": frames / t_total,
        "frames": frames,
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--both", action="store_true",
                        help="run numba and numpy backends in subprocesses")
    parser.add_argument("--superframes", type=int, default=20)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args()

    if args.both:
        rows = []
        for disable in ("0", "1"):
            env = dict(os.environ, FTNIM_DISABLE_NUMBA=disable)
            out = subprocess.run(
                [sys.executable, __file__, "--json",
                 "--superframes", str(args.superframes)],
                env=env, capture_output=True, text=True, check=True)
            rows.append(json.loads(out.stdout.splitlines()[-1]))
        print(f"{'backend':<8} {'tapped_delay_ms':>16} {'psli_frames/s':>14}")
        for r in rows:
            print(f"{r['backend']:<8} {r['tapped_delay_ms']:>16.3f} "
                  f"{r['psli_frames_per_s']:>14.0f}")
        speedup = rows[0]["psli_frames_per_s"] / rows[1]["psli_frames_per_s"]
        print(f"numba speedup on the identification loop: {speedup:.1f}x")
        return

    result = bench(superframes=args.superframes)
    if args.json:
        print(json.dumps(result))
    else:
        for k, v in result.items():
            print(f"{k}: {v}")


if __name__ == "__main__":
    main()
