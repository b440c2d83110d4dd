"""Command-line interface.

Subcommands: design-pilot, simulate-psli, simulate-mse, se-table,
channel-probe, calibrate-detector.  Options can come from a plain-text
key=value config file plus flag overrides; exit status is 0 on success and
nonzero on validation or I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .channel import (ChannelModelId, export_csv, make_model1, make_model2,
                      make_model3)
from .estimator import (build_design, load_pilot, pilot_search_exhaustive,
                        pilot_search_relaxed, save_pilot)
from .framing import se_figures
from .modem import get_constellation
from .psli import DetectorConfig
from .simkit import (ExperimentConfig, emit_csv, run_mse_experiment,
                     run_psli_experiment)
from .waveform import PulseConfig, whitening_filter


def read_config_file(path) -> dict:
    """Parse key=value lines; blank lines and # comments are ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_MODEL_BY_NAME = {"model1": ChannelModelId.MODEL1,
                  "model2": ChannelModelId.MODEL2,
                  "model3": ChannelModelId.MODEL3}


def _add_common(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="output file path")


def _add_chain_flags(parser):
    parser.add_argument("--tau", type=float, default=0.84)
    parser.add_argument("--beta", type=float, default=0.35)
    parser.add_argument("--n-p", type=int, default=32)
    parser.add_argument("--n-s", type=int, default=256)
    parser.add_argument("--l-h", type=int, default=None,
                        help="ISI half-length (default: smallest window "
                        "keeping 99.99%% of tap energy)")
    parser.add_argument("--channel-model", choices=sorted(_MODEL_BY_NAME),
                        default="model2")
    parser.add_argument("--data-constellation", default="QPSK")
    parser.add_argument("--pilot-constellation", default="BPSK")
    parser.add_argument("--pilot-file", help="load the pilot from this file "
                        "instead of running the designer")
    parser.add_argument("--ebn0", type=float, nargs="+",
                        default=[0.0, 2.0, 4.0, 6.0, 8.0])
    parser.add_argument("--superframes", type=int, default=10)
    parser.add_argument("--frames-per-superframe", type=int, default=144)
    parser.add_argument("--c1", type=float, default=0.5)
    parser.add_argument("--c2", type=float, default=1.0)
    parser.add_argument("--r0", type=int, default=None)
    parser.add_argument("--noise-path", choices=["white", "colored"],
                        default="white")
    parser.add_argument("--rate-rc", type=float, default=0.75)
    parser.add_argument("--ebn0-includes-code-rate", action="store_true")
    parser.add_argument("--design-restarts", type=int, default=100)


def _build_config(args) -> ExperimentConfig:
    detector = DetectorConfig(c1=args.c1, c2=args.c2, r0=args.r0)
    return ExperimentConfig(
        channel_model=_MODEL_BY_NAME[args.channel_model],
        tau=args.tau, beta=args.beta, n_p=args.n_p, n_s=args.n_s,
        l_h=args.l_h, data_constellation=args.data_constellation,
        detector=detector, ebn0_grid_db=tuple(args.ebn0),
        frames_per_superframe=args.frames_per_superframe,
        superframes=args.superframes, seed=args.seed, rate_rc=args.rate_rc,
        ebn0_includes_code_rate=args.ebn0_includes_code_rate,
        noise_path=args.noise_path)


def _get_design(args, cfg: ExperimentConfig):
    if args.pilot_file:
        pulse = PulseConfig(beta=cfg.beta, tau=cfg.tau, l_h=cfg.l_h)
        v = whitening_filter(pulse)
        constellation = get_constellation(args.pilot_constellation)
        pilot = load_pilot(args.pilot_file, constellation)
        return build_design(pilot, v, cfg.l_h, cfg.l_c)
    from .simkit import default_design
    return default_design(cfg, args.pilot_constellation,
                          restarts=args.design_restarts)


def cmd_design_pilot(args) -> int:
    cfg = _build_config(args)
    pulse = PulseConfig(beta=cfg.beta, tau=cfg.tau, l_h=cfg.l_h)
    v = whitening_filter(pulse)
    constellation = get_constellation(args.pilot_constellation)
    if args.exhaustive:
        design = pilot_search_exhaustive(constellation, cfg.n_p, v, cfg.l_h,
                                         cfg.l_c, limit=args.limit)
    else:
        design = pilot_search_relaxed(constellation, cfg.n_p, v, cfg.l_h,
                                      cfg.l_c, restarts=args.design_restarts,
                                      seed=args.seed)
    out = args.out or "pilot.txt"
    save_pilot(out, design.pilot, constellation)
    print(f"wrote {out}  (predicted MSE at sigma^2=1: {design.predicted_mse:.6f})")
    return 0


def cmd_simulate(args, kind: str) -> int:
    cfg = _build_config(args)
    design = _get_design(args, cfg)
    if kind == "psli":
        result = run_psli_experiment(cfg, design, workers=args.workers)
    else:
        cfg = replace(cfg, use_identified_location=args.identified_location,
                      interpolate_taps=args.interpolate)
        result = run_mse_experiment(cfg, design, workers=args.workers)
    out = args.out or f"{kind}_results.csv"
    emit_csv(result, out)
    for p in result.points:
        if kind == "psli":
            print(f"ebn0={p.ebn0_db:g} dB  pslie={p.pslie:.6g} "
                  f"[{p.pslie_ci[0]:.3g}, {p.pslie_ci[1]:.3g}]  trials={p.trials}")
        else:
            print(f"ebn0={p.ebn0_db:g} dB  mse={p.mse:.6g}  trials={p.trials}")
    print(f"wrote {out}")
    return 0


def cmd_se_table(args) -> int:
    from .framing import NoIndexCapacityError, placement_set
    rows = []
    for n_p in args.n_p_grid:
        for n_s in args.n_s_grid:
            for m in args.m_grid:
                try:
                    n_b = placement_set(n_s, args.l_c).n_b
                except NoIndexCapacityError:
                    n_b = 0
                se = se_figures(n_p, n_s, m, args.tau, args.beta, args.rate_rc, n_b)
                rows.append((n_p, n_s, m, n_b) + se)
    lines = ["n_p,n_s,m,n_b,se_nyquist,se_ftn,se_im_ftn,gain_nyq_pct,gain_ftn_pct"]
    for r in rows:
        lines.append(",".join(f"{x:.4f}" if isinstance(x, float) else str(x)
                              for x in r))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_channel_probe(args) -> int:
    n_symbols = args.frames * (args.n_p + args.n_s)
    model = _MODEL_BY_NAME[args.channel_model]
    if model is ChannelModelId.MODEL1:
        ch = make_model1(args.seed, n_symbols, tau=args.tau)
    elif model is ChannelModelId.MODEL2:
        ch = make_model2(args.seed, n_symbols=n_symbols, tau=args.tau)
    else:
        ch = make_model3(args.seed, n_frames=args.frames,
                         frame_len=args.n_p + args.n_s, tau=args.tau)
    out = args.out or "channel.csv"
    export_csv(ch, out, decimate=args.decimate)
    print(f"wrote {out}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _build_config(args)
    design = _get_design(args, cfg)
    best = None
    lines = ["c1,c2,pslie,errors,trials"]
    for c1 in args.c1_grid:
        for c2 in args.c2_grid:
            det = DetectorConfig(c1=c1, c2=c2, r0=args.r0)
            sweep_cfg = replace(cfg, detector=det)
            result = run_psli_experiment(sweep_cfg, design, workers=args.workers)
            p = result.points[0]
            lines.append(f"{c1:g},{c2:g},{p.pslie:.6g},{p.errors},{p.trials}")
            print(lines[-1])
            if best is None or p.pslie < best[0]:
                best = (p.pslie, c1, c2)
    print(f"best: c1={best[1]:g} c2={best[2]:g} pslie={best[0]:.6g}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftnim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-pilot", help="search for a pilot and write it")
    _add_common(p)
    _add_chain_flags(p)
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--limit", type=int, default=2 ** 20)
    p.set_defaults(func=cmd_design_pilot)

    p = sub.add_parser("simulate-psli", help="pilot-location error rate")
    _add_common(p)
    _add_chain_flags(p)
    p.set_defaults(func=lambda a: cmd_simulate(a, "psli"))

    p = sub.add_parser("simulate-mse", help="channel-estimation MSE")
    _add_common(p)
    _add_chain_flags(p)
    p.add_argument("--identified-location", action="store_true",
                   help="estimate at identified instead of true locations")
    p.add_argument("--interpolate", action="store_true",
                   help="linear per-symbol interpolation (model 1)")
    p.set_defaults(func=lambda a: cmd_simulate(a, "mse"))

    p = sub.add_parser("se-table", help="spectral-efficiency table CSV")
    _add_common(p)
    p.add_argument("--n-p-grid", type=int, nargs="+", default=[48, 32])
    p.add_argument("--n-s-grid", type=int, nargs="+", default=[48, 96, 256])
    p.add_argument("--m-grid", type=int, nargs="+", default=[2, 4])
    p.add_argument("--tau", type=float, default=0.72)
    p.add_argument("--beta", type=float, default=0.35)
    p.add_argument("--rate-rc", type=float, default=0.75)
    p.add_argument("--l-c", type=int, default=6)
    p.set_defaults(func=cmd_se_table)

    p = sub.add_parser("channel-probe", help="dump channel taps as CSV")
    _add_common(p)
    p.add_argument("--channel-model", choices=sorted(_MODEL_BY_NAME),
                   default="model2")
    p.add_argument("--tau", type=float, default=0.84)
    p.add_argument("--n-p", type=int, default=32)
    p.add_argument("--n-s", type=int, default=256)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--decimate", type=int, default=1)
    p.set_defaults(func=cmd_channel_probe)

    p = sub.add_parser("calibrate-detector", help="sweep (c1, c2) and report PSLIE")
    _add_common(p)
    _add_chain_flags(p)
    p.add_argument("--c1-grid", type=float, nargs="+", default=[0.3, 0.5, 0.7])
    p.add_argument("--c2-grid", type=float, nargs="+", default=[1.0])
    p.set_defaults(func=cmd_calibrate)

    return parser


def _config_file_flags(path) -> list:
    flags = []
    for key, value in read_config_file(path).items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "on", "yes"):
            flags.append(flag)
        elif value.lower() in ("false", "off", "no"):
            continue
        else:
            flags.extend([flag, *value.split()])
    return flags


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            # config file supplies defaults; explicit flags override because
            # they are parsed after the file-derived ones
            args = parser.parse_args(
                [argv[0], *_config_file_flags(args.config), *argv[1:]])
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
