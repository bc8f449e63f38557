"""Command-line harness: ``nomftn run|sweep|complexity|spectrum|profiles``.

Exit status is 0 on success, 2 for configuration or input errors and 3 for
runtime or numerical failures. Every file goes under ``--out``.
"""
import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as chan
from .config import load_config, shipped_config, shipped_configs
from .errors import ConfigurationError, CsvParseError, NomFtnError
from .modem import BandPlan, line_rate, occupied_bandwidth
from .planner import ALLOCATION_PROFILES, allocation_profile, complexity_reduction
from .plotting import emit_plot
from .receiver import DetectorConfig
from .sim import RunResult, derive_seed, run, sweep, transmit

log = logging.getLogger("nomftn")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
PLOT_FOR_PARAM = {"alpha": "ber_alpha", "rop_dbm": "ber_rop", "l_bands": "ber_l", "noise_psd": "ber"}


def fmt_ber(x: float) -> str:
    """Scientific notation with 6 significant digits."""
    return f"{x:.5e}"


def result_columns(n_bands: int) -> list:
    cols = ["param", "value", "plan", "alpha_eff", "bits", "errors", "ber"]
    cols += [f"ber_band{i}" for i in range(1, n_bands + 1)]
    cols += [f"errors_band{i}" for i in range(1, n_bands + 1)]
    cols += [f"bits_band{i}" for i in range(1, n_bands + 1)]
    cols += ["flatness", "line_rate_gbps", "bandwidth_ghz", "cm_approx", "reduction_cm",
             "reduction_ca"]
    return cols


def result_row(param, value, res: RunResult, n_bands: int) -> list:
    rep = res.report
    k = len(rep.band_bits)
    pad = [""] * (n_bands - k)
    alphas = ";".join(f"{a:.4f}" for a in sorted(set(res.metadata["alpha_eff"])))
    return ([param or "", "" if value is None else str(value), res.plan.label(), alphas,
             str(rep.bits), str(rep.errors), fmt_ber(rep.ber)]
            + [fmt_ber(b) for b in rep.band_ber] + pad
            + [str(e) for e in rep.band_errors] + pad
            + [str(b) for b in rep.band_bits] + pad
            + [f"{rep.flatness:.6f}", f"{res.metadata['line_rate'] / 1e9:.4f}",
               f"{res.metadata['bandwidth'] / 1e9:.4f}", f"{float(res.complexity.cm_approx):.10g}",
               f"{float(res.complexity.reduction_cm):.6f}", f"{float(res.complexity.reduction_ca):.6f}"])


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _results_csv(path, param, results):
    n_bands = max(len(r.report.band_bits) for _, r in results)
    rows = [result_row(param, v, r, n_bands) for v, r in results]
    write_csv(path, result_columns(n_bands), rows)


def _load(args):
    path = Path(args.config)
    cfg = load_config(path) if path.exists() else shipped_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigurationError(f"--seed must fit in 64 unsigned bits, got {args.seed}")
        cfg = replace(cfg, master_seed=args.seed)
    if args.frames is not None:
        cfg = replace(cfg, n_frames=args.frames)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summary(value, res: RunResult):
    rep = res.report
    bands = " ".join(fmt_ber(b) for b in rep.band_ber)
    head = f"{res.plan.label()}" + ("" if value is None else f" @ {value}")
    print(f"{head}: BER {fmt_ber(rep.ber)} ({rep.errors}/{rep.bits}), bands [{bands}], "
          f"flatness {rep.flatness:.3f}")


def cmd_run(args) -> int:
    cfg = replace(_load(args), sweep=None)
    res = run(cfg)
    out = _out(args)
    _results_csv(out / "run.csv", "", [(None, res)])
    _summary(None, res)
    log.info("wall clock %.2f s on %d thread(s)", res.metadata["wall_clock_s"], res.metadata["threads"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    results = sweep(cfg)
    out = _out(args)
    param = cfg.sweep[0] if cfg.sweep else ""
    csv_path = out / "sweep.csv"
    _results_csv(csv_path, param, results)
    for v, r in results:
        _summary(v, r)
    if not args.no_plot:
        emit_plot(csv_path, PLOT_FOR_PARAM.get(param, "ber"))
    return EXIT_OK


def cmd_complexity(args) -> int:
    if args.config:
        cfg = _load(args)
        plans = [(cfg.plan.label(), cfg.plan, cfg.detector)]
        v_total, alpha = cfg.plan.v_total, cfg.plan.alpha
    else:
        v_total, alpha = args.v_total, args.alpha
        plans = [(key, BandPlan.uniform(v_total, alpha, qams), DetectorConfig())
                 for key, qams in ALLOCATION_PROFILES.items()]
    base = BandPlan.uniform(v_total, alpha, allocation_profile(1))
    header = ["profile", "qams", "cm_exact", "ca_exact", "cm_approx", "ca_approx",
              "reduction_cm_pct", "reduction_ca_pct", "reduction_cm_exact_pct", "reduction_ca_exact_pct"]
    rows = []
    for key, plan, det in plans:
        cx = complexity_reduction(plan, det, base)
        rows.append([key, ";".join(map(str, plan.qams)),
                     f"{float(cx.cm_exact):.10g}", f"{float(cx.ca_exact):.10g}",
                     f"{float(cx.cm_approx):.10g}", f"{float(cx.ca_approx):.10g}",
                     f"{float(cx.reduction_cm) * 100:.2f}", f"{float(cx.reduction_ca) * 100:.2f}",
                     f"{float(cx.reduction_cm_exact) * 100:.2f}", f"{float(cx.reduction_ca_exact) * 100:.2f}"])
        print(f"{key:>4} {str(plan.qams):<22} CM -{rows[-1][6]}%  CA -{rows[-1][7]}%  "
              f"(exact -{rows[-1][8]}% / -{rows[-1][9]}%)")
    write_csv(_out(args) / "complexity.csv", header, rows)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = replace(_load(args), sweep=None)
    plan, frame = cfg.plan, cfg.frame
    rng = np.random.default_rng(derive_seed(cfg.master_seed, 0, 0))
    bits = rng.integers(0, 2, size=(frame.n_payload, plan.bits_per_block), dtype=np.uint8)
    record, _ = transmit(plan, frame, bits)
    if args.received:
        record = chan.apply_channel(record, cfg.channel, derive_seed(cfg.master_seed, 0, 1),
                                    frame.sample_rate)
    f, db = chan.measure_spectrum(record, frame.sample_rate)
    out = _out(args)
    csv_path = out / "spectrum.csv"
    write_csv(csv_path, ["frequency_hz", "power_db"],
              [[f"{fi:.6e}", f"{max(d, -300.0):.4f}"] for fi, d in zip(f, db)])
    edge = chan.rolloff_edge(f, db, -10.0)
    print(f"{plan.label()}: -10 dB edge {edge / 1e9:.2f} GHz "
          f"(occupied bandwidth {occupied_bandwidth(plan, frame) / 1e9:.2f} GHz, "
          f"line rate {line_rate(plan, frame) / 1e9:.2f} Gb/s)")
    if not args.no_plot:
        emit_plot(csv_path, "psd")
    return EXIT_OK


def cmd_profiles(args) -> int:
    print("channel presets:")
    for name, desc in chan.PRESET_DESCRIPTIONS.items():
        print(f"  {name:<12} {desc}")
    print("allocation profiles (QAM order per sub-band):")
    for key, qams in ALLOCATION_PROFILES.items():
        print(f"  L={key:<3} {list(qams)}")
    print("shipped configs:")
    for name in shipped_configs():
        print(f"  {name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nomftn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="INI file, or the name of a shipped config (see `profiles`)")
        sp.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        sp.add_argument("--frames", type=int, help="number of frames per point")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU")

    sp = sub.add_parser("run", help="simulate one configuration")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="simulate each value of the configured sweep")
    common(sp)
    sp.add_argument("--no-plot", action="store_true", help="skip the SVG plot")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("complexity", help="detector complexity and reduction against L=1 [8]")
    common(sp, config_required=False)
    sp.add_argument("--v-total", type=int, default=120)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.set_defaults(func=cmd_complexity)
    sp = sub.add_parser("spectrum", help="Welch PSD of the transmitted (or received) signal")
    common(sp)
    sp.add_argument("--received", action="store_true", help="measure after the channel")
    sp.add_argument("--no-plot", action="store_true", help="skip the SVG plot")
    sp.set_defaults(func=cmd_spectrum)
    sp = sub.add_parser("profiles", help="list channel presets, allocation profiles and configs")
    sp.set_defaults(func=cmd_profiles)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, CsvParseError) as exc:
        print(f"nomftn: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NomFtnError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"nomftn: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
