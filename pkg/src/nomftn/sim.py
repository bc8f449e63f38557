"""End-to-end link simulation: frames, runs and parameter sweeps.

A frame is ``n_ts`` training blocks followed by ``n_payload`` payload
blocks, sent through the channel as one record. Every frame draws its bits
and noise from seeds derived from ``(master_seed, frame_index)``, and
reports are merged in frame order, so results do not depend on the number
of worker threads.
"""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import channel as chan
from .constellation import get_constellation
from .errors import NomFtnError
from .modem import (BandPlan, FrameConfig, line_rate, occupied_bandwidth, ofdm_demodulate,
                    ofdm_modulate, place_bins, training_symbols)
from .planner import ComplexityReport, allocation_profile, chow_bitload, complexity_reduction
from .precoder import inverse_precode, make_nom, precode
from .receiver import (BerReport, DetectorConfig, RxEstimate, count_errors, detect_indices,
                       estimate_channel, zf_equalize)

log = logging.getLogger(__name__)

STREAM_BITS, STREAM_NOISE, STREAM_PROBE = 0, 1, 2
SWEEP_PARAMS = ("alpha", "l_bands", "rop_dbm", "noise_psd")


class FrameError(NomFtnError):
    """A module error raised while simulating a specific frame."""

    def __init__(self, frame_index, cause):
        self.frame_index = frame_index
        self.cause = cause
        super().__init__(f"frame {frame_index}: {type(cause).__name__}: {cause}")


def derive_seed(master_seed: int, frame_index: int, stream: int) -> int:
    """64-bit seed for one (frame, stream) pair."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(frame_index), int(stream)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunConfig:
    plan: BandPlan
    frame: FrameConfig = field(default_factory=FrameConfig)
    channel: chan.ChannelProfile = field(default_factory=chan.ChannelProfile)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    master_seed: int = 1
    n_frames: int = 1
    sweep: Optional[Tuple[str, tuple]] = None
    mode: str = "nom"  # "nom" or "chow" (per-bin bit loading benchmark)
    chow_gap_db: float = 3.0
    threads: int = 1

    def __post_init__(self):
        from .errors import ConfigurationError

        if self.n_frames < 1:
            raise ConfigurationError(f"n_frames must be >= 1, got {self.n_frames}")
        if self.mode not in ("nom", "chow"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.sweep is not None:
            name, values = self.sweep
            if name not in SWEEP_PARAMS:
                raise ConfigurationError(f"cannot sweep {name!r}; sweepable: {SWEEP_PARAMS}")
        self.frame.check_plan(self.plan)


@dataclass
class FrameOutcome:
    report: BerReport
    estimate: RxEstimate
    soft: Optional[list] = None  # per band (n_payload, n) soft values after inverse precoding
    sent: Optional[list] = None  # per band (n_payload, n) transmitted symbols
    record: Optional[np.ndarray] = None  # received samples


def tx_scale(plan: BandPlan, cfg: FrameConfig) -> float:
    """Amplitude factor giving unit mean power per time sample (fixed DAC swing)."""
    return float(np.sqrt(cfg.n_fft / (2.0 * plan.b_total)))


def build_payload(plan: BandPlan, bits: np.ndarray):
    """Map and precode ``(n_blocks, bits_per_block)`` bits; returns (bins, symbols per band)."""
    n_blocks = bits.shape[0]
    coeffs, sent = [], []
    for sl, b in zip(plan.bit_slices(), plan.per_band):
        if b.q < 2:
            coeffs.append(np.zeros((n_blocks, b.m), dtype=complex))
            sent.append(np.zeros((n_blocks, b.n), dtype=complex))
            continue
        c = get_constellation(b.q)
        k = c.bits_per_symbol
        weights = 1 << np.arange(k - 1, -1, -1)
        idx = bits[:, sl].reshape(n_blocks, b.n, k).astype(np.int64) @ weights
        s = c.points[idx]
        sent.append(s)
        coeffs.append(precode(s, make_nom(b.n, b.m)))
    return np.concatenate(coeffs, axis=1), sent


def transmit(plan: BandPlan, cfg: FrameConfig, bits: np.ndarray) -> Tuple[np.ndarray, list]:
    """Real baseband record (training then payload blocks) for the given payload bits."""
    data, sent = build_payload(plan, bits)
    ts = training_symbols(cfg.n_ts, plan.b_total)
    spec = place_bins(np.concatenate([ts, data], axis=0), cfg.n_fft)
    record = ofdm_modulate(spec, cfg).reshape(-1) * tx_scale(plan, cfg)
    return record, sent


def receive_bins(record: np.ndarray, plan: BandPlan, cfg: FrameConfig) -> np.ndarray:
    blocks = record.reshape(cfg.n_ts + cfg.n_payload, cfg.block_len)
    return ofdm_demodulate(blocks, cfg, plan.b_total, timing_advance=cfg.cp_len // 2)


def detect_payload(y_eq: np.ndarray, plan: BandPlan, est: RxEstimate, det: DetectorConfig,
                   keep_soft: bool = False):
    """Per-band inverse precoding and sequence detection; returns (bits, soft)."""
    n_blocks = y_eq.shape[0]
    out_bits, soft = [], []
    survivors = det.survivors(plan)
    for l, (sl, b) in enumerate(zip(plan.band_slices(), plan.per_band)):
        if b.q < 2:
            if keep_soft:
                soft.append(np.zeros((n_blocks, b.n), dtype=complex))
            continue
        nom = make_nom(b.n, b.m)
        c = get_constellation(b.q)
        z = inverse_precode(y_eq[:, sl], nom)
        if keep_soft:
            soft.append(z)
        surv = c.order ** b.n if det.exhaustive else survivors[l]
        idx = detect_indices(z, nom.gram, c.points, surv, est.sigma2_band[l], det.order)
        out_bits.append(c.labels[idx].reshape(n_blocks, -1))
    bits = np.concatenate(out_bits, axis=1) if out_bits else np.zeros((n_blocks, 0), np.uint8)
    return bits, (soft if keep_soft else None)


def simulate_frame(plan: BandPlan, cfg: FrameConfig, profile: chan.ChannelProfile,
                   det: DetectorConfig, master_seed: int, frame_index: int,
                   keep: bool = False) -> FrameOutcome:
    rng = np.random.default_rng(derive_seed(master_seed, frame_index, STREAM_BITS))
    bits = rng.integers(0, 2, size=(cfg.n_payload, plan.bits_per_block), dtype=np.uint8)
    record, sent = transmit(plan, cfg, bits)
    rx = chan.apply_channel(record, profile, derive_seed(master_seed, frame_index, STREAM_NOISE),
                            cfg.sample_rate)
    bins = receive_bins(rx, plan, cfg)
    est = estimate_channel(bins[:cfg.n_ts], training_symbols(cfg.n_ts, plan.b_total), plan)
    y_eq = zf_equalize(bins[cfg.n_ts:], est)
    rx_bits, soft = detect_payload(y_eq, plan, est, det, keep_soft=keep)
    report = count_errors(bits, rx_bits, plan)
    if keep:
        return FrameOutcome(report, est, soft, sent, rx)
    return FrameOutcome(report, est)


def probe_snr_db(plan: BandPlan, cfg: FrameConfig, profile: chan.ChannelProfile,
                 master_seed: int) -> np.ndarray:
    """Per-bin post-ZF SNR (dB) from one training-only frame over ``plan``'s bins."""
    ts = training_symbols(cfg.n_ts, plan.b_total)
    record = ofdm_modulate(place_bins(ts, cfg.n_fft), cfg).reshape(-1) * tx_scale(plan, cfg)
    rx = chan.apply_channel(record, profile, derive_seed(master_seed, 0, STREAM_PROBE),
                            cfg.sample_rate)
    blocks = rx.reshape(cfg.n_ts, cfg.block_len)
    bins = ofdm_demodulate(blocks, cfg, plan.b_total, timing_advance=cfg.cp_len // 2)
    est = estimate_channel(bins, ts, plan)
    return np.minimum(est.snr_db, 99.0)


def chow_plan(config: RunConfig) -> BandPlan:
    """Bit-loaded DMT plan over all ``V`` bins carrying the configured plan's bits."""
    full = BandPlan.uniform(config.plan.v_total, 1.0, [4] * config.plan.v_total)
    snr_db = probe_snr_db(full, config.frame, config.channel, config.master_seed)
    loading = chow_bitload(snr_db, config.plan.bits_per_block, config.chow_gap_db)
    return BandPlan.bitloaded(loading)


@dataclass
class RunResult:
    report: BerReport
    complexity: ComplexityReport
    plan: BandPlan
    metadata: dict


def baseline_plan(plan: BandPlan) -> BandPlan:
    return BandPlan.uniform(plan.v_total, plan.alpha, allocation_profile(1))


def resolve_threads(threads: int) -> int:
    return max(1, os.cpu_count() or 1) if threads <= 0 else int(threads)


def run(config: RunConfig, threads: Optional[int] = None) -> RunResult:
    """Simulate ``n_frames`` frames and aggregate the bit-error report."""
    t0 = time.perf_counter()
    plan = chow_plan(config) if config.mode == "chow" else config.plan
    config.frame.check_plan(plan)
    workers = resolve_threads(config.threads if threads is None else threads)

    def one(i):
        try:
            return simulate_frame(plan, config.frame, config.channel, config.detector,
                                  config.master_seed, i).report
        except NomFtnError as exc:
            raise FrameError(i, exc) from exc

    if workers == 1:
        reports = [one(i) for i in range(config.n_frames)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(config.n_frames)))
    total = reports[0]
    for r in reports[1:]:
        total = total + r
    det = config.detector if config.mode == "nom" else DetectorConfig()
    cx = complexity_reduction(plan, det, baseline_plan(config.plan))
    meta = {
        "plan": plan.label(),
        "alpha_eff": plan.effective_alpha,
        "line_rate": line_rate(plan, config.frame),
        "bandwidth": occupied_bandwidth(plan, config.frame),
        "seed": config.master_seed,
        "n_frames": config.n_frames,
        "threads": workers,
        "wall_clock_s": time.perf_counter() - t0,
    }
    log.info("run %s: BER %.3e over %d bits in %.2f s", meta["plan"], total.ber, total.bits,
             meta["wall_clock_s"])
    return RunResult(total, cx, plan, meta)


def apply_sweep_value(config: RunConfig, name: str, value) -> RunConfig:
    """Copy of ``config`` with one parameter replaced."""
    plan = config.plan
    if name == "alpha":
        return replace(config, plan=BandPlan.uniform(plan.v_total, float(value), plan.qams), sweep=None)
    if name == "l_bands":
        qams = allocation_profile(value)
        return replace(config, plan=BandPlan.uniform(plan.v_total, plan.alpha, qams), sweep=None)
    if name == "rop_dbm":
        return replace(config, channel=config.channel.replace(rop_dbm=float(value)), sweep=None)
    if name == "noise_psd":
        return replace(config, channel=config.channel.replace(noise_psd=float(value)), sweep=None)
    from .errors import ConfigurationError
    raise ConfigurationError(f"cannot sweep {name!r}; sweepable: {SWEEP_PARAMS}")


def sweep(config: RunConfig, threads: Optional[int] = None) -> List[Tuple[object, RunResult]]:
    """Run once per sweep value (or once when no sweep or no values are configured)."""
    if config.sweep is None or not config.sweep[1]:
        return [(None, run(replace(config, sweep=None), threads))]
    name, values = config.sweep
    return [(v, run(apply_sweep_value(config, name, v), threads)) for v in values]
