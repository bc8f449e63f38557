"""Multi-band frame assembly and real-valued OFDM modulation.

Occupied bins are ``1..B`` (DC and Nyquist stay empty); band 1 sits at the
lowest frequencies. All DFTs use the unitary (``norm="ortho"``) scaling, so
a real noise sample variance of ``s2`` maps to complex per-bin variance
``s2``.
"""
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import NamedTuple, Sequence

import numpy as np

from .constellation import SUPPORTED_ORDERS
from .errors import ConfigurationError, FramingError, IntegrityError

IMAG_TOL = 1e-9


class Band(NamedTuple):
    n: int  # original subcarriers
    m: int  # compressed subcarriers
    q: int  # QAM order; 1 marks an unloaded bin (bit-loaded plans only)

    @property
    def bits_per_symbol(self) -> int:
        return int(self.q).bit_length() - 1

    @property
    def bits(self) -> int:
        return self.n * self.bits_per_symbol


def compressed_size(n: int, alpha: float) -> int:
    """Round-half-up of ``alpha * n`` with a guard against float fuzz."""
    return int(floor(alpha * n + 0.5 + 1e-9))


@dataclass(frozen=True)
class BandPlan:
    """Sub-band layout: ``l_bands`` bands of ``v_total / l_bands`` subcarriers.

    ``loaded`` marks per-bin bit-loaded plans (one n=m=1 band per bin) that
    are exempt from the non-increasing QAM order rule and may contain
    unloaded bins (``q == 1``).
    """

    l_bands: int
    v_total: int
    alpha: float
    per_band: tuple
    loaded: bool = False

    def __post_init__(self):
        if self.l_bands < 1 or len(self.per_band) != self.l_bands:
            raise ConfigurationError(f"plan declares {self.l_bands} bands but lists {len(self.per_band)}")
        if self.v_total % self.l_bands:
            raise ConfigurationError(f"V={self.v_total} is not divisible by L={self.l_bands}")
        n = self.v_total // self.l_bands
        for i, b in enumerate(self.per_band):
            if b.n != n:
                raise ConfigurationError(f"band {i + 1}: n={b.n}, expected V/L={n}")
            if not 1 <= b.m <= b.n:
                raise ConfigurationError(f"band {i + 1}: need 1 <= m <= n, got m={b.m}, n={b.n}")
            if b.q not in SUPPORTED_ORDERS and not (self.loaded and b.q == 1):
                raise ConfigurationError(f"band {i + 1}: unsupported QAM order {b.q}")
        qs = [b.q for b in self.per_band]
        if not self.loaded and any(a < b for a, b in zip(qs, qs[1:])):
            raise ConfigurationError(f"QAM orders must be non-increasing over bands, got {qs}")

    @classmethod
    def uniform(cls, v_total: int, alpha: float, qams: Sequence[int]) -> "BandPlan":
        """Plan with the same compression factor on every band."""
        l_bands = len(qams)
        if l_bands < 1:
            raise ConfigurationError("at least one band is required")
        if not 0 < alpha <= 1:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
        if v_total % l_bands:
            raise ConfigurationError(f"V={v_total} is not divisible by L={l_bands}")
        n = v_total // l_bands
        m = compressed_size(n, alpha)
        if m < 1:
            raise ConfigurationError(f"alpha={alpha} leaves no subcarriers for n={n}")
        return cls(l_bands, v_total, float(alpha), tuple(Band(n, m, int(q)) for q in qams))

    @classmethod
    def bitloaded(cls, bits_per_bin: Sequence[int]) -> "BandPlan":
        """Uncompressed DMT plan carrying ``bits_per_bin[i]`` bits on bin ``i + 1``."""
        bands = tuple(Band(1, 1, 1 << int(b)) for b in bits_per_bin)
        return cls(len(bands), len(bands), 1.0, bands, loaded=True)

    @property
    def b_total(self) -> int:
        return sum(b.m for b in self.per_band)

    @property
    def qams(self) -> list:
        return [b.q for b in self.per_band]

    @property
    def bits_per_block(self) -> int:
        return sum(b.bits for b in self.per_band)

    @property
    def effective_alpha(self) -> list:
        return [b.m / b.n for b in self.per_band]

    def band_slices(self) -> list:
        """Slices of each band inside the B occupied bins."""
        out, start = [], 0
        for b in self.per_band:
            out.append(slice(start, start + b.m))
            start += b.m
        return out

    def bit_slices(self) -> list:
        """Slices of each band inside one block's bit vector."""
        out, start = [], 0
        for b in self.per_band:
            out.append(slice(start, start + b.bits))
            start += b.bits
        return out

    def label(self) -> str:
        if self.loaded:
            return f"BL[{self.bits_per_block}b]"
        return "[" + ",".join(str(q) for q in self.qams) + "]"


@dataclass(frozen=True)
class FrameConfig:
    n_fft: int = 256
    cp_len: int = 8
    n_ts: int = 20
    n_payload: int = 200
    sample_rate: float = 26e9

    def __post_init__(self):
        if self.n_fft < 4 or self.n_fft % 2:
            raise ConfigurationError(f"n_fft must be even and >= 4, got {self.n_fft}")
        if not 0 <= self.cp_len <= self.n_fft:
            raise ConfigurationError(f"cp_len must lie in [0, n_fft], got {self.cp_len}")
        if self.n_ts < 0 or self.n_payload < 1:
            raise ConfigurationError("need n_ts >= 0 and n_payload >= 1")
        if self.sample_rate <= 0:
            raise ConfigurationError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def block_len(self) -> int:
        return self.n_fft + self.cp_len

    def check_plan(self, plan: BandPlan):
        if 2 * plan.b_total + 2 > self.n_fft:
            raise ConfigurationError(
                f"B={plan.b_total} occupied bins do not fit a Hermitian {self.n_fft}-point IFFT")


def training_symbols(n_ts: int, n_bins: int) -> np.ndarray:
    """Known QPSK training pattern, shape ``(n_ts, n_bins)``, drawn from seed 0."""
    from .constellation import get_constellation

    idx = np.random.default_rng(0).integers(0, 4, size=(n_ts, n_bins))
    return get_constellation(4).points[idx]


def assemble_spectrum(coeffs, plan: BandPlan, cfg: FrameConfig) -> np.ndarray:
    """Place per-band coefficients on bins ``1..B`` and mirror them Hermitian.

    ``coeffs`` is a list with one ``(..., m_l)`` array per band; leading
    batch dimensions are carried through.
    """
    cfg.check_plan(plan)
    if len(coeffs) != plan.l_bands:
        raise FramingError(f"expected coefficients for {plan.l_bands} bands, got {len(coeffs)}")
    parts = []
    for i, (c, b) in enumerate(zip(coeffs, plan.per_band)):
        c = np.asarray(c, dtype=complex)
        if c.shape[-1] != b.m:
            raise FramingError(f"band {i + 1}: expected {b.m} coefficients, got {c.shape[-1]}")
        parts.append(c)
    lead = np.broadcast_shapes(*(p.shape[:-1] for p in parts))
    data = np.concatenate([np.broadcast_to(p, lead + p.shape[-1:]) for p in parts], axis=-1)
    return place_bins(data, cfg.n_fft)


def place_bins(data, n_fft: int) -> np.ndarray:
    """Hermitian spectrum with ``data`` on bins ``1..B`` and conjugates on ``n_fft-B..n_fft-1``."""
    data = np.asarray(data, dtype=complex)
    n_bins = data.shape[-1]
    if 2 * n_bins + 2 > n_fft:
        raise ConfigurationError(f"B={n_bins} occupied bins do not fit a Hermitian {n_fft}-point IFFT")
    spec = np.zeros(data.shape[:-1] + (n_fft,), dtype=complex)
    spec[..., 1:n_bins + 1] = data
    spec[..., n_fft - n_bins:] = np.conj(data[..., ::-1])
    return spec


def ofdm_modulate(spectrum, cfg: FrameConfig) -> np.ndarray:
    """Unitary IDFT of a Hermitian spectrum plus cyclic prefix; real output."""
    spectrum = np.asarray(spectrum)
    if spectrum.shape[-1] != cfg.n_fft:
        raise FramingError(f"spectrum length {spectrum.shape[-1]} != n_fft {cfg.n_fft}")
    x = np.fft.ifft(spectrum, norm="ortho")
    residue = np.max(np.abs(x.imag)) if x.size else 0.0
    if residue > IMAG_TOL:
        raise IntegrityError(f"spectrum is not Hermitian: imaginary residue {residue:.3e}")
    x = x.real
    if cfg.cp_len:
        x = np.concatenate([x[..., -cfg.cp_len:], x], axis=-1)
    return x


def ofdm_demodulate(samples, cfg: FrameConfig, n_bins: int, timing_advance: int = 0) -> np.ndarray:
    """Strip the CP, take the unitary DFT and return occupied bins ``1..n_bins``.

    ``timing_advance`` starts the DFT window that many samples inside the
    CP. The resulting linear phase is removed, so the output does not
    depend on it for an ideal channel; it buys symmetric ISI margin for
    zero-phase (non-causal) channels.
    """
    samples = np.asarray(samples)
    if samples.shape[-1] != cfg.block_len:
        raise FramingError(f"block length {samples.shape[-1]} != n_fft + cp_len = {cfg.block_len}")
    if not 0 <= timing_advance <= cfg.cp_len:
        raise ConfigurationError(f"timing_advance must lie in [0, cp_len], got {timing_advance}")
    start = cfg.cp_len - timing_advance
    spec = np.fft.fft(samples[..., start:start + cfg.n_fft], norm="ortho")
    bins = spec[..., 1:n_bins + 1]
    if timing_advance:
        k = np.arange(1, n_bins + 1)
        bins = bins * np.exp(2j * np.pi * k * timing_advance / cfg.n_fft)
    return bins


def generate_ftn_direct(s, alpha: float, l_samples: int, n_fft_direct: int) -> np.ndarray:
    """Reference FTN waveform: ``X[k] = sum_v s_v exp(2j pi v alpha k / L)``, ``k < L``.

    When ``L / alpha`` is an integer the samples come from a zero-padded
    IFFT of that size truncated to the first ``L`` outputs; otherwise the
    sum is evaluated directly.
    """
    s = np.asarray(s, dtype=complex)
    v = s.shape[-1]
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    if l_samples < 1:
        raise ConfigurationError(f"l_samples must be >= 1, got {l_samples}")
    if n_fft_direct < floor(l_samples / alpha) + 1 and not (alpha == 1 and n_fft_direct >= l_samples):
        raise ConfigurationError(
            f"n_fft_direct={n_fft_direct} < floor(L/alpha)+1 = {floor(l_samples / alpha) + 1}")
    if v > n_fft_direct:
        raise ConfigurationError(f"V={v} subcarriers exceed n_fft_direct={n_fft_direct}")
    span = l_samples / alpha
    n_grid = int(round(span))
    if abs(span - n_grid) < 1e-9 and n_grid >= v:
        padded = np.zeros(s.shape[:-1] + (n_grid,), dtype=complex)
        padded[..., :v] = s
        return np.fft.ifft(padded, axis=-1)[..., :l_samples] * n_grid
    k = np.arange(l_samples)
    kernel = np.exp(2j * np.pi * alpha * np.outer(np.arange(v), k) / l_samples)
    return s @ kernel


def _frac(x) -> Fraction:
    return Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(10**12)


def line_rate(plan: BandPlan, cfg: FrameConfig, exact: bool = False):
    """Net payload bit rate in b/s excluding CP and training overhead."""
    rate = (_frac(cfg.sample_rate) * plan.bits_per_block / cfg.block_len
            * Fraction(cfg.n_payload, cfg.n_payload + cfg.n_ts))
    return rate if exact else float(rate)


def occupied_bandwidth(plan: BandPlan, cfg: FrameConfig, exact: bool = False):
    """Positive-frequency extent of the occupied bins, ``B * fs / n_fft`` in Hz."""
    bw = _frac(cfg.sample_rate) * plan.b_total / cfg.n_fft
    return bw if exact else float(bw)
