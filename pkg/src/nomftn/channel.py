"""Parametric low-pass IM-DD channel: zero-phase magnitude response, ROP gain, AWGN.

Received optical power acts on the electrical amplitude linearly
(square-law detection), so +1 dB of ROP is +2 dB of electrical SNR with a
fixed receiver noise floor. The reference power is 0 dBm.
"""
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Tuple

import numpy as np
from scipy import signal

from .errors import ConfigurationError

KINDS = ("flat", "gaussian_lowpass", "tabulated")
ROP_REF_DBM = 0.0
PSD_SEGMENT = 256


@dataclass(frozen=True)
class ChannelProfile:
    """Channel emulator settings.

    ``noise_psd`` is the AWGN variance per real sample; ``table`` holds
    ``(frequency_hz, gain_db)`` pairs for the tabulated kind.
    """

    kind: str = "flat"
    f_3db: float = 10e9
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    noise_psd: float = 0.0
    rop_dbm: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.noise_psd) or self.noise_psd < 0:
            raise ConfigurationError(f"noise_psd must be finite and >= 0, got {self.noise_psd}")
        if not np.isfinite(self.rop_dbm):
            raise ConfigurationError(f"rop_dbm must be finite, got {self.rop_dbm}")
        if self.kind == "gaussian_lowpass" and not self.f_3db > 0:
            raise ConfigurationError(f"f_3db must be positive, got {self.f_3db}")
        if self.kind == "tabulated":
            if not self.table:
                raise ConfigurationError("tabulated channel needs a non-empty table")
            f = np.array([p[0] for p in self.table], dtype=float)
            g = np.array([p[1] for p in self.table], dtype=float)
            if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
                raise ConfigurationError("channel table entries must be finite")
            if np.any(np.diff(f) <= 0):
                raise ConfigurationError("channel table frequencies must be strictly increasing")

    @property
    def amplitude_gain(self) -> float:
        return 10.0 ** ((self.rop_dbm - ROP_REF_DBM) / 10.0)

    def replace(self, **kw) -> "ChannelProfile":
        from dataclasses import replace
        return replace(self, **kw)


def parse_table(text: str, source: str = "<table>") -> Tuple[Tuple[float, float], ...]:
    """Parse two-column ``frequency_hz gain_db`` text; ``#`` starts a comment."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 2:
            raise ConfigurationError(f"{source}:{lineno}: expected 2 columns, got {len(fields)}")
        try:
            rows.append((float(fields[0]), float(fields[1])))
        except ValueError:
            raise ConfigurationError(f"{source}:{lineno}: non-numeric entry {line!r}") from None
    if not rows:
        raise ConfigurationError(f"{source}: no data rows")
    return tuple(rows)


def load_table(path) -> Tuple[Tuple[float, float], ...]:
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read(), str(path))


def _preset_table(name):
    text = resources.files("nomftn").joinpath("data", f"{name}.txt").read_text(encoding="utf-8")
    return parse_table(text, name)


PRESET_DESCRIPTIONS = {
    "flat": "unit gain at all frequencies",
    "lowpass-10g": "Gaussian low-pass, -3 dB at 10 GHz",
    "paper-20km": "tabulated 20-km SSMF IM-DD response: 0.9 dB/GHz slope to 10 GHz, 4 dB/GHz roll-off above",
}


def preset(name: str, noise_psd: float = 0.0, rop_dbm: float = 0.0) -> ChannelProfile:
    """Shipped channel profiles: see ``PRESET_DESCRIPTIONS``."""
    if name == "flat":
        return ChannelProfile("flat", noise_psd=noise_psd, rop_dbm=rop_dbm, name=name)
    if name == "lowpass-10g":
        return ChannelProfile("gaussian_lowpass", f_3db=10e9, noise_psd=noise_psd,
                              rop_dbm=rop_dbm, name=name)
    if name == "paper-20km":
        return ChannelProfile("tabulated", table=_preset_table(name), noise_psd=noise_psd,
                              rop_dbm=rop_dbm, name=name)
    raise ConfigurationError(f"unknown channel preset {name!r}; known: {sorted(PRESET_DESCRIPTIONS)}")


def profile_gain(f, p: ChannelProfile):
    """Complex (zero-phase) gain at frequency ``f`` in Hz; vectorized over ``f``.

    Tabulated profiles interpolate linearly in dB and clamp to the end
    points outside the table range.
    """
    f = np.asarray(f, dtype=float)
    if p.kind == "flat":
        g = np.ones_like(f)
    elif p.kind == "gaussian_lowpass":
        # power response exp(-ln2 (f/f3)^2): half power at f_3db
        g = np.exp(-0.5 * np.log(2.0) * (f / p.f_3db) ** 2)
    else:
        tf = np.array([t[0] for t in p.table])
        tg = np.array([t[1] for t in p.table])
        g = 10.0 ** (np.interp(f, tf, tg) / 20.0)
    g = g.astype(complex)
    return g[()] if g.ndim == 0 else g


def apply_channel(samples, p: ChannelProfile, seed, sample_rate: float = 26e9) -> np.ndarray:
    """Scale by the ROP gain, filter the whole record in frequency, add AWGN.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`; the
    output is a deterministic function of ``(samples, p, seed)``.
    """
    x = np.asarray(samples, dtype=float)
    y = x * p.amplitude_gain
    if p.kind != "flat" and y.size:
        freqs = np.fft.rfftfreq(y.size, d=1.0 / sample_rate)
        y = np.fft.irfft(np.fft.rfft(y) * profile_gain(freqs, p).real, n=y.size)
    if p.noise_psd > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, np.sqrt(p.noise_psd), size=y.shape)
    return y


def measure_spectrum(samples, sample_rate: float):
    """Welch PSD (Hann, 256-sample segments, 50 % overlap), peak-normalized.

    Returns ``(frequency_hz, power_db)`` for ``0 .. sample_rate/2``. The
    positive half of the two-sided estimate is used so DC and Nyquist are
    not scaled differently from the other bins.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < PSD_SEGMENT:
        raise ConfigurationError(f"need at least {PSD_SEGMENT} samples for the PSD, got {x.size}")
    f, pxx = signal.welch(x, fs=sample_rate, window="hann", nperseg=PSD_SEGMENT,
                          noverlap=PSD_SEGMENT // 2, detrend=False, return_onesided=False,
                          scaling="density")
    half = PSD_SEGMENT // 2 + 1
    f = np.abs(f[:half])
    pxx = pxx[:half]
    peak = np.max(pxx)
    if peak <= 0:
        return f, np.full(half, -np.inf)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(pxx / peak)
    return f, db


def rolloff_edge(freqs, power_db, level_db: float = -10.0) -> float:
    """Highest frequency whose normalized PSD is at or above ``level_db``."""
    idx = np.nonzero(np.asarray(power_db) >= level_db)[0]
    return float(np.asarray(freqs)[idx[-1]]) if idx.size else 0.0
