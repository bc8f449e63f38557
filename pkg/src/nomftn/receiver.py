"""Channel estimation, ZF equalization, per-band noise averaging, M-algorithm
sequence detection and bit-error accounting.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np

from .constellation import Constellation, indices_to_bits
from .errors import ConfigurationError, DegenerateChannelError, FramingError
from .modem import BandPlan
from .precoder import NomMatrix

H_MIN = 1e-12
# relative metric window treated as a tie when picking the final path
TIE_RTOL = 1e-9
# diagonal loading of the gram before whitening, relative to unit symbol energy
WHITEN_DELTA = 1e-2
# candidate-array budget per detection call
CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class RxEstimate:
    """Per-bin gains, post-ZF noise variances and their per-band averages."""

    h: np.ndarray
    sigma2: np.ndarray
    sigma2_band: np.ndarray

    @property
    def snr_db(self) -> np.ndarray:
        """Post-ZF per-bin SNR for unit-power symbols."""
        with np.errstate(divide="ignore"):
            return -10.0 * np.log10(self.sigma2)


@dataclass(frozen=True)
class DetectorConfig:
    """M-algorithm settings.

    ``survivors_per_band`` of ``None`` keeps ``Q_l`` paths on band ``l``.
    ``order`` is ``"ascending"`` or ``"descending"`` symbol position order.
    """

    survivors_per_band: Optional[tuple] = None
    exhaustive: bool = False
    order: str = "ascending"

    def __post_init__(self):
        if self.survivors_per_band is not None and any(c < 1 for c in self.survivors_per_band):
            raise ConfigurationError(f"survivor counts must be >= 1, got {self.survivors_per_band}")
        if self.order not in ("ascending", "descending"):
            raise ConfigurationError(f"unknown detection order {self.order!r}")

    def survivors(self, plan: BandPlan) -> List[int]:
        if self.survivors_per_band is None:
            return [b.q for b in plan.per_band]
        sv = list(self.survivors_per_band)
        if len(sv) == 1:
            sv = sv * plan.l_bands
        if len(sv) != plan.l_bands:
            raise ConfigurationError(f"{len(sv)} survivor counts for {plan.l_bands} bands")
        return sv


@dataclass(frozen=True)
class BerReport:
    band_errors: tuple
    band_bits: tuple

    @property
    def per_band(self) -> list:
        return [(e, b, e / b if b else 0.0) for e, b in zip(self.band_errors, self.band_bits)]

    @property
    def errors(self) -> int:
        return int(sum(self.band_errors))

    @property
    def bits(self) -> int:
        return int(sum(self.band_bits))

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0

    @property
    def overall(self) -> tuple:
        return (self.errors, self.bits, self.ber)

    @property
    def band_ber(self) -> list:
        return [r[2] for r in self.per_band]

    @property
    def flatness(self) -> float:
        """``max / mean`` of the per-band BERs of bands that carry bits; 1.0 if all are zero."""
        bers = [r[2] for r in self.per_band if r[1]]
        mean = float(np.mean(bers)) if bers else 0.0
        return max(bers) / mean if mean > 0 else 1.0

    def __add__(self, other: "BerReport") -> "BerReport":
        if len(self.band_bits) != len(other.band_bits):
            raise FramingError("cannot merge reports with different band counts")
        return BerReport(tuple(a + b for a, b in zip(self.band_errors, other.band_errors)),
                         tuple(a + b for a, b in zip(self.band_bits, other.band_bits)))


def band_noise_variance(sigma2, plan: BandPlan) -> np.ndarray:
    """Per-band variance: the band's ``m`` per-bin variances summed, divided by ``n``.

    With a row-truncated OCT each entry has ``|A[k, j]|^2 = 1/n``, so this is
    exactly the per-position noise variance after the inverse precoder.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma2.shape[-1] != plan.b_total:
        raise FramingError(f"expected {plan.b_total} per-bin variances, got {sigma2.shape[-1]}")
    return np.array([sigma2[..., sl].sum(axis=-1) / b.n
                     for sl, b in zip(plan.band_slices(), plan.per_band)])


def _check_gain(h):
    bad = np.nonzero(np.abs(h) < H_MIN)[0]
    if bad.size:
        raise DegenerateChannelError(int(bad[0]), h[bad[0]])


def estimate_channel(rx_ts, known_ts, plan: BandPlan) -> RxEstimate:
    """Least-squares gain and post-ZF noise variance from training blocks.

    ``rx_ts`` and ``known_ts`` have shape ``(n_blocks, B)``.
    """
    rx_ts = np.asarray(rx_ts)
    known_ts = np.asarray(known_ts)
    if rx_ts.shape != known_ts.shape:
        raise FramingError(f"training shapes differ: {rx_ts.shape} vs {known_ts.shape}")
    if rx_ts.ndim != 2 or rx_ts.shape[0] < 2:
        raise FramingError("need at least 2 training blocks")
    ratio = rx_ts / known_ts
    h = ratio.mean(axis=0)
    _check_gain(h)
    resid = ratio / h - 1.0
    sigma2 = np.sum(np.abs(resid - resid.mean(axis=0)) ** 2, axis=0) / (rx_ts.shape[0] - 1)
    return RxEstimate(h, sigma2, band_noise_variance(sigma2, plan))


def zf_equalize(y, est: RxEstimate) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[-1] != est.h.shape[-1]:
        raise FramingError(f"expected {est.h.shape[-1]} bins, got {y.shape[-1]}")
    _check_gain(est.h)
    return y / est.h


def _select(metric, keep):
    """Indices of the ``keep`` best candidates per row, returned in ascending
    (lexicographic) order; equal metrics favour the lower index. ``None``
    means keep everything."""
    if keep >= metric.shape[1]:
        return None
    order = np.argsort(metric, axis=1, kind="stable")[:, :keep]
    order.sort(axis=1)
    return order


def _first_minimum(metric):
    """Per row, the lowest index whose metric is within the tie window of the minimum."""
    lo = metric.min(axis=1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(metric).max(axis=1, keepdims=True))
    return np.argmax(metric <= lo + tol, axis=1)


def whitening_factor(gram, delta: float = WHITEN_DELTA) -> np.ndarray:
    """Lower-triangular ``R`` with ``R^H R = gram + delta * I``."""
    n = gram.shape[0]
    k = gram[::-1, ::-1] + delta * np.eye(n)
    upper = np.linalg.cholesky(k).conj().T
    return np.ascontiguousarray(upper[::-1, ::-1])


@lru_cache(maxsize=64)
def _whitening_factor(key: bytes, n: int) -> np.ndarray:
    r = whitening_factor(np.frombuffer(key, dtype=complex).reshape(n, n))
    r.setflags(write=False)
    return r


def _tree_search(z, basis, points, survivors, branch):
    """Breadth-first search over positions 0..n-1 keeping ``survivors`` paths.

    ``branch(k, acc_k)`` returns the (F, S, Q) metric increments at position
    ``k`` given each path's running interference ``acc_k``; ``basis[:, k]``
    is added to ``acc`` when a symbol is fixed at ``k``. Paths stay in
    lexicographic order, so the first of equal metrics is the
    lexicographically smallest.
    """
    n_frames, n = z.shape
    q = points.size
    paths = np.zeros((n_frames, 1, 0), dtype=np.int64)
    metric = np.zeros((n_frames, 1))
    acc = np.zeros((n_frames, 1, n), dtype=complex)
    fr = np.arange(n_frames)[:, None]
    for k in range(n):
        cand = (metric[:, :, None] + branch(k, acc[:, :, k])).reshape(n_frames, -1)
        sel = _select(cand, survivors)
        last = k == n - 1
        if sel is None:
            width = cand.shape[1]
            sym = np.tile(np.arange(q), width // q)
            metric = cand
            paths = np.concatenate(
                [np.repeat(paths, q, axis=1), np.broadcast_to(sym[None, :, None], (n_frames, width, 1))],
                axis=2)
            if not last:
                acc = np.repeat(acc, q, axis=1) + points[sym][None, :, None] * basis[:, k]
        else:
            parent, sym = np.divmod(sel, q)
            metric = cand[fr, sel]
            paths = np.concatenate([paths[fr, parent], sym[..., None]], axis=2)
            if not last:
                acc = acc[fr, parent] + points[sym][..., None] * basis[:, k]
    return paths, metric


def detect_indices(z, gram, points, survivors: int, sigma_hat=1.0, order: str = "ascending") -> np.ndarray:
    """Batched M-algorithm detection of one band.

    Parameters
    ----------
    z : ndarray, shape (F, n)
        Soft values after the inverse precoder, one row per block.
    gram : ndarray, shape (n, n)
        Interference matrix ``A^H A``.
    points : ndarray, shape (Q,)
        Alphabet in label order.
    survivors : int
        Paths kept per stage; ``Q**n`` or more is exhaustive search.
    sigma_hat : float
        Per-position noise variance of the band.
    order : {"ascending", "descending"}
        Symbol position processing order.

    Returns
    -------
    ndarray of int, shape (F, n)
        Point index per position.

    Notes
    -----
    The returned path always minimizes ``s^H G s - 2 Re(s^H z)``, which is
    ``||y - A s||^2 - ||y||^2``, over the paths that survive.

    Exhaustive search and the interference-free case (``G = I``) accumulate
    this exact metric position by position (Ungerboeck form). Otherwise
    partial paths are ranked by the MMSE-whitened metric
    ``||R s - w||^2`` with ``R^H R = G + delta I`` and ``R^H w = z``
    (``delta = WHITEN_DELTA``), whose increments are non-negative so paths
    of equal length compare fairly. The winner among the final survivors is then chosen by the
    exact metric.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    n_frames, n = z.shape
    q = points.size
    width = min(survivors, q ** n) * q * n
    if n_frames > 1 and n_frames * width > CHUNK_ELEMENTS:
        step = max(1, CHUNK_ELEMENTS // width)
        sig = np.broadcast_to(np.asarray(sigma_hat, dtype=float), (n_frames,)) \
            if np.ndim(sigma_hat) else sigma_hat
        return np.concatenate([
            detect_indices(z[i:i + step], gram, points, survivors,
                           sig[i:i + step] if np.ndim(sig) else sig, order)
            for i in range(0, n_frames, step)])
    perm = np.arange(n) if order == "ascending" else np.arange(n)[::-1]
    z = z[:, perm]
    gram = np.asarray(gram)[np.ix_(perm, perm)]
    exhaustive = survivors >= q ** n
    div = np.where(np.asarray(sigma_hat, dtype=float) > 0, sigma_hat, 1.0)
    div = np.broadcast_to(div, (n_frames,))[:, None, None]
    energy = np.abs(points) ** 2
    conj_pts = np.conj(points)

    if exhaustive or np.array_equal(gram, np.eye(n)):
        diag = np.real(np.diag(gram))

        def exact_branch(k, acc_k):
            inc = energy * diag[k] - 2.0 * (conj_pts * z[:, k, None, None]).real \
                + 2.0 * (conj_pts * acc_k[..., None]).real
            return inc / div

        paths, metric = _tree_search(z, gram, points, survivors, exact_branch)
    else:
        r = _whitening_factor(gram.tobytes(), n)
        w = np.linalg.solve(r.conj().T, z.T).T

        def whitened_branch(k, acc_k):
            resid = (w[:, k, None] - acc_k)[..., None] - r[k, k] * points
            return np.abs(resid) ** 2 / div

        paths, _ = _tree_search(z, r, points, survivors, whitened_branch)
        s = points[paths]
        metric = np.einsum("fci,fci->fc", s.conj(), s @ gram.T).real \
            - 2.0 * np.einsum("fci,fi->fc", s.conj(), z).real
    best = _first_minimum(metric)
    chosen = paths[np.arange(n_frames), best]
    out = np.empty_like(chosen)
    out[:, perm] = chosen
    return out


def viterbi_detect(z, nom: NomMatrix, sigma_hat, c: Constellation, survivors: Optional[int] = None,
                   exhaustive: bool = False, order: str = "ascending"):
    """Detect the ``n`` symbols of one band (or a batch of blocks).

    Returns ``(symbols, bits)``; for a 1-D ``z`` these are a length-``n``
    symbol vector and its bit stream, for an ``(F, n)`` batch ``(F, n)``
    symbols and ``(F, n * log2 Q)`` bits.
    """
    if c.order < 1 or c.points.size == 0:
        raise ConfigurationError("empty constellation alphabet")
    if survivors is None:
        survivors = c.order
    if survivors < 1:
        raise ConfigurationError(f"survivor count must be >= 1, got {survivors}")
    if exhaustive:
        survivors = c.order ** nom.n
    z = np.asarray(z)
    single = z.ndim == 1
    idx = detect_indices(np.atleast_2d(z), nom.gram, c.points, survivors, sigma_hat, order)
    symbols = c.points[idx]
    bits = c.labels[idx].reshape(idx.shape[0], -1)
    if single:
        return symbols[0], bits[0]
    return symbols, bits


def count_errors(tx_bits, rx_bits, plan: BandPlan) -> BerReport:
    """Per-band and aggregate bit errors for block-major bit streams."""
    tx = np.asarray(tx_bits, dtype=np.uint8).ravel()
    rx = np.asarray(rx_bits, dtype=np.uint8).ravel()
    if tx.size != rx.size:
        raise FramingError(f"bit streams differ in length: {tx.size} vs {rx.size}")
    per_block = plan.bits_per_block
    if per_block == 0 or tx.size % per_block:
        raise FramingError(f"{tx.size} bits is not a whole number of {per_block}-bit blocks")
    diff = (tx != rx).reshape(-1, per_block)
    n_blocks = diff.shape[0]
    errors, bits = [], []
    for sl in plan.bit_slices():
        errors.append(int(diff[:, sl].sum()))
        bits.append((sl.stop - sl.start) * n_blocks)
    return BerReport(tuple(errors), tuple(bits))
