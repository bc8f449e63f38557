"""QAM allocation profiles, detector complexity accounting and Chow bit loading."""
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import AllocationError, ConfigurationError
from .modem import BandPlan
from .receiver import DetectorConfig

# QAM orders per sub-band at 3 bits/symbol on average
ALLOCATION_PROFILES: Dict[str, tuple] = {
    "1": (8,),
    "2": (16, 4),
    "3": (16, 8, 4),
    "4A": (16, 16, 4, 4),
    "4B": (16, 16, 8, 2),
    "5": (16, 16, 8, 4, 4),
}

MAX_BITS_PER_BIN = 4


def allocation_profile(l_bands, variant: str = "A", user_profiles: Optional[dict] = None) -> list:
    """QAM orders for ``l_bands`` sub-bands.

    ``l_bands`` may also be a key such as ``"4B"``. ``user_profiles`` maps
    extra keys (``str(l_bands)``) to QAM lists and takes precedence.
    """
    key = str(l_bands).strip().upper()
    if user_profiles and key in user_profiles:
        return list(user_profiles[key])
    if key == "4":
        key = "4" + variant.upper()
    if key not in ALLOCATION_PROFILES:
        raise ConfigurationError(f"no allocation profile for L={l_bands!r}; "
                                 f"known: {sorted(ALLOCATION_PROFILES)}")
    return list(ALLOCATION_PROFILES[key])


def viterbi_cm(n, c, q) -> Fraction:
    cq = c * q
    return Fraction((-30 - 90 * cq) + (59 + 25 * cq) * n + (45 * cq - 30) * n ** 2
                    + 20 * cq * n ** 3 + n ** 5, 30)


def viterbi_ca(n, c, q) -> Fraction:
    cq = c * q
    return Fraction((-30 - 30 * cq) + (59 - 20 * cq) * n + (30 * cq - 30) * n ** 2
                    + 20 * cq * n ** 3 + n ** 5, 30)


def complexity_exact(n: int, m: int, c: int, q: int):
    """Complex multiplications and additions of one band: precoder, inverse
    precoder and detector, as exact fractions."""
    cm = m * n + n * m + viterbi_cm(n, c, q)
    ca = m * (n - 1) + n * (m - 1) + viterbi_ca(n, c, q)
    return cm, ca


def complexity_approx(n: int, c: int, q: int):
    """Dominant-term count ``(20 C Q n^3 + n^5) / 30``, used for both CM and CA."""
    v = Fraction(20 * c * q * n ** 3 + n ** 5, 30)
    return v, v


@dataclass(frozen=True)
class ComplexityReport:
    cm_exact: Fraction
    ca_exact: Fraction
    cm_approx: Fraction
    ca_approx: Fraction
    reduction_cm: Fraction = Fraction(0)
    reduction_ca: Fraction = Fraction(0)
    reduction_cm_exact: Fraction = Fraction(0)
    reduction_ca_exact: Fraction = Fraction(0)

    @property
    def reduction_percent(self):
        """Headline (dominant-term) reductions in percent, two decimals."""
        return (round(float(self.reduction_cm) * 100, 2), round(float(self.reduction_ca) * 100, 2))


def plan_complexity(plan: BandPlan, det: Optional[DetectorConfig] = None):
    """Summed ``(cm_exact, ca_exact, cm_approx, ca_approx)`` over the plan's bands."""
    det = det or DetectorConfig()
    totals = [Fraction(0)] * 4
    for b, c in zip(plan.per_band, det.survivors(plan)):
        if b.q < 2:
            continue
        ex = complexity_exact(b.n, b.m, c, b.q)
        ap = complexity_approx(b.n, c, b.q)
        totals = [t + v for t, v in zip(totals, ex + ap)]
    return tuple(totals)


def complexity_reduction(plan: BandPlan, det: Optional[DetectorConfig], baseline: BandPlan,
                         baseline_det: Optional[DetectorConfig] = None) -> ComplexityReport:
    """Complexity of ``plan`` and its fractional saving against ``baseline``."""
    if plan.v_total != baseline.v_total:
        raise ConfigurationError(f"plans differ in V: {plan.v_total} vs {baseline.v_total}")
    cm_e, ca_e, cm_a, ca_a = plan_complexity(plan, det)
    bcm_e, bca_e, bcm_a, bca_a = plan_complexity(baseline, baseline_det)
    return ComplexityReport(cm_e, ca_e, cm_a, ca_a,
                            1 - cm_a / bcm_a, 1 - ca_a / bca_a,
                            1 - cm_e / bcm_e, 1 - ca_e / bca_e)


def chow_bitload(snr_db: Sequence[float], target_bits: int, gap_db: float = 3.0,
                 max_bits: int = MAX_BITS_PER_BIN, max_iter: int = 20) -> np.ndarray:
    """Chow-Cioffi-Bingham margin-adaptive loading with integer bits in ``[0, max_bits]``.

    The margin is adjusted until the rounded total matches ``target_bits``
    or ``max_iter`` passes elapse; the remainder is fixed greedily by adding
    bits where rounding lost the most (ties to the lower bin) and removing
    where it gained the most (ties to the higher bin).
    """
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    n_bins = snr.size
    if n_bins < 1:
        raise ConfigurationError("need at least one bin")
    if target_bits < 0:
        raise ConfigurationError(f"target_bits must be >= 0, got {target_bits}")
    if target_bits > max_bits * n_bins:
        raise AllocationError(f"target {target_bits} bits exceeds {max_bits} x {n_bins} bins")
    gap = 10.0 ** (gap_db / 10.0)
    margin_db = 0.0
    for _ in range(max_iter):
        b_real = np.log2(1.0 + snr / (gap * 10.0 ** (margin_db / 10.0)))
        b = np.clip(np.round(b_real), 0, max_bits).astype(int)
        total = int(b.sum())
        used = int(np.count_nonzero(b)) or n_bins
        if total == target_bits:
            break
        margin_db += 10.0 * np.log10(2.0) * (total - target_bits) / used
    diff = b_real - b
    total = int(b.sum())
    while total < target_bits:
        room = np.where(b < max_bits, diff, -np.inf)
        i = int(np.argmax(room))
        b[i] += 1
        diff[i] -= 1.0
        total += 1
    while total > target_bits:
        room = np.where(b > 0, diff, np.inf)
        i = n_bins - 1 - int(np.argmin(room[::-1]))
        b[i] -= 1
        diff[i] += 1.0
        total -= 1
    return b
