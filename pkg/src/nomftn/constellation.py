"""QAM alphabets with fixed bit labels, hard demapping and bit/symbol mapping.

Points are stored in label order: ``points[k]`` carries the label whose
integer value (MSB first) is ``k``. Every constellation is scaled to unit
average power.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FramingError

SUPPORTED_ORDERS = (2, 4, 8, 16)

# outer/inner ring radius ratio of the 4+4 circular 8QAM; equalizes the
# inner-inner and inner-outer minimum distances
RING_RATIO_8QAM = (1.0 + np.sqrt(3.0)) / np.sqrt(2.0)

# label of each 8QAM point, points listed as 4 inner (0, 90, 180, 270 deg)
# then 4 outer (45, 135, 225, 315 deg). Found by exhaustive search over
# the 12 minimum-distance edges: 16 total bit flips, the minimum possible.
_LABELS_8QAM = (0, 1, 2, 6, 5, 3, 7, 4)

_GRAY2 = (-1.0, 1.0)  # level for Gray pair 0, 1
_GRAY4 = (-3.0, -1.0, 3.0, 1.0)  # level for 2-bit Gray code 00, 01, 10, 11


@dataclass(frozen=True, eq=False)
class Constellation:
    """An immutable labeled QAM alphabet.

    Attributes
    ----------
    order : int
        Number of points Q.
    points : ndarray of complex, shape (Q,)
        Point ``k`` carries label ``k``.
    labels : ndarray of uint8, shape (Q, log2(Q))
        Bit pattern of each point, MSB first.
    """

    order: int
    points: np.ndarray
    labels: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return int(self.order).bit_length() - 1

    def __repr__(self):
        return f"Constellation(order={self.order})"


def _labels(order):
    k = int(order).bit_length() - 1
    idx = np.arange(order)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)


def _circular_8qam(ring_ratio):
    inner = np.exp(1j * np.pi / 2 * np.arange(4))
    outer = ring_ratio * np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    geometric = np.concatenate([inner, outer])
    points = np.empty(8, dtype=complex)
    points[list(_LABELS_8QAM)] = geometric
    return points


def build_constellation(order: int, ring_ratio: float = RING_RATIO_8QAM) -> Constellation:
    """Return the canonical unit-power constellation of the given order.

    2 is antipodal, 4 and 16 are square Gray-labeled QAM, 8 is the two-ring
    circular 8QAM (``ring_ratio`` sets outer/inner radius).
    """
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"unsupported constellation order Q={order!r}; "
                                 f"expected one of {SUPPORTED_ORDERS}")
    if order == 2:
        points = np.array([1.0, -1.0], dtype=complex)
    elif order == 4:
        # 00, 01, 11, 10 walk the quadrants counter-clockwise from 45 deg
        points = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j], dtype=complex)
    elif order == 8:
        points = _circular_8qam(ring_ratio)
    else:
        idx = np.arange(16)
        re = np.array(_GRAY4)[idx >> 2]
        im = np.array(_GRAY4)[idx & 3]
        points = re + 1j * im
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    points.setflags(write=False)
    labels = _labels(order)
    labels.setflags(write=False)
    return Constellation(order, points, labels)


_CACHE = {}


def get_constellation(order: int) -> Constellation:
    """Cached :func:`build_constellation` with the default geometry."""
    if order not in _CACHE:
        _CACHE[order] = build_constellation(order)
    return _CACHE[order]


def bits_to_indices(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = c.bits_per_symbol
    if bits.size % k:
        raise FramingError(f"{bits.size} bits is not a multiple of {k} bits/symbol (Q={c.order})")
    weights = 1 << np.arange(k - 1, -1, -1)
    return bits.reshape(-1, k) @ weights


def indices_to_bits(idx, c: Constellation) -> np.ndarray:
    return c.labels[np.asarray(idx)].reshape(-1)


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map consecutive ``log2(Q)``-bit groups to constellation points."""
    return c.points[bits_to_indices(bits, c)]


def nearest_index(y, c: Constellation) -> np.ndarray:
    """Index of the Euclidean-nearest point; ties go to the lowest index."""
    y = np.asarray(y)
    d = np.abs(y[..., None] - c.points) ** 2
    return np.argmin(d, axis=-1)


def demap_hard(y, c: Constellation) -> np.ndarray:
    """Hard decision bits for one symbol or an array of symbols.

    A scalar input returns the label (shape ``(log2 Q,)``); an array input
    returns the concatenated bit stream.
    """
    idx = nearest_index(y, c)
    if np.ndim(idx) == 0:
        return c.labels[int(idx)].copy()
    return indices_to_bits(idx, c)
