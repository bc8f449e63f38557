"""Orthogonal circulant transform (OCT) and its row-truncated non-orthogonal matrix.

The OCT is a circulant matrix whose first row is a Zadoff-Chu sequence
scaled by ``1/sqrt(n)``. Because a ZC sequence has a flat DFT magnitude the
circulant is unitary, and every entry has modulus ``1/sqrt(n)`` so each
symbol is spread evenly over all subcarriers of its band.
"""
from dataclasses import dataclass
from math import gcd
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, FramingError


def zadoff_chu(n: int, root: int = 1) -> np.ndarray:
    """Length-``n`` Zadoff-Chu sequence (unit modulus entries)."""
    if n < 1:
        raise ConfigurationError(f"sequence length must be >= 1, got {n}")
    if gcd(root, n) != 1:
        raise ConfigurationError(f"ZC root {root} is not coprime with length {n}")
    k = np.arange(n)
    if n % 2 == 0:
        phase = np.pi * root * k * k / n
    else:
        phase = np.pi * root * k * (k + 1) / n
    return np.exp(-1j * phase)


def circulant_from_row(row) -> np.ndarray:
    """Circulant matrix whose row ``k`` is ``row`` cyclically shifted right by ``k``."""
    row = np.asarray(row)
    n = row.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return row[idx]


def make_oct(n: int, generator: Optional[Callable[[int], np.ndarray]] = None) -> np.ndarray:
    """Unitary ``n x n`` circulant built from a CAZAC base sequence.

    ``generator(n)`` may supply an alternative unit-modulus CAZAC sequence;
    the default is the root-1 Zadoff-Chu sequence.
    """
    if n < 1:
        raise ConfigurationError(f"OCT size must be >= 1, got {n}")
    seq = zadoff_chu(n) if generator is None else np.asarray(generator(n), dtype=complex)
    return circulant_from_row(seq / np.sqrt(n))


@dataclass(frozen=True, eq=False)
class NomMatrix:
    """Row-truncated OCT used as the per-band precoder.

    Attributes
    ----------
    n, m : int
        Original and compressed subcarrier counts.
    entries : ndarray, shape (m, n)
        First ``m`` rows of the OCT.
    gram : ndarray, shape (n, n)
        ``entries^H @ entries``, an orthogonal projector of rank ``m``.
    """

    n: int
    m: int
    entries: np.ndarray
    gram: np.ndarray

    @property
    def alpha(self) -> float:
        return self.m / self.n

    def __repr__(self):
        return f"NomMatrix(n={self.n}, m={self.m})"


_NOM_CACHE = {}


def make_nom(n: int, m: int) -> NomMatrix:
    if not 1 <= m <= n:
        raise ConfigurationError(f"need 1 <= m <= n, got n={n}, m={m}")
    key = (n, m)
    if key not in _NOM_CACHE:
        entries = make_oct(n)[:m].copy()
        if m == n:
            gram = np.eye(n, dtype=complex)
        else:
            gram = entries.conj().T @ entries
        entries.setflags(write=False)
        gram.setflags(write=False)
        _NOM_CACHE[key] = NomMatrix(n, m, entries, gram)
    return _NOM_CACHE[key]


def precode(s, nom: NomMatrix) -> np.ndarray:
    """``entries @ s``. ``s`` may be a vector of length n or an (..., n) batch."""
    s = np.asarray(s)
    if s.shape[-1] != nom.n:
        raise FramingError(f"precode expects {nom.n} symbols, got {s.shape[-1]}")
    return s @ nom.entries.T


def inverse_precode(a, nom: NomMatrix) -> np.ndarray:
    """``entries^H @ a``; for ``a = precode(s) + w`` this is ``gram @ s + entries^H @ w``."""
    a = np.asarray(a)
    if a.shape[-1] != nom.m:
        raise FramingError(f"inverse_precode expects {nom.m} values, got {a.shape[-1]}")
    return a @ nom.entries.conj()
