"""Radix-2 decimation-in-time FFT with precomputed twiddle tables.

The transform is laid out as the classic butterfly network: a bit-reversal
permutation followed by log2(n) stages of 2-point butterflies. Every stage is
vectorised over the butterflies it contains and over any leading batch axes,
so ``fft`` operates on the last axis of an array of shape ``(..., n)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from swmnet.errors import DimensionError, NumericalError, SizeError


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@dataclass(frozen=True)
class TwiddleTable:
    """Twiddle factors ``exp(-2*pi*i*j/n)`` for ``j < n/2`` plus the bit-reversal map."""

    size: int
    factors: np.ndarray
    bitrev: np.ndarray

    def __len__(self) -> int:
        return len(self.factors)


def make_twiddle_table(n: int) -> TwiddleTable:
    """Build the twiddle table for an ``n``-point transform.

    Raises
    ------
    SizeError
        If ``n`` is not a power of two or is smaller than 2.
    """
    if not is_power_of_two(n) or n < 2:
        raise SizeError(f"FFT size must be a power of two >= 2, got {n!r}")
    n = int(n)
    j = np.arange(n // 2)
    angle = 2.0 * np.pi * j / n
    factors = np.cos(angle) - 1j * np.sin(angle)
    # exact values at the quarter points, so factor_0 is exactly 1 and n=4 gives -i
    factors[0] = 1.0 + 0.0j
    if n >= 4:
        factors[n // 4] = 0.0 - 1.0j
    factors.setflags(write=False)
    bitrev = _bit_reverse_indices(n)
    bitrev.setflags(write=False)
    return TwiddleTable(size=n, factors=factors, bitrev=bitrev)


@functools.lru_cache(maxsize=64)
def twiddle_table(n: int) -> TwiddleTable:
    """Shared, cached table for size ``n``."""
    return make_twiddle_table(n)


def _as_complex(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim == 0:
        raise DimensionError("FFT input must have at least one axis")
    arr = arr.astype(np.complex128, copy=True)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("FFT input contains non-finite values")
    return arr


def _butterflies(a: np.ndarray, table: TwiddleTable) -> np.ndarray:
    n = table.size
    batch = a.shape[:-1]
    a = a[..., table.bitrev]
    half = 1
    while half < n:
        span = 2 * half
        # stage twiddles W_span^j = W_n^(j * n/span)
        tw = table.factors[:: n // span][:half]
        blocks = a.reshape(batch + (n // span, 2, half))
        upper = blocks[..., 0, :]
        lower = blocks[..., 1, :] * tw
        a = np.concatenate((upper + lower, upper - lower), axis=-1).reshape(batch + (n,))
        half = span
    return a


def fft(x, table: TwiddleTable | None = None) -> np.ndarray:
    """Forward DFT along the last axis, ``X[m] = sum_j x[j] exp(-2 pi i j m / n)``.

    ``table`` defaults to the cached table for the input length. A length-1
    input is returned unchanged (as complex). The input is never modified.
    """
    a = _as_complex(x)
    n = a.shape[-1]
    if table is None:
        if n == 1:
            return a
        table = twiddle_table(n)
    if n != table.size:
        raise DimensionError(f"input length {n} does not match twiddle table size {table.size}")
    return _butterflies(a, table)


def ifft(X, table: TwiddleTable | None = None) -> np.ndarray:
    """Inverse DFT computed as ``conj(fft(conj(X))) / n`` on the forward kernel."""
    a = _as_complex(X)
    n = a.shape[-1]
    if table is None and n == 1:
        return a
    return np.conj(fft(np.conj(a), table)) / n


def naive_dft(x) -> np.ndarray:
    """Direct O(n^2) evaluation of the DFT sum; a test oracle for :func:`fft`."""
    a = _as_complex(x)
    n = a.shape[-1]
    if n == 0:
        raise DimensionError("DFT of an empty vector")
    jm = np.outer(np.arange(n), np.arange(n)) % n
    kernel = np.exp(-2j * np.pi * jm / n)
    return a @ kernel
