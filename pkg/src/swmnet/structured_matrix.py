"""Block-circulant weight matrices and their FFT-based matrix-vector product.

An ``m x n`` matrix is split into a ``p x q`` grid of ``k x k`` circulant
blocks. Block ``(i, j)`` is generated by one length-``k`` vector ``w`` using the
first-column convention ``B[r, c] = w[(r - c) mod k]``, so that

    B @ x == ifft(fft(w) * fft(x))

holds exactly (circular convolution). Dimensions that are not multiples of
``k`` are zero-padded up to the next multiple; logical ``m`` and ``n`` are kept
and outputs are truncated back to ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from swmnet.errors import DimensionError, NumericalError, SizeError
from swmnet.fft_core import fft, ifft, is_power_of_two

# absolute floor for the imaginary-residue check after the inverse transform
IMAG_RESIDUE_TOL = 1e-9


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _circulant_index(k: int) -> np.ndarray:
    r = np.arange(k)
    return (r[:, None] - r[None, :]) % k


@dataclass(eq=False)
class BlockCirculantMatrix:
    """A ``p x q`` grid of ``k x k`` circulant blocks.

    ``vectors`` has shape ``(p, q, k)`` with ``p = ceil(m / k)`` and
    ``q = ceil(n / k)``. ``spectra`` caches ``fft(vectors)`` once computed.
    """

    m: int
    n: int
    k: int
    vectors: np.ndarray
    spectra: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.vectors.shape[0]

    @property
    def q(self) -> int:
        return self.vectors.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def padded_shape(self) -> tuple[int, int]:
        return (self.p * self.k, self.q * self.k)

    @property
    def stored_weights(self) -> int:
        return self.p * self.q * self.k

    def __matmul__(self, x):
        return matvec_fft(self, x)


def from_defining_vectors(vectors, m: int, n: int, k: int) -> BlockCirculantMatrix:
    """Wrap a ``(p, q, k)`` array of defining vectors as a matrix.

    Raises
    ------
    SizeError
        ``k`` is not a power of two.
    DimensionError
        ``m`` or ``n`` is not positive, or ``vectors`` is not shaped
        ``(ceil(m/k), ceil(n/k), k)``.
    """
    if not is_power_of_two(k):
        raise SizeError(f"block size k must be a power of two, got {k!r}")
    if m < 1 or n < 1:
        raise DimensionError(f"matrix dimensions must be positive, got {m}x{n}")
    w = np.array(vectors, dtype=np.float64)
    expected = (_ceil_div(m, k), _ceil_div(n, k), k)
    if w.shape != expected:
        raise DimensionError(
            f"defining vectors for a {m}x{n} matrix with k={k} must have shape "
            f"{expected}, got {w.shape}"
        )
    if not np.all(np.isfinite(w)):
        raise NumericalError("defining vectors contain non-finite values")
    w.setflags(write=False)
    return BlockCirculantMatrix(m=int(m), n=int(n), k=int(k), vectors=w)


def expand_to_dense(M: BlockCirculantMatrix) -> np.ndarray:
    """Materialise the logical ``m x n`` dense matrix."""
    k = M.k
    blocks = M.vectors[:, :, _circulant_index(k)]  # (p, q, k, k)
    dense = blocks.transpose(0, 2, 1, 3).reshape(M.p * k, M.q * k)
    return np.ascontiguousarray(dense[: M.m, : M.n])


def _partition(M: BlockCirculantMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != M.n:
        raise DimensionError(f"expected input of length {M.n}, got shape {x.shape}")
    pad = M.q * M.k - M.n
    if pad:
        x = np.concatenate((x, np.zeros(x.shape[:-1] + (pad,))), axis=-1)
    return x.reshape(x.shape[:-1] + (M.q, M.k))


def _unpartition(M: BlockCirculantMatrix, a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[:-2] + (M.p * M.k,))[..., : M.m]


def matvec_direct(M: BlockCirculantMatrix, x) -> np.ndarray:
    """Time-domain product: sums circular convolutions shift by shift, no FFT.

    Accepts ``x`` of shape ``(..., n)``.
    """
    xb = _partition(M, x)  # (..., q, k)
    out = np.zeros(xb.shape[:-2] + (M.p, M.k))
    for s in range(M.k):
        # a_i[r] += sum_j w_ij[s] * x_j[(r - s) mod k]
        out += np.einsum("pq,...qk->...pk", M.vectors[:, :, s], np.roll(xb, s, axis=-1))
    return _unpartition(M, out)


def precompute_spectra(M: BlockCirculantMatrix) -> BlockCirculantMatrix:
    """Cache ``fft`` of every defining vector on ``M`` (idempotent) and return it."""
    if M.spectra is None:
        spectra = fft(M.vectors)
        spectra.setflags(write=False)
        M.spectra = spectra
    return M


def matvec_fft(M: BlockCirculantMatrix, x) -> np.ndarray:
    """``a_i = sum_j ifft(fft(w_ij) * fft(x_j))`` over all block rows ``i``.

    Performs ``q`` forward transforms of the input segments, ``p*q``
    elementwise spectrum products and ``p`` inverse transforms. Accepts ``x``
    of shape ``(..., n)``.
    """
    xb = _partition(M, x)
    spectra = precompute_spectra(M).spectra
    X = fft(xb)  # (..., q, k)
    acc = np.zeros(X.shape[:-2] + (M.p, M.k), dtype=np.complex128)
    # fixed summation order over j keeps results bit-reproducible
    for j in range(M.q):
        acc += spectra[:, j, :] * X[..., j, None, :]
    a = ifft(acc)
    residue = np.max(np.abs(a.imag), initial=0.0)
    scale = max(1.0, float(np.max(np.abs(a.real), initial=0.0)))
    if residue > IMAG_RESIDUE_TOL * scale:
        raise NumericalError(f"inverse FFT left an imaginary residue of {residue:.3e}")
    return _unpartition(M, a.real)


def project_dense_to_circulant(D, k: int) -> BlockCirculantMatrix:
    """Frobenius-nearest block-circulant matrix to a dense ``D``.

    Each block is replaced by the circulant whose diagonal ``d`` is the mean
    of the block's entries ``B[r, (r - d) mod k]``. ``D`` is zero-padded when
    ``k`` does not divide its dimensions.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.size == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {D.shape}")
    if not is_power_of_two(k):
        raise SizeError(f"block size k must be a power of two, got {k!r}")
    m, n = D.shape
    p, q = _ceil_div(m, k), _ceil_div(n, k)
    padded = np.zeros((p * k, q * k))
    padded[:m, :n] = D
    blocks = padded.reshape(p, k, q, k).transpose(0, 2, 1, 3)  # (p, q, r, c)
    r = np.arange(k)
    cols = (r[None, :] - r[:, None]) % k  # cols[d, r] = (r - d) mod k
    diagonals = blocks[:, :, r[None, :], cols]  # (p, q, d, r)
    # centre on the first entry so an already-circulant block is reproduced bit-exactly
    first = diagonals[..., :1]
    vectors = first[..., 0] + (diagonals - first).mean(axis=-1)
    return from_defining_vectors(vectors, m, n, k)


def storage_stats(M: BlockCirculantMatrix) -> dict:
    """Stored vs dense weight counts; the ratio equals ``k`` for divisible shapes."""
    stored = M.stored_weights
    dense = M.m * M.n
    return {
        "stored_weights": stored,
        "dense_weights": dense,
        "compression_ratio": dense / stored,
    }


def apply_weights(W, x) -> np.ndarray:
    """Multiply by either a dense ndarray or a :class:`BlockCirculantMatrix`."""
    if isinstance(W, BlockCirculantMatrix):
        return matvec_fft(W, x)
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != W.shape[1:]:
        raise DimensionError(f"cannot multiply {W.shape} matrix by input of shape {x.shape}")
    return x @ W.T


def weight_shape(W) -> tuple[int, int]:
    if isinstance(W, BlockCirculantMatrix):
        return W.shape
    return tuple(np.shape(W))


def to_dense(W) -> np.ndarray:
    if isinstance(W, BlockCirculantMatrix):
        return expand_to_dense(W)
    return np.asarray(W, dtype=np.float64)


def relative_error(a, b) -> float:
    """``max|a - b| / max|b|`` (plain max abs difference when ``b`` is all zeros)."""
    a = np.asarray(a)
    b = np.asarray(b)
    diff = float(np.max(np.abs(a - b), initial=0.0))
    scale = float(np.max(np.abs(b), initial=0.0))
    return diff / scale if scale > 0 else diff
