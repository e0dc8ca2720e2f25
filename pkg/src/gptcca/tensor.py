"""Dense tensors, CP decompositions and the multilinear algebra around them.

Storage is row-major (last index fastest) everywhere. Mode indices are
0-based. The mode-``t`` unfolding keeps the remaining modes in ascending
order with the last one varying fastest, and the Khatri-Rao product lets
the earlier factor vary slower, so that

    unfold(cp_to_tensor(cp), 0) == U0 @ diag(w) @ khatri_rao_chain(U1, ..., Um).T

holds exactly.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import InputError, ShapeError

MAGIC = b"TNSR"
FORMAT_VERSION = 1


class DenseTensor:
    """An m-way real array of float64 stored in row-major order.

    Parameters
    ----------
    data : array_like
        Anything :func:`numpy.asarray` accepts, with at least one axis and
        no zero-length axis.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim < 1:
            raise ShapeError("a tensor needs order >= 1")
        arr = np.ascontiguousarray(arr)
        if any(n < 1 for n in arr.shape):
            raise ShapeError(f"every dimension must be >= 1, got {arr.shape}")
        self._data = arr

    @classmethod
    def from_flat(cls, shape: Sequence[int], values) -> "DenseTensor":
        values = np.asarray(values, dtype=np.float64).ravel()
        shape = tuple(int(n) for n in shape)
        if values.size != int(np.prod(shape)):
            raise ShapeError(
                f"{values.size} values do not fill a tensor of shape {shape}"
            )
        return cls(values.reshape(shape))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(tuple(shape)))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def order(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def ravel(self) -> np.ndarray:
        """Entries in row-major order."""
        return self._data.ravel()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __mul__(self, c):
        return DenseTensor(self._data * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return DenseTensor(self._data + as_array(other))

    def __sub__(self, other):
        return DenseTensor(self._data - as_array(other))

    def __repr__(self):
        return f"DenseTensor(shape={self.shape})"


def as_array(T) -> np.ndarray:
    """Return the float64 ndarray behind a tensor-like object."""
    if isinstance(T, DenseTensor):
        return T.data
    return np.asarray(T, dtype=np.float64)


def as_tensor(T) -> DenseTensor:
    return T if isinstance(T, DenseTensor) else DenseTensor(T)


@dataclass(frozen=True)
class CPDecomposition:
    """Sum of ``rank`` weighted rank-1 terms.

    ``factors[j]`` has shape ``(n_j, rank)``; column ``s`` of each factor
    holds the vectors of term ``s``. ``weights`` defaults to all ones.
    """

    factors: tuple
    weights: np.ndarray

    def __init__(self, factors, weights=None):
        mats = tuple(np.array(U, dtype=np.float64, ndmin=2) for U in factors)
        if not mats:
            raise ShapeError("a CP decomposition needs at least one factor")
        r = mats[0].shape[1]
        for j, U in enumerate(mats):
            if U.ndim != 2 or U.shape[1] != r:
                raise ShapeError(
                    f"factor {j} has shape {U.shape}, expected (n_{j}, {r})"
                )
        if weights is None:
            w = np.ones(r)
        else:
            w = np.array(weights, dtype=np.float64).ravel()
        if w.shape != (r,):
            raise ShapeError(f"expected {r} weights, got {w.size}")
        object.__setattr__(self, "factors", mats)
        object.__setattr__(self, "weights", w)

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    def with_weights(self, weights) -> "CPDecomposition":
        return CPDecomposition(self.factors, weights)


def khatri_rao(A, B) -> np.ndarray:
    """Column-wise Kronecker product of ``A`` (k x n) and ``B`` (p x n).

    Row ``i * p + q`` of the result is ``A[i] * B[q]``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError("khatri_rao expects two matrices")
    if A.shape[1] != B.shape[1]:
        raise ShapeError(
            f"column counts differ: {A.shape[1]} vs {B.shape[1]}"
        )
    k, n = A.shape
    p = B.shape[0]
    return (A[:, None, :] * B[None, :, :]).reshape(k * p, n)


def khatri_rao_chain(matrices: Sequence) -> np.ndarray:
    """``M0 ⊙ M1 ⊙ ... ⊙ Mk`` with the earliest matrix varying slowest."""
    if len(matrices) == 0:
        raise ShapeError("khatri_rao_chain needs at least one matrix")
    return reduce(khatri_rao, matrices[1:], np.asarray(matrices[0], dtype=np.float64))


def unfold(T, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization, shape ``(n_mode, prod of the others)``."""
    X = as_array(T)
    _check_mode(X.ndim, mode)
    return np.moveaxis(X, mode, 0).reshape(X.shape[mode], -1)


def fold(M, mode: int, shape: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    _check_mode(len(shape), mode)
    M = np.asarray(M, dtype=np.float64)
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    if M.size != int(np.prod(shape)) or M.shape[0] != shape[mode]:
        raise ShapeError(f"matrix of shape {M.shape} cannot fold into {shape}")
    return DenseTensor(np.moveaxis(M.reshape(moved), 0, mode))


def mode_product(T, V, mode: int) -> DenseTensor:
    """Multiply every mode-``mode`` fiber of ``T`` by ``V``.

    ``V`` is a ``p x n_mode`` matrix. A 1-D vector or a single-row matrix
    contracts the mode away, so the order drops by one (unless ``T`` is
    already a vector, in which case a length-1 tensor is returned).
    """
    X = as_array(T)
    _check_mode(X.ndim, mode)
    V = np.asarray(V, dtype=np.float64)
    drop = V.ndim == 1 or (V.ndim == 2 and V.shape[0] == 1)
    V2 = V.reshape(1, -1) if V.ndim == 1 else V
    if V2.ndim != 2 or V2.shape[1] != X.shape[mode]:
        raise ShapeError(
            f"matrix with {V2.shape[-1]} columns cannot act on mode {mode} "
            f"of size {X.shape[mode]}"
        )
    out = np.moveaxis(np.tensordot(V2, X, axes=(1, mode)), 0, mode)
    if drop and X.ndim > 1:
        out = out.reshape(X.shape[:mode] + X.shape[mode + 1:])
    return DenseTensor(out)


def multilinear_form(T, vectors: Sequence) -> float:
    """Contract every mode of ``T`` with the matching vector."""
    X = as_array(T)
    if len(vectors) != X.ndim:
        raise ShapeError(f"need {X.ndim} vectors, got {len(vectors)}")
    for v in reversed(vectors):
        X = X @ np.asarray(v, dtype=np.float64)
    return float(X)


def outer(*vectors) -> DenseTensor:
    """Outer product ``v1 ⊗ v2 ⊗ ... ⊗ vm``."""
    out = np.asarray(vectors[0], dtype=np.float64)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=np.float64))
    return DenseTensor(out)


def cp_to_tensor(cp: CPDecomposition, shape: Sequence[int] | None = None) -> DenseTensor:
    """Evaluate ``sum_s w_s u^{s,1} ⊗ ... ⊗ u^{s,m}``."""
    if shape is not None and tuple(shape) != cp.shape:
        raise ShapeError(
            f"factor row counts {cp.shape} do not match declared shape {tuple(shape)}"
        )
    U0 = cp.factors[0] * cp.weights
    if cp.order == 1:
        return DenseTensor(U0.sum(axis=1))
    X0 = U0 @ khatri_rao_chain(cp.factors[1:]).T
    return DenseTensor(X0.reshape(cp.shape))


def hs_norm(T) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(as_array(T).ravel()))


def relative_residual(T, cp: CPDecomposition) -> float:
    X = as_array(T)
    if X.shape != cp.shape:
        raise ShapeError(f"tensor shape {X.shape} vs CP shape {cp.shape}")
    diff = X - cp_to_tensor(cp).data
    return hs_norm(diff) / max(hs_norm(X), np.finfo(np.float64).tiny)


def _check_mode(order: int, mode: int) -> None:
    if not 0 <= mode < order:
        raise ShapeError(f"mode {mode} out of range for order {order}")


# -- binary file format -----------------------------------------------------

class TensorFormatError(InputError):
    """The byte stream is not a valid tensor file."""


def tensor_to_bytes(T) -> bytes:
    X = as_array(T)
    header = MAGIC + bytes([FORMAT_VERSION]) + struct.pack("<I", X.ndim)
    header += struct.pack(f"<{X.ndim}I", *X.shape)
    return header + np.ascontiguousarray(X, dtype="<f8").tobytes()


def tensor_from_bytes(buf: bytes) -> DenseTensor:
    if len(buf) < 9:
        raise TensorFormatError("file too short for a tensor header", "header")
    if buf[:4] != MAGIC:
        raise TensorFormatError(f"bad magic bytes {buf[:4]!r}", "magic")
    if buf[4] != FORMAT_VERSION:
        raise TensorFormatError(f"unsupported version {buf[4]}", "version")
    (order,) = struct.unpack_from("<I", buf, 5)
    if order < 1:
        raise TensorFormatError("order must be >= 1", "order")
    offset = 9 + 4 * order
    if len(buf) < offset:
        raise TensorFormatError("truncated shape block", "shape")
    shape = struct.unpack_from(f"<{order}I", buf, 9)
    if any(n < 1 for n in shape):
        raise TensorFormatError(f"invalid shape {shape}", "shape")
    count = int(np.prod(shape, dtype=np.int64))
    if len(buf) - offset != 8 * count:
        raise TensorFormatError(
            f"expected {8 * count} data bytes, found {len(buf) - offset}", "data"
        )
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=offset)
    return DenseTensor(data.astype(np.float64).reshape(shape))


def write_tensor(path, T) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(T))


def read_tensor(path) -> DenseTensor:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise TensorFormatError(f"cannot read {path}: {exc}", "tensor_file") from exc
    return tensor_from_bytes(buf)
