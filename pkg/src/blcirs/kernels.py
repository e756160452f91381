"""Deterministic dense-block and sparse CSR kernels underlying the solvers.

Blocks are plain float64 ndarrays of shape (n, s), stored column-major
(Fortran order) by the canonical constructors so per-column operations touch
contiguous memory.  Small matrices are (s, s) ndarrays.  All kernels leave
their inputs unmodified and return freshly allocated outputs.

Determinism contract: repeated invocation on identical inputs is bit-identical
within a process.  Sparse products accumulate row-wise in ascending column
order (sequential); dense reductions use a fixed column-major order.
"""

import math
import os

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NonFiniteBlock

# Dense kernels run on a single BLAS thread by default: reductions then have a
# fixed sequential order and runs are reproducible (and small-block operations
# avoid thread-sync overhead).  Set BLCIRS_BLAS_THREADS to opt in to threaded
# BLAS; results may then differ between runs at roundoff level.
try:
    import threadpoolctl

    _BLAS_LIMIT = threadpoolctl.threadpool_limits(
        limits=int(os.environ.get("BLCIRS_BLAS_THREADS", "1")), user_api="blas")
except (ImportError, ValueError):  # pragma: no cover - depends on environment
    _BLAS_LIMIT = None

__all__ = [
    "UNIT_ROUNDOFF",
    "CsrMatrix",
    "zeros_block",
    "as_block",
    "spmm",
    "spmm_transpose",
    "spmm_call_count",
    "reset_spmm_counter",
    "frobenius_inner",
    "frobenius_norm",
    "csr_frobenius_norm",
    "gemm_block_small",
    "add_scaled",
]

# Half the binary64 machine-epsilon spacing: 2^-53.
UNIT_ROUNDOFF = 2.0 ** -53

# Process-global instrumentation for A-multiplications.  Accurate per run as
# long as runs do not interleave on threads (a single run is single-threaded).
_SPMM_CALLS = 0


def spmm_call_count():
    """Total sparse multiplications performed so far in this process."""
    return _SPMM_CALLS


def reset_spmm_counter():
    global _SPMM_CALLS
    _SPMM_CALLS = 0


class CsrMatrix:
    """Square sparse matrix in compressed-sparse-row form.

    Parameters
    ----------
    n : int
        Row/column count.
    row_ptr : array_like of int, length n+1
        Row offsets; ``row_ptr[0] == 0`` and ``row_ptr[n] == nnz``.
    col_idx : array_like of int, length nnz
        Column indices, strictly increasing within each row, in ``[0, n)``.
    values : array_like of float, length nnz
        Nonzero values (binary64, finite).

    The structure is validated on construction and the arrays are frozen;
    ``m`` caches the maximum number of nonzeros per row.
    """

    __slots__ = ("n", "row_ptr", "col_idx", "values", "m", "_sp")

    def __init__(self, n, row_ptr, col_idx, values):
        n = int(n)
        if n < 1:
            raise DimensionMismatch("matrix order must be at least 1")
        row_ptr = np.array(row_ptr, dtype=np.int64)
        col_idx = np.array(col_idx, dtype=np.int64)
        values = np.array(values, dtype=np.float64)
        if row_ptr.shape != (n + 1,):
            raise DimensionMismatch("row_ptr must have length n+1")
        if row_ptr[0] != 0 or row_ptr[-1] != values.size:
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if col_idx.shape != values.shape:
            raise DimensionMismatch("col_idx and values must have equal length")
        counts = np.diff(row_ptr)
        if np.any(counts < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if values.size:
            if col_idx.min() < 0 or col_idx.max() >= n:
                raise ValueError("column index out of range")
            increasing = np.ones(values.size, dtype=bool)
            increasing[1:] = np.diff(col_idx) > 0
            # Decreases are only allowed at row starts.
            starts = row_ptr[1:-1]
            increasing[starts[starts < values.size]] = True
            if not increasing.all():
                raise ValueError("col_idx must be strictly increasing within each row")
            if not np.isfinite(values).all():
                raise NonFiniteBlock("matrix values must be finite")
        self.n = n
        self.row_ptr = row_ptr
        self.col_idx = col_idx
        self.values = values
        self.m = int(counts.max()) if n > 0 else 0
        for arr in (row_ptr, col_idx, values):
            arr.flags.writeable = False
        self._sp = sp.csr_matrix((values, col_idx, row_ptr), shape=(n, n), copy=False)
        self._sp.has_sorted_indices = True

    @property
    def nnz(self):
        return int(self.values.size)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    @classmethod
    def from_dense(cls, dense):
        """Build from a dense square array, dropping exact zeros."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise DimensionMismatch("dense input must be square")
        n = dense.shape[0]
        rows, cols = np.nonzero(dense)
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
        return cls(n, row_ptr, cols.astype(np.int64), dense[rows, cols])

    def to_dense(self):
        return self._sp.toarray()

    def __repr__(self):
        return f"CsrMatrix(n={self.n}, nnz={self.nnz}, m={self.m})"


def zeros_block(n, s):
    """Fresh all-zero n-by-s block (column-major)."""
    return np.zeros((n, s), dtype=np.float64, order="F")


def as_block(values):
    """Coerce to a float64 column-major block, validating dimensionality."""
    arr = np.asfortranarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch("a block must be two-dimensional")
    return arr


def _require_same_shape(x, y):
    if x.shape != y.shape:
        raise DimensionMismatch(f"shape mismatch: {x.shape} vs {y.shape}")


def spmm(a, x):
    """Sparse-times-block product ``A @ X``.

    Row-wise accumulation runs in ascending column-index order, so repeated
    calls are bit-identical.  Non-finite output entries signal overflow and
    raise :class:`NonFiniteBlock`.
    """
    global _SPMM_CALLS
    if x.ndim != 2 or x.shape[0] != a.n:
        raise DimensionMismatch(f"cannot multiply {a.n}x{a.n} matrix by block of shape {x.shape}")
    _SPMM_CALLS += 1
    out = np.asfortranarray(a._sp @ x)
    if not np.isfinite(out).all():
        raise NonFiniteBlock("non-finite entries in sparse product")
    return out


def spmm_transpose(a, x):
    """Transpose product ``A.T @ X`` (used once per run for the shadow block)."""
    global _SPMM_CALLS
    if x.ndim != 2 or x.shape[0] != a.n:
        raise DimensionMismatch(f"cannot multiply {a.n}x{a.n} transpose by block of shape {x.shape}")
    _SPMM_CALLS += 1
    out = np.asfortranarray(a._sp.T @ x)
    if not np.isfinite(out).all():
        raise NonFiniteBlock("non-finite entries in sparse transpose product")
    return out


def frobenius_inner(x, y):
    """Frobenius inner product tr(X.T Y), summed in column-major order."""
    _require_same_shape(x, y)
    return float(np.dot(x.ravel(order="F"), y.ravel(order="F")))


def frobenius_norm(x):
    """Frobenius norm sqrt(<X, X>_F)."""
    return math.sqrt(frobenius_inner(x, x))


def csr_frobenius_norm(a):
    """Frobenius norm of a CSR matrix, sqrt of the sum of squared nonzeros."""
    return math.sqrt(float(np.dot(a.values, a.values)))


def gemm_block_small(p, m):
    """Block-times-small product ``P @ M`` with M of order P.shape[1]."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch("small matrix must be square")
    if p.ndim != 2 or p.shape[1] != m.shape[0]:
        raise DimensionMismatch(f"cannot multiply block {p.shape} by small matrix {m.shape}")
    return p @ m


def add_scaled(x, y, c):
    """Linear update ``X + c*Y`` on equally shaped blocks."""
    _require_same_shape(x, y)
    return x + c * y
