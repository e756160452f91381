"""Thin Householder QR of tall blocks, small dense solves, and
orthonormality diagnostics.

The QR factor convention is pinned: the triangular factor has a nonnegative
diagonal, which makes the factorization unique and tests deterministic.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import Breakdown, DimensionMismatch, NonFiniteBlock, RankDeficient
from .kernels import UNIT_ROUNDOFF, frobenius_norm

__all__ = [
    "ThinQr",
    "thin_qr",
    "qf",
    "solve_small",
    "right_solve",
    "least_squares_eta",
    "orthonormality_departure",
]


@dataclass(frozen=True)
class ThinQr:
    """Thin QR factorization V = q @ xi.

    ``q`` is n-by-s with numerically orthonormal columns; ``xi`` is s-by-s
    upper triangular with nonnegative diagonal.
    """

    q: np.ndarray
    xi: np.ndarray


def thin_qr(v, rank_tol=None):
    """Householder-based thin QR of a tall block.

    Parameters
    ----------
    v : ndarray, shape (n, s) with n >= s
        Block to factorize; must be finite.
    rank_tol : float, optional
        Relative rank threshold.  Any diagonal entry of the triangular factor
        with magnitude <= rank_tol * ||V||_F signals :class:`RankDeficient`.
        Defaults to n * u.

    Returns
    -------
    ThinQr
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < v.shape[1] or v.shape[1] < 1:
        raise DimensionMismatch(f"thin QR needs a tall block, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise NonFiniteBlock("non-finite entries in QR input")
    n = v.shape[0]
    q, xi = np.linalg.qr(v, mode="reduced")
    signs = np.where(np.diagonal(xi) < 0.0, -1.0, 1.0)
    q = np.asfortranarray(q * signs)
    xi = signs[:, None] * xi
    tol = (n * UNIT_ROUNDOFF if rank_tol is None else rank_tol) * frobenius_norm(v)
    small = np.flatnonzero(np.abs(np.diagonal(xi)) <= tol)
    if small.size:
        col = int(small[0])
        raise RankDeficient(f"rank-deficient block: column {col} of the triangular "
                            f"factor has magnitude <= {tol:.3e}", column=col)
    return ThinQr(q, xi)


def qf(p, rank_tol=None):
    """Q-factor of the thin QR of ``p`` (see :func:`thin_qr`)."""
    return thin_qr(p, rank_tol=rank_tol).q


def solve_small(m, c, breakdown_tol=None):
    """Solve the small system M Z = C by LU with partial pivoting.

    Raises :class:`Breakdown` when any pivot magnitude falls at or below
    breakdown_tol * ||M||_F (default breakdown_tol = s * u), which signals a
    serious breakdown of the block method.
    """
    m = np.asarray(m, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch("small system matrix must be square")
    s = m.shape[0]
    if c.ndim != 2 or c.shape[0] != s:
        raise DimensionMismatch(f"right-hand side shape {c.shape} does not match order {s}")
    with warnings.catch_warnings():
        # Exact singularity surfaces through the pivot check below.
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    tol = (s * UNIT_ROUNDOFF if breakdown_tol is None else breakdown_tol) * frobenius_norm(m)
    pivmin = float(np.min(np.abs(np.diagonal(lu))))
    if pivmin <= tol:
        raise Breakdown(f"singular small system: pivot {pivmin:.3e} <= tolerance {tol:.3e}")
    return scipy.linalg.lu_solve((lu, piv), c, check_finite=False)


def right_solve(c, m, breakdown_tol=None):
    """Solve V' M = C for V' (i.e. M.T V'.T = C.T)."""
    if c.ndim != 2 or c.shape[1] != m.shape[0]:
        raise DimensionMismatch(f"right solve needs C with {m.shape[0]} columns, got {c.shape}")
    z = solve_small(np.ascontiguousarray(m.T), np.ascontiguousarray(c.T),
                    breakdown_tol=breakdown_tol)
    return np.asfortranarray(z.T)


def least_squares_eta(u, s_mat, breakdown_tol=None):
    """Least-squares coefficient minimizing ||S - U @ eta|| over s-by-s eta.

    Computed through the normal equations: form U.T U and U.T S and solve the
    small system.  Raises :class:`Breakdown` when U.T U is numerically
    singular (U rank deficient).
    """
    if u.shape != s_mat.shape:
        raise DimensionMismatch(f"shape mismatch: {u.shape} vs {s_mat.shape}")
    gram = u.T @ u
    rhs = u.T @ s_mat
    return solve_small(gram, rhs, breakdown_tol=breakdown_tol)


def orthonormality_departure(q):
    """Frobenius distance ||Q.T Q - I||, a computable orthonormality proxy.

    This measures the departure of the columns of Q from exact orthonormality
    and serves as the surrogate for the relative distance to the closest
    column-orthonormal matrix used by the general residual-gap bound (the
    exact distance is defined against an uncomputable full-QR factor).
    """
    if q.ndim != 2 or q.shape[0] < q.shape[1]:
        raise DimensionMismatch(f"expected a tall block, got shape {q.shape}")
    s = q.shape[1]
    return frobenius_norm(q.T @ q - np.eye(s))
