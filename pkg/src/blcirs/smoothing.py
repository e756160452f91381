"""Block residual smoothing schemes.

Four schemes share one stepping interface:

* simple residual smoothing (SRS): an observer that never feeds back into the
  primary iteration;
* cross-interactive residual smoothing (CIRS) in its plain form, which keeps a
  raw auxiliary block V;
* CIRS with per-step orthonormalization of V (the numerically robust form);
* a global CIRS variant whose smoothing parameter is a scalar instead of an
  s-by-s matrix.

Each cross-interactive step consumes the primary increment ``p_tilde``
(x_{k+1} - x_k of the primary method), performs exactly one multiplication by
A, updates the smoothed pair (y, s_res), and returns reconstructed primary
iterates for the solver to continue from.
"""

from dataclasses import dataclass

import numpy as np

from .errors import Breakdown
from .kernels import (add_scaled, frobenius_inner, frobenius_norm,
                      gemm_block_small, spmm, zeros_block)
from .qr import least_squares_eta, thin_qr

__all__ = [
    "SmootherState",
    "SmoothStepResult",
    "new_state",
    "srs_step",
    "cirs_underlying_step",
    "cirs_ortho_step",
    "gl_cirs_step",
    "SrsSmoother",
    "CirsSmoother",
    "CirsOrthoSmoother",
    "GlCirsSmoother",
]


@dataclass
class SmootherState:
    """Mutable per-run smoothing state.

    ``y``/``s_res`` hold the smoothed approximation and residual; ``v`` the
    auxiliary block of the plain/global cross-interactive forms; ``q_tilde``
    and ``zeta`` belong to the orthonormalized form; ``eta`` (matrix) and
    ``eta_scalar`` hold the most recent smoothing parameter.
    """

    y: np.ndarray
    s_res: np.ndarray
    v: np.ndarray
    q_tilde: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    eta_scalar: float = 0.0
    k: int = 0


def new_state(x0, r0):
    """Initial state: y = X0, s_res = R0, auxiliaries zeroed."""
    n, s = r0.shape
    return SmootherState(
        y=np.array(x0, dtype=np.float64, order="F"),
        s_res=np.array(r0, dtype=np.float64, order="F"),
        v=zeros_block(n, s),
        q_tilde=zeros_block(n, s),
        eta=np.zeros((s, s)),
        zeta=np.zeros((s, s)),
    )


@dataclass
class SmoothStepResult:
    """Primary pair returned to the solver after one smoothing step."""

    x_next: np.ndarray
    r_next: np.ndarray
    eta_norm: float


def srs_step(state, x_k, r_k):
    """Simple residual smoothing update from the primary pair (x_k, r_k).

    With e = r_k - s_res, the parameter eta = -(e.T e)^{-1} (e.T s_res)
    minimizes the smoothed residual norm, which therefore never exceeds
    min(||r_k||, ||s_res||) up to roundoff.  Raises :class:`Breakdown` when
    e.T e is numerically singular (e rank deficient, e.g. r_k == s_res).
    """
    e = r_k - state.s_res
    eta = -least_squares_eta(e, state.s_res)
    state.y = state.y + gemm_block_small(x_k - state.y, eta)
    state.s_res = state.s_res + gemm_block_small(e, eta)
    state.eta = eta
    state.k += 1


def cirs_underlying_step(state, p_tilde, a):
    """Plain cross-interactive step (no orthonormalization).

    Updates v = v (I - eta_prev) + p_tilde, forms u = A v explicitly, picks
    eta minimizing ||s_res - u eta||, advances (y, s_res), and returns the
    reconstructed primary pair x = y + v (I - eta), r = s_res - u (I - eta).
    """
    s = p_tilde.shape[1]
    i_s = np.eye(s)
    v = gemm_block_small(state.v, i_s - state.eta) + p_tilde
    u = spmm(a, v)
    eta = least_squares_eta(u, state.s_res)
    state.y = state.y + gemm_block_small(v, eta)
    state.s_res = state.s_res - gemm_block_small(u, eta)
    comp = i_s - eta
    x_next = state.y + gemm_block_small(v, comp)
    r_next = state.s_res - gemm_block_small(u, comp)
    state.v = v
    state.eta = eta
    state.k += 1
    return SmoothStepResult(x_next, r_next, frobenius_norm(eta))


def cirs_ortho_step(state, p_tilde, a):
    """Cross-interactive step with orthonormalized auxiliary block.

    The auxiliary block v = q_tilde zeta + p_tilde is refactorized as
    q_tilde xi by thin QR each step, so the smoothed pair is advanced along
    a column-orthonormal direction; zeta = xi - eta carries the remainder to
    the next step.  Raises :class:`RankDeficient` when v loses column rank
    and :class:`Breakdown` when the projected system is singular.
    """
    v = gemm_block_small(state.q_tilde, state.zeta) + p_tilde
    fac = thin_qr(v)
    u = spmm(a, fac.q)
    eta = least_squares_eta(u, state.s_res)
    state.y = state.y + gemm_block_small(fac.q, eta)
    state.s_res = state.s_res - gemm_block_small(u, eta)
    zeta = fac.xi - eta
    x_next = state.y + gemm_block_small(fac.q, zeta)
    r_next = state.s_res - gemm_block_small(u, zeta)
    state.q_tilde = fac.q
    state.zeta = zeta
    state.eta = eta
    state.k += 1
    return SmoothStepResult(x_next, r_next, frobenius_norm(eta))


def gl_cirs_step(state, p_tilde, a):
    """Global cross-interactive step: scalar smoothing parameter.

    Identical to :func:`cirs_underlying_step` except the parameter is the
    scalar <u, s_res>_F / <u, u>_F minimizing ||s_res - eta u||, and the
    (I - eta) factors become (1 - eta).
    """
    v = (1.0 - state.eta_scalar) * state.v + p_tilde
    u = spmm(a, v)
    uu = frobenius_inner(u, u)
    if uu == 0.0:
        raise Breakdown("global smoothing parameter undefined: <u, u> = 0")
    eta = frobenius_inner(u, state.s_res) / uu
    state.y = add_scaled(state.y, v, eta)
    state.s_res = add_scaled(state.s_res, u, -eta)
    comp = 1.0 - eta
    x_next = add_scaled(state.y, v, comp)
    r_next = add_scaled(state.s_res, u, -comp)
    state.v = v
    state.eta_scalar = eta
    state.k += 1
    return SmoothStepResult(x_next, r_next, abs(eta) * np.sqrt(p_tilde.shape[1]))


class SrsSmoother:
    """Observer smoothing: consumes primary pairs, never alters them.

    ``observe`` takes the primary pair directly.  ``step`` adapts SRS to the
    common increment interface by reconstructing the primary pair internally
    (x += p_tilde, r -= A p_tilde; one multiplication by A) and returning it
    unchanged.
    """

    def __init__(self, x0, r0):
        self.state = new_state(x0, r0)
        self._x = np.array(x0, dtype=np.float64, order="F")
        self._r = np.array(r0, dtype=np.float64, order="F")

    def observe(self, x_k, r_k):
        srs_step(self.state, x_k, r_k)

    def step(self, p_tilde, a):
        self._x = self._x + p_tilde
        self._r = self._r - spmm(a, p_tilde)
        srs_step(self.state, self._x, self._r)
        return SmoothStepResult(self._x, self._r, frobenius_norm(self.state.eta))


class CirsSmoother:
    def __init__(self, x0, r0):
        self.state = new_state(x0, r0)

    def step(self, p_tilde, a):
        return cirs_underlying_step(self.state, p_tilde, a)


class CirsOrthoSmoother:
    def __init__(self, x0, r0):
        self.state = new_state(x0, r0)

    def step(self, p_tilde, a):
        return cirs_ortho_step(self.state, p_tilde, a)


class GlCirsSmoother:
    def __init__(self, x0, r0):
        self.state = new_state(x0, r0)

    def step(self, p_tilde, a):
        return gl_cirs_step(self.state, p_tilde, a)
