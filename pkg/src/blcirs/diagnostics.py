"""Residual-gap measurement and rounding-error bound evaluators.

The residual gap of a recursively updated pair (X, R) is
``gap = ||(B - A X) - R||``; together with the triangle inequality

    ||gap|| - ||R||  <=  ||B - A X||  <=  ||gap|| + ||R||

it governs the attainable accuracy of the iteration.  Three a priori bounds
on the gap are evaluated against measured histories:

* ``bound_exact_ortho`` — valid when the direction Q-factors are exactly
  column-orthonormal (first-order in u, so domination is only reported);
* ``bound_householder`` — valid for Givens/Householder Q-factors under the
  dimension condition checked by :func:`check_householder_assumptions`;
* ``bound_general_q`` — valid for any orthonormalization process, fed with
  per-iteration Q-factor norms and departures.

All norms are Frobenius.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .errors import AssumptionViolated, DimensionMismatch
from .kernels import UNIT_ROUNDOFF, frobenius_norm, spmm

__all__ = [
    "ConvergenceRecord",
    "QrIterationData",
    "BoundInputs",
    "TauReport",
    "residual_gap",
    "true_residual_and_gap",
    "trr_holds",
    "gamma",
    "gamma_tilde",
    "bound_exact_ortho",
    "bound_householder",
    "check_householder_assumptions",
    "bound_general_q",
    "bound_inputs_from_records",
    "tau_sequence",
    "estimate_inv_norm",
]


@dataclass
class ConvergenceRecord:
    """Per-iteration norms, gaps, and instrumentation for one solver run.

    Relative quantities are scaled by ||B||.  ``true_*`` and ``gap_*`` fields
    are populated only on iterations where the explicit residual was measured
    (one extra multiplication by A each, excluded from ``spmm_count``).
    ``mid_*`` fields carry the first-half (BiCG-part) iterates of the
    two-part primary update, for multiplication-count-axis plots.
    """

    k: int
    spmm_count: int
    rel_r: float
    rel_s: float = None
    true_rel_r: float = None
    true_rel_s: float = None
    norm_x: float = None
    norm_y: float = None
    gap_r: float = None
    gap_s: float = None
    q_norm: float = None
    q_departure: float = None
    mid_rel_r: float = None
    mid_norm_x: float = None


@dataclass(frozen=True)
class QrIterationData:
    """Per-iteration inputs for the general-orthonormalization bound."""

    q_norm: float        # ||Q_hat_{i-1}||_F
    q_departure: float   # surrogate for the distance to exact orthonormality
    x_prev: float        # ||X_{i-1}||
    x_curr: float        # ||X_i||
    r_curr: float        # ||R_i||


@dataclass
class BoundInputs:
    """Everything the three gap bounds consume for one iteration index k."""

    k: int
    s: int
    m: int
    norm_a: float
    max_x: float                 # max over 0 < i <= k of ||X_i||
    max_r: float                 # max over 0 < i <= k of ||R_i||
    max_r_incl0: float           # max over 0 <= i <= k of ||R_i||
    u: float = UNIT_ROUNDOFF
    c: int = 2                   # small integer constant of the QR error model
    per_iter_q: list = field(default=None)


def residual_gap(a, b_mat, x, r):
    """Norm of (B - A X) - R, measured with one explicit multiplication."""
    return true_residual_and_gap(a, b_mat, x, r)[1]


def true_residual_and_gap(a, b_mat, x, r):
    """Return (||B - A X||, ||(B - A X) - R||) sharing one multiplication."""
    if b_mat.shape != x.shape or b_mat.shape != r.shape:
        raise DimensionMismatch("B, X, R must share one shape")
    explicit = b_mat - spmm(a, x)
    return frobenius_norm(explicit), frobenius_norm(explicit - r)


def trr_holds(gap, res_norm, true_norm, slack=4.0 * UNIT_ROUNDOFF):
    """Triangle sandwich ||gap|| - ||R|| <= ||B-AX|| <= ||gap|| + ||R||.

    Allows a relative slack (default 4u) for the rounding of the three norm
    evaluations themselves.
    """
    pad = slack * (gap + res_norm + true_norm)
    return (true_norm <= gap + res_norm + pad) and (true_norm >= gap - res_norm - pad)


def gamma(k, u=UNIT_ROUNDOFF):
    """Rounding-accumulation factor k u / (1 - k u); requires k u < 1."""
    if k < 0:
        raise ValueError("gamma needs a nonnegative integer")
    ku = k * u
    if ku >= 1.0:
        raise AssumptionViolated(f"gamma_{k} undefined: k*u = {ku:.3e} >= 1")
    return ku / (1.0 - ku)


def gamma_tilde(k, u=UNIT_ROUNDOFF, c=2):
    """QR error-model factor c k u / (1 - c k u) with small integer c > 1."""
    return gamma(c * k, u=u)


def bound_exact_ortho(inputs):
    """Gap bound under exactly orthonormal direction Q-factors.

    k (3 + 4 s sqrt(s) + 2 m sqrt(s)) u ||A|| max_{0<j<=k} ||X_j||
        + 3 (k+1) u max_{0<=j<=k} ||R_j||.

    First-order in u; empirical domination is reported, not guaranteed.
    """
    rs = math.sqrt(inputs.s)
    first = inputs.k * (3.0 + 4.0 * inputs.s * rs + 2.0 * inputs.m * rs) \
        * inputs.u * inputs.norm_a * inputs.max_x
    second = 3.0 * (inputs.k + 1) * inputs.u * inputs.max_r_incl0
    return first + second


def bound_householder(inputs):
    """Gap bound for Givens/Householder Q-factors.

    (8 sqrt(s) gamma_{m+3s} + gamma_1) k ||A|| max_{0<i<=k} ||X_i||
        + k gamma_1 max_{0<i<=k} ||R_i||.
    """
    g_ms = gamma(inputs.m + 3 * inputs.s, u=inputs.u)
    g_1 = gamma(1, u=inputs.u)
    return (8.0 * math.sqrt(inputs.s) * g_ms + g_1) * inputs.k * inputs.norm_a \
        * inputs.max_x + inputs.k * g_1 * inputs.max_r


def check_householder_assumptions(n, s, u=UNIT_ROUNDOFF, c=2, method="householder"):
    """Dimension condition under which :func:`bound_householder` is valid.

    Givens:      c [ (n + 2(s-1)) (sqrt(s) + 1) + 1 ] u < 1/2
    Householder: c [ (n + 1) (sqrt(s) + 1) s + 1 ] u < 1/2
    """
    rs = math.sqrt(s)
    if method == "givens":
        lhs = c * ((n + 2 * (s - 1)) * (rs + 1.0) + 1.0) * u
    elif method == "householder":
        lhs = c * ((n + 1) * (rs + 1.0) * s + 1.0) * u
    else:
        raise ValueError(f"unknown orthonormalization method: {method!r}")
    return lhs < 0.5


def bound_general_q(inputs):
    """Gap bound for general (inexact) orthonormalization processes.

    sum_{i=1..k} 2 gamma_{m+2s} ||A|| ||Qh_{i-1}|| / (1 - gamma_s ||Qh_{i-1}||
    - ||dI_{i-1}||) (||X_{i-1}|| + ||X_i||) + gamma_1 ||A|| sum ||X_i||
    + gamma_1 sum ||R_i||.

    Raises :class:`AssumptionViolated` when a denominator is nonpositive
    (the orthonormalization was too inexact for the bound to apply) or when
    (m + 2s) u >= 1.  The departure fed in is the measurable surrogate
    ||Q.T Q - I||.
    """
    if inputs.per_iter_q is None or len(inputs.per_iter_q) != inputs.k:
        raise DimensionMismatch(
            f"general bound at k={inputs.k} needs {inputs.k} per-iteration Q entries")
    if (inputs.m + 2 * inputs.s) * inputs.u >= 1.0:
        raise AssumptionViolated("(m + 2s) u >= 1")
    g_m2s = gamma(inputs.m + 2 * inputs.s, u=inputs.u)
    g_s = gamma(inputs.s, u=inputs.u)
    g_1 = gamma(1, u=inputs.u)
    total = 0.0
    sum_x = 0.0
    sum_r = 0.0
    for i, it in enumerate(inputs.per_iter_q, start=1):
        den = 1.0 - g_s * it.q_norm - it.q_departure
        if den <= 0.0:
            raise AssumptionViolated(
                f"orthonormalization too inexact at iteration {i}: "
                f"gamma_s ||Q|| + ||dI|| = {1.0 - den:.3e} >= 1")
        total += 2.0 * g_m2s * inputs.norm_a * it.q_norm / den * (it.x_prev + it.x_curr)
        sum_x += it.x_curr
        sum_r += it.r_curr
    return total + g_1 * inputs.norm_a * sum_x + g_1 * sum_r


def bound_inputs_from_records(records, norm_a, m, norm_b, s, smoothed=False,
                              upto=None, u=UNIT_ROUNDOFF, c=2):
    """Assemble :class:`BoundInputs` at iteration ``upto`` from a run history.

    With ``smoothed=True`` the smoothed pair (||Y||, ||S||) plays the role of
    (||X||, ||R||).  ``per_iter_q`` is filled only when every iteration up to
    ``upto`` recorded the Q-factor norm and departure.
    """
    if not records or records[0].k != 0:
        raise ValueError("records must start at k = 0")
    k = records[-1].k if upto is None else upto
    window = records[:k + 1]
    if [rec.k for rec in window] != list(range(k + 1)):
        raise ValueError("records must be dense in k")

    def norm_xy(rec):
        return rec.norm_y if smoothed else rec.norm_x

    def norm_rs(rec):
        rel = rec.rel_s if smoothed else rec.rel_r
        return rel * norm_b

    xs = [norm_xy(rec) for rec in window]
    rs = [norm_rs(rec) for rec in window]
    per_iter = None
    if k >= 1 and all(rec.q_norm is not None and rec.q_departure is not None
                      for rec in window[1:]):
        per_iter = [QrIterationData(q_norm=window[i].q_norm,
                                    q_departure=window[i].q_departure,
                                    x_prev=xs[i - 1], x_curr=xs[i], r_curr=rs[i])
                    for i in range(1, k + 1)]
    return BoundInputs(
        k=k, s=s, m=m, norm_a=norm_a,
        max_x=max(xs[1:], default=0.0),
        max_r=max(rs[1:], default=0.0),
        max_r_incl0=max(rs),
        u=u, c=c, per_iter_q=per_iter)


@dataclass
class TauReport:
    """Normalized smoothed-residual measures and bracket violations.

    ``taus[i]`` is ||A^{-1}|| ||S_k||/||B|| for the i-th record; a violation
    at index i means |(||Y_{k+1}|| - ||Y_k||)| / ||B|| exceeded 2 tau_k.
    """

    taus: list
    violations: list


def tau_sequence(norm_a_inv, records, norm_b):
    """Per-record tau values plus a check of the approximation-norm bracket.

    For consecutive smoothed records the update norm must satisfy
    ||Y_k||/||B|| - 2 tau_k <= ||Y_{k+1}||/||B|| <= ||Y_k||/||B|| + 2 tau_k;
    violations (beyond a 4u rounding pad) are collected in the report.
    """
    taus = [norm_a_inv * rec.rel_s if rec.rel_s is not None else None
            for rec in records]
    violations = []
    for i in range(len(records) - 1):
        a, b = records[i], records[i + 1]
        if a.rel_s is None or a.norm_y is None or b.norm_y is None:
            continue
        lhs = abs(b.norm_y - a.norm_y) / norm_b
        pad = 4.0 * UNIT_ROUNDOFF * (a.norm_y + b.norm_y) / norm_b
        if lhs > 2.0 * taus[i] + pad:
            violations.append(a.k)
    return TauReport(taus=taus, violations=violations)


def estimate_inv_norm(a, iters=20, seed=0):
    """Estimate ||A^{-1}||_2 by inverse power iteration on A.T A.

    Uses a sparse LU of A; ``iters`` applications of (A.T A)^{-1} to a seeded
    random start vector, then 1/sqrt of the Rayleigh quotient.
    """
    lu = scipy.sparse.linalg.splu(a._sp.tocsc())
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.n)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = lu.solve(v, trans="T")
        z = lu.solve(w)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            break
        v = z / nz
    sigma_min = np.linalg.norm(a._sp @ v)
    if sigma_min == 0.0:
        raise AssumptionViolated("inverse norm estimate diverged: A v = 0")
    return 1.0 / float(sigma_min)
