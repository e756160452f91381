"""Block BiCGSTAB with orthonormalized directions (Bl-BiCGSTABpQ) and its
five smoothing variants.

Each iteration updates the approximation in two parts,

    (BiCG part)        X' = X + Q alpha,     R' = R - (A Q) alpha,
    (polynomial part)  X  = X' + omega R',   R  = R' - omega (A R'),

where Q is the orthonormalized direction block and alpha solves the small
projected system sigma alpha = R0s.T R with sigma = (A.T R0s).T Q; the
transpose product is formed once per run.  Smoothing is applied to the
BiCG-part sequence only.  Every variant costs exactly two multiplications by
A per iteration (instrumented; diagnostics excluded).

Variants
--------
1. plain        : no smoothing.
2. srs          : simple smoothing observes (X', R'); primary untouched.
3. cirs         : cross-interactive smoothing, raw auxiliary block.
4. cirs-ortho   : cross-interactive smoothing with per-step thin QR.
5. gl-cirs      : cross-interactive smoothing with a scalar parameter.

For the cross-interactive variants the smoother consumes the increment
p_tilde = omega R'_prev + Q alpha, performs the A-multiplication itself, and
returns reconstructed (X', R'); the product A Q is then recovered without an
extra multiplication by solving V' alpha = R - R'.
"""

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import ConvergenceRecord, true_residual_and_gap
from .errors import Breakdown, DimensionMismatch, NonFiniteBlock
from .kernels import (add_scaled, frobenius_inner, frobenius_norm,
                      gemm_block_small, spmm, spmm_call_count, spmm_transpose,
                      zeros_block)
from .qr import orthonormality_departure, qf, right_solve, solve_small
from .smoothing import (CirsOrthoSmoother, CirsSmoother, GlCirsSmoother,
                        SrsSmoother)

__all__ = [
    "SolverVariant",
    "SolverOptions",
    "RunStatus",
    "RunResult",
    "compute_omega",
    "bicgstab_pq_run",
    "run_suite",
]


class SolverVariant(enum.IntEnum):
    """The five experiment variants, numbered as compared in the suite."""

    PLAIN = 1
    SRS = 2
    CIRS = 3
    CIRS_ORTHO = 4
    GL_CIRS = 5

    @property
    def label(self):
        return _LABELS[self]

    @property
    def smoothed(self):
        return self is not SolverVariant.PLAIN

    @classmethod
    def parse(cls, text):
        """Accept '1'..'5' or a variant label."""
        text = str(text).strip().lower()
        if text.isdigit():
            return cls(int(text))
        for variant, label in _LABELS.items():
            if text == label:
                return variant
        raise ValueError(f"unknown solver variant: {text!r}")


_LABELS = {
    SolverVariant.PLAIN: "plain",
    SolverVariant.SRS: "srs",
    SolverVariant.CIRS: "cirs",
    SolverVariant.CIRS_ORTHO: "cirs-ortho",
    SolverVariant.GL_CIRS: "gl-cirs",
}


@dataclass
class SolverOptions:
    """Per-run configuration.

    ``tol`` is the relative stopping threshold on ||S||/||B|| (smoothed
    variants) or ||R||/||B|| (plain); ``max_iter`` defaults to the matrix
    order; ``record_gap_every`` sets how often the explicit residual is
    measured (the final iteration is always measured).
    """

    variant: SolverVariant = SolverVariant.CIRS_ORTHO
    tol: float = 1e-15
    max_iter: int = None
    seed: int = 0
    record_gap_every: int = 1

    def __post_init__(self):
        self.variant = SolverVariant(self.variant)
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.record_gap_every < 1:
            raise ValueError("record_gap_every must be at least 1")


class RunStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max-iter"
    BREAKDOWN = "breakdown"


@dataclass
class RunResult:
    """Outcome of one solver run.

    ``x_final`` is the approximation whose true residual is reported: the
    smoothed approximation Y for smoothed variants, X otherwise.  ``records``
    has one entry per iteration including k = 0.
    """

    variant: SolverVariant
    status: RunStatus
    iterations: int
    x_final: np.ndarray
    records: list
    norm_b: float
    elapsed_s: float = 0.0
    warnings: list = field(default_factory=list)
    breakdown_message: str = None

    @property
    def converged(self):
        return self.status is RunStatus.CONVERGED

    @property
    def final_true_rel(self):
        """True relative residual of the reported approximation at exit."""
        rec = self.records[-1]
        if self.variant.smoothed and rec.true_rel_s is not None:
            return rec.true_rel_s
        return rec.true_rel_r

    def __repr__(self):
        return (f"RunResult(variant={self.variant.label}, status={self.status.value}, "
                f"iterations={self.iterations}, true_rel={self.final_true_rel})")


def compute_omega(r_prime, t):
    """Frobenius-minimizing scalar for ||R' - omega T||.

    Raises :class:`Breakdown` when <T, T>_F = 0.  A zero omega is a
    stagnation risk but is left to the caller to report.
    """
    tt = frobenius_inner(t, t)
    if tt == 0.0:
        raise Breakdown("polynomial-part parameter undefined: <T, T> = 0")
    return frobenius_inner(r_prime, t) / tt


def _make_smoother(variant, x0, r0):
    if variant is SolverVariant.SRS:
        return SrsSmoother(x0, r0)
    if variant is SolverVariant.CIRS:
        return CirsSmoother(x0, r0)
    if variant is SolverVariant.CIRS_ORTHO:
        return CirsOrthoSmoother(x0, r0)
    if variant is SolverVariant.GL_CIRS:
        return GlCirsSmoother(x0, r0)
    return None


def bicgstab_pq_run(a, b, opts, x0=None, r0_shadow=None):
    """Run one smoothing variant of Bl-BiCGSTABpQ on A X = B.

    Parameters
    ----------
    a : CsrMatrix
    b : ndarray, shape (n, s)
        Right-hand-side block.
    opts : SolverOptions
    x0 : ndarray, optional
        Initial guess (default zero block).
    r0_shadow : ndarray, optional
        Shadow residual defining the bi-orthogonality conditions
        (default: the initial residual).

    Returns
    -------
    RunResult
        Breakdown (singular small system, rank-deficient direction block, or
        non-finite iterates) ends the run with status BREAKDOWN; there is no
        restarting.  Identical inputs produce bit-identical results.
    """
    started = time.perf_counter()
    if b.ndim != 2 or b.shape[0] != a.n:
        raise DimensionMismatch(f"B must be {a.n}-by-s, got {b.shape}")
    n, s = b.shape
    if n < s:
        raise DimensionMismatch("block width exceeds matrix order")
    norm_b = frobenius_norm(b)
    if norm_b == 0.0:
        raise ValueError("zero right-hand side")
    variant = opts.variant
    max_iter = opts.max_iter if opts.max_iter is not None else n

    if x0 is None:
        x = zeros_block(n, s)
        r = np.array(b, dtype=np.float64, order="F")
    else:
        if x0.shape != b.shape:
            raise DimensionMismatch("X0 must match the shape of B")
        x = np.array(x0, dtype=np.float64, order="F")
        r = b - spmm(a, x) if np.any(x) else np.array(b, dtype=np.float64, order="F")
    if r0_shadow is None:
        r0s = r.copy(order="F")
    else:
        if r0_shadow.shape != b.shape:
            raise DimensionMismatch("shadow residual must match the shape of B")
        r0s = np.array(r0_shadow, dtype=np.float64, order="F")
    z0 = spmm_transpose(a, r0s)

    smoother = _make_smoother(variant, x, r)
    p = r.copy(order="F")
    r_prime = zeros_block(n, s)
    omega = 0.0
    warnings = []
    solver_mults = 0
    records = [_measure_record(a, b, norm_b, 0, 0, variant, x, r, smoother,
                               q=None, x_prime=None, r_prime=None, measure=True)]
    status = RunStatus.MAX_ITER
    breakdown_message = None

    for k in range(1, max_iter + 1):
        mults_before = spmm_call_count()
        try:
            q = qf(p)
            sigma = z0.T @ q
            alpha = solve_small(sigma, r0s.T @ r)
            if variant.smoothed and variant is not SolverVariant.SRS:
                p_tilde = add_scaled(gemm_block_small(q, alpha), r_prime, omega)
                step = smoother.step(p_tilde, a)
                x_prime, r_prime = step.x_next, step.r_next
                v_prime = right_solve(r - r_prime, alpha)
            else:
                v_prime = spmm(a, q)
                x_prime = x + gemm_block_small(q, alpha)
                r_prime = r - gemm_block_small(v_prime, alpha)
                if variant is SolverVariant.SRS:
                    smoother.observe(x_prime, r_prime)
            t = spmm(a, r_prime)
            omega = compute_omega(r_prime, t)
            if omega == 0.0:
                warnings.append(f"omega = 0 at iteration {k} (stagnation risk)")
            x = add_scaled(x_prime, r_prime, omega)
            r = add_scaled(r_prime, t, -omega)
            beta = solve_small(sigma, r0s.T @ t)
            p = r - gemm_block_small(q - omega * v_prime, beta)
        except (Breakdown, NonFiniteBlock) as exc:
            status = RunStatus.BREAKDOWN
            breakdown_message = f"iteration {k}: {exc}"
            break
        solver_mults += spmm_call_count() - mults_before
        if not (np.isfinite(r).all() and np.isfinite(x).all()):
            status = RunStatus.BREAKDOWN
            breakdown_message = f"iteration {k}: non-finite iterates"
            break

        rel_stop = (frobenius_norm(smoother.state.s_res) / norm_b
                    if variant.smoothed else frobenius_norm(r) / norm_b)
        stopping = rel_stop < opts.tol or k == max_iter
        measure = stopping or (k % opts.record_gap_every == 0)
        records.append(_measure_record(a, b, norm_b, k, solver_mults, variant,
                                       x, r, smoother, q, x_prime, r_prime,
                                       measure))
        if rel_stop < opts.tol:
            status = RunStatus.CONVERGED
            break

    x_final = (smoother.state.y if variant.smoothed else x).copy(order="F")
    return RunResult(
        variant=variant,
        status=status,
        iterations=len(records) - 1,
        x_final=x_final,
        records=records,
        norm_b=norm_b,
        elapsed_s=time.perf_counter() - started,
        warnings=warnings,
        breakdown_message=breakdown_message,
    )


def _measure_record(a, b, norm_b, k, solver_mults, variant, x, r, smoother,
                    q, x_prime, r_prime, measure):
    """Build one ConvergenceRecord; explicit residuals only when ``measure``."""
    rec = ConvergenceRecord(
        k=k,
        spmm_count=solver_mults,
        rel_r=frobenius_norm(r) / norm_b,
        norm_x=frobenius_norm(x),
    )
    if x_prime is not None:
        rec.mid_rel_r = frobenius_norm(r_prime) / norm_b
        rec.mid_norm_x = frobenius_norm(x_prime)
    if variant.smoothed:
        rec.rel_s = frobenius_norm(smoother.state.s_res) / norm_b
        rec.norm_y = frobenius_norm(smoother.state.y)
    if q is not None and variant in (SolverVariant.PLAIN, SolverVariant.SRS):
        rec.q_norm = frobenius_norm(q)
        rec.q_departure = orthonormality_departure(q)
    elif variant is SolverVariant.CIRS_ORTHO and smoother.state.k > 0:
        rec.q_norm = frobenius_norm(smoother.state.q_tilde)
        rec.q_departure = orthonormality_departure(smoother.state.q_tilde)
    if measure:
        true_r, gap_r = true_residual_and_gap(a, b, x, r)
        rec.true_rel_r = true_r / norm_b
        rec.gap_r = gap_r
        if variant.smoothed:
            true_s, gap_s = true_residual_and_gap(a, b, smoother.state.y,
                                                  smoother.state.s_res)
            rec.true_rel_s = true_s / norm_b
            rec.gap_s = gap_s
    return rec


def run_suite(a, b, opts_list, x0=None, r0_shadow=None):
    """Run several variants on the identical problem instance.

    Results are ordered like ``opts_list``.  A run that raises a recoverable
    numerical error is reported as a breakdown result; it never aborts the
    other runs.
    """
    results = []
    for opts in opts_list:
        try:
            results.append(bicgstab_pq_run(a, b, opts, x0=x0, r0_shadow=r0_shadow))
        except (Breakdown, NonFiniteBlock) as exc:
            results.append(RunResult(
                variant=opts.variant,
                status=RunStatus.BREAKDOWN,
                iterations=0,
                x_final=zeros_block(b.shape[0], b.shape[1]) if x0 is None else x0.copy(),
                records=[],
                norm_b=frobenius_norm(b),
                warnings=[],
                breakdown_message=str(exc),
            ))
    return results
