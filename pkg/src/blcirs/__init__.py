"""blcirs - block Krylov solvers with cross-interactive residual smoothing.

A sparse solver library for AX = B with multiple right-hand sides, built
around a block BiCGSTAB iteration with orthonormalized directions and four
residual smoothing schemes, plus diagnostics that measure residual gaps and
evaluate rounding-error bounds against them.

Examples
--------
>>> from blcirs import gen_convection_diffusion, gen_rhs
>>> from blcirs import SolverOptions, SolverVariant, bicgstab_pq_run
>>> a = gen_convection_diffusion(16, 16, 20.0, 20.0)
>>> b = gen_rhs(a.n, 4, seed=1)
>>> result = bicgstab_pq_run(a, b, SolverOptions(variant=SolverVariant.CIRS_ORTHO))
>>> result.converged
True
"""

from .diagnostics import (BoundInputs, ConvergenceRecord, QrIterationData,
                          TauReport, bound_exact_ortho, bound_general_q,
                          bound_householder, bound_inputs_from_records,
                          check_householder_assumptions, estimate_inv_norm,
                          gamma, gamma_tilde, residual_gap, tau_sequence,
                          trr_holds, true_residual_and_gap)
from .errors import (AssumptionViolated, BlcirsError, Breakdown,
                     DimensionMismatch, FetchError, MatrixMarketError,
                     NonFiniteBlock, RankDeficient, UnknownMatrix)
from .ingest import (GENERATED_TWINS, ProblemSpec, fetch_suitesparse,
                     gen_convection_diffusion, gen_rhs, generated_twin,
                     load_matrix_market, parse_matrix_market, resolve_matrix,
                     write_matrix_market)
from .kernels import (UNIT_ROUNDOFF, CsrMatrix, add_scaled, as_block,
                      csr_frobenius_norm, frobenius_inner, frobenius_norm,
                      gemm_block_small, spmm, spmm_call_count, spmm_transpose,
                      zeros_block)
from .qr import (ThinQr, least_squares_eta, orthonormality_departure, qf,
                 right_solve, solve_small, thin_qr)
from .smoothing import (CirsOrthoSmoother, CirsSmoother, GlCirsSmoother,
                        SmoothStepResult, SmootherState, SrsSmoother,
                        cirs_ortho_step, cirs_underlying_step, gl_cirs_step,
                        new_state, srs_step)
from .solvers import (RunResult, RunStatus, SolverOptions, SolverVariant,
                      bicgstab_pq_run, compute_omega, run_suite)

__version__ = "0.1.0"

__all__ = [
    "UNIT_ROUNDOFF",
    "CsrMatrix",
    "zeros_block",
    "as_block",
    "spmm",
    "spmm_transpose",
    "spmm_call_count",
    "frobenius_inner",
    "frobenius_norm",
    "csr_frobenius_norm",
    "gemm_block_small",
    "add_scaled",
    "ThinQr",
    "thin_qr",
    "qf",
    "solve_small",
    "right_solve",
    "least_squares_eta",
    "orthonormality_departure",
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
    "SolverVariant",
    "SolverOptions",
    "RunStatus",
    "RunResult",
    "compute_omega",
    "bicgstab_pq_run",
    "run_suite",
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
    "ProblemSpec",
    "parse_matrix_market",
    "write_matrix_market",
    "load_matrix_market",
    "gen_convection_diffusion",
    "gen_rhs",
    "generated_twin",
    "GENERATED_TWINS",
    "fetch_suitesparse",
    "resolve_matrix",
    "BlcirsError",
    "DimensionMismatch",
    "NonFiniteBlock",
    "Breakdown",
    "RankDeficient",
    "AssumptionViolated",
    "MatrixMarketError",
    "FetchError",
    "UnknownMatrix",
]
