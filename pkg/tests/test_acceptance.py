"""Acceptance suite: one test per criterion, at the stated tolerances.

Sizes, seeds, and tolerances are pinned here.  Shared run collections live in
session fixtures so later criteria (the triangle-inequality sweep, the
multiplication budget) can audit the same histories.
"""

import time

import numpy as np
import pytest

import blcirs
from blcirs import (FetchError, SolverOptions, SolverVariant, UNIT_ROUNDOFF,
                    as_block, bicgstab_pq_run, bound_householder,
                    bound_inputs_from_records, check_householder_assumptions,
                    cirs_ortho_step, cirs_underlying_step, estimate_inv_norm,
                    frobenius_norm, gemm_block_small, gen_convection_diffusion,
                    gen_rhs, generated_twin, load_matrix_market, new_state,
                    orthonormality_departure, qf, spmm, srs_step, thin_qr,
                    trr_holds, zeros_block)
from blcirs.diagnostics import BoundInputs

SMOOTHED_VARIANTS = (SolverVariant.SRS, SolverVariant.CIRS_ORTHO,
                     SolverVariant.GL_CIRS)


# ---------------------------------------------------------------------------
# Shared run collections


@pytest.fixture(scope="session")
def randomized_runs():
    """Criterion 1 corpus: 200 randomized problems, smoothed variants."""
    rng = np.random.default_rng(746)
    runs = []
    started = time.monotonic()
    for idx in range(200):
        nx = int(rng.integers(8, 32))
        ny = int(rng.integers(8, 32))
        px = float(rng.uniform(0.0, 2.0 * (nx + 1) - 1.0))
        py = float(rng.uniform(0.0, 2.0 * (ny + 1) - 1.0))
        s = int(rng.choice([2, 4, 8, 16]))
        a = gen_convection_diffusion(nx, ny, px, py)
        assert 50 <= a.n <= 961
        b = gen_rhs(a.n, s, seed=idx)
        for variant in SMOOTHED_VARIANTS:
            opts = SolverOptions(variant=variant, record_gap_every=10)
            runs.append((s, bicgstab_pq_run(a, b, opts)))
    return runs, time.monotonic() - started


@pytest.fixture(scope="session")
def twin_gap_runs():
    """Criterion 3 corpus: plain vs orthonormalized smoothing on the twin."""
    a = generated_twin("cdde2-twin")
    runs = {}
    started = time.monotonic()
    for s in (16, 32):
        for seed in range(5):
            b = gen_rhs(a.n, s, seed)
            pair = {}
            for variant in (SolverVariant.PLAIN, SolverVariant.CIRS_ORTHO):
                opts = SolverOptions(variant=variant, record_gap_every=5)
                pair[variant] = bicgstab_pq_run(a, b, opts)
            runs[(s, seed)] = pair
    return runs, time.monotonic() - started


@pytest.fixture(scope="session")
def bare_recursion_histories():
    """Criterion 5 corpus: the orthonormalized-direction update in isolation.

    X_k = X_{k-1} + Q alpha, R_k = R_{k-1} - (A Q) alpha with Householder
    Q-factors of random direction blocks and random coefficient matrices.
    """
    rng = np.random.default_rng(1333)
    histories = []
    started = time.monotonic()
    for idx in range(100):
        nx = int(rng.integers(5, 15))
        ny = int(rng.integers(5, 15))
        s = int(rng.integers(1, 9))
        steps = int(rng.integers(20, 51))
        a = gen_convection_diffusion(nx, ny, float(rng.uniform(0, 10)),
                                     float(rng.uniform(0, 10)))
        assert a.n <= 200
        norm_a = frobenius_norm(a.to_dense())
        b = gen_rhs(a.n, s, seed=idx)
        x = zeros_block(a.n, s)
        r = b.copy(order="F")
        norms_x, norms_r, triples = [], [], []
        for _ in range(steps):
            q = qf(as_block(rng.standard_normal((a.n, s))))
            alpha = rng.standard_normal((s, s))
            x = x + gemm_block_small(q, alpha)
            r = r - gemm_block_small(spmm(a, q), alpha)
            norms_x.append(frobenius_norm(x))
            norms_r.append(frobenius_norm(r))
            explicit = b - spmm(a, x)
            true_norm = frobenius_norm(explicit)
            gap = frobenius_norm(explicit - r)
            triples.append((gap, norms_r[-1], true_norm))
        histories.append({
            "n": a.n, "s": s, "m": a.m, "norm_a": norm_a,
            "norms_x": norms_x, "norms_r": norms_r, "triples": triples,
        })
    return histories, time.monotonic() - started


@pytest.fixture(scope="session")
def approximation_norm_runs():
    """Criterion 8 corpus: plain vs orthonormalized smoothing, larger twin."""
    a = generated_twin("pde2961-twin")
    inv_norm = estimate_inv_norm(a)
    runs = {}
    for seed in range(5):
        b = gen_rhs(a.n, 16, seed)
        pair = {}
        for variant in (SolverVariant.PLAIN, SolverVariant.CIRS_ORTHO):
            opts = SolverOptions(variant=variant, record_gap_every=25)
            pair[variant] = bicgstab_pq_run(a, b, opts)
        runs[seed] = pair
    return runs, inv_norm


# ---------------------------------------------------------------------------
# Criteria


def test_criterion_1_smoothed_monotonicity(randomized_runs):
    """Solver 2/4/5 smoothed residual norms never grow beyond (1 + 16 s u)."""
    runs, elapsed = randomized_runs
    assert len(runs) == 3 * 200
    for s, result in runs:
        factor = 1.0 + 16.0 * s * UNIT_ROUNDOFF
        for prev, cur in zip(result.records, result.records[1:]):
            assert cur.rel_s <= prev.rel_s * factor, \
                f"monotonicity violated at k={cur.k} ({result.variant.label})"
    assert elapsed < 60.0, f"criterion-1 corpus took {elapsed:.1f}s (budget 60s)"


def test_criterion_2_equivalence_suite():
    """The three smoothing recursions agree on a shared primary sequence."""
    rng = np.random.default_rng(52)
    for case in range(20):
        nx = int(rng.integers(3, 10))
        ny = int(rng.integers(3, 10))
        s = int(rng.choice([1, 2, 3, 4]))
        a = gen_convection_diffusion(nx, ny, float(rng.uniform(0, 6)),
                                     float(rng.uniform(0, 6)))
        assert a.n <= 100
        b = gen_rhs(a.n, s, seed=case)
        x = zeros_block(a.n, s)
        r = b.copy(order="F")
        srs = new_state(x, r)
        plain = new_state(x, r)
        ortho = new_state(x, r)
        for _ in range(10):
            p = as_block(rng.standard_normal((a.n, s)))
            x = x + p
            r = r - spmm(a, p)
            srs_step(srs, x, r)
            cirs_underlying_step(plain, p, a)
            cirs_ortho_step(ortho, p, a)
            scale_y = max(frobenius_norm(srs.y), 1e-9)
            scale_s = max(frobenius_norm(srs.s_res), 1e-9)
            # (a) plain cross-interactive vs simple smoothing
            assert frobenius_norm(plain.y - srs.y) <= 1e-8 * scale_y
            assert frobenius_norm(plain.s_res - srs.s_res) <= 1e-8 * scale_s
            # (b) orthonormalized vs plain cross-interactive
            assert frobenius_norm(ortho.y - plain.y) <= 1e-8 * scale_y
            assert frobenius_norm(ortho.s_res - plain.s_res) <= 1e-8 * scale_s


def test_criterion_3_residual_gap_improvement(twin_gap_runs):
    """Orthonormalized smoothing reaches <= 1e-13 and beats plain by >= 10x."""
    runs, elapsed = twin_gap_runs
    for (s, seed), pair in runs.items():
        plain = pair[SolverVariant.PLAIN]
        smooth = pair[SolverVariant.CIRS_ORTHO]
        assert plain.converged and smooth.converged, f"s={s} seed={seed}"
        true_plain = plain.final_true_rel
        true_smooth = smooth.final_true_rel
        assert true_smooth <= 1e-13, f"s={s} seed={seed}: {true_smooth:.2e}"
        assert true_smooth <= true_plain / 10.0, \
            f"s={s} seed={seed}: {true_smooth:.2e} vs {true_plain:.2e}"
        assert true_plain >= 1e-14, \
            f"s={s} seed={seed}: plain did not stagnate ({true_plain:.2e})"
    assert elapsed < 30.0, f"criterion-3 corpus took {elapsed:.1f}s (budget 30s)"


TABLE_COUNTS = {
    "cdde2": {SolverVariant.PLAIN: 55, SolverVariant.SRS: 54,
              SolverVariant.CIRS_ORTHO: 55, SolverVariant.GL_CIRS: 56},
    "pde2961": {SolverVariant.PLAIN: 96, SolverVariant.SRS: 94,
                SolverVariant.CIRS_ORTHO: 93, SolverVariant.GL_CIRS: 90},
    "bfwa782": {SolverVariant.PLAIN: 61, SolverVariant.SRS: 61,
                SolverVariant.CIRS_ORTHO: 62, SolverVariant.GL_CIRS: 62},
}


@pytest.mark.network
def test_criterion_4_iteration_count_band(tmp_path):
    """Real collection matrices: counts within [0.5x, 2x] of the references."""
    matrices = {}
    for name in TABLE_COUNTS:
        try:
            matrices[name] = load_matrix_market(blcirs.fetch_suitesparse(name))
        except FetchError as exc:
            pytest.skip(f"matrix collection unreachable ({exc})")
    for name, a in matrices.items():
        b = gen_rhs(a.n, 16, seed=0)
        for variant, reference in TABLE_COUNTS[name].items():
            opts = SolverOptions(variant=variant, record_gap_every=50)
            result = bicgstab_pq_run(a, b, opts)
            assert result.converged, f"{name} #{int(variant)} did not converge"
            assert 0.5 * reference <= result.iterations <= 2.0 * reference, \
                f"{name} #{int(variant)}: {result.iterations} vs {reference}"


def test_criterion_5_bound_domination(bare_recursion_histories):
    """Measured gaps never exceed the Householder-orthonormalization bound."""
    histories, elapsed = bare_recursion_histories
    assert len(histories) == 100
    for hist in histories:
        assert check_householder_assumptions(hist["n"], hist["s"])
        max_x = 0.0
        max_r = 0.0
        for k, (gap, _, _) in enumerate(hist["triples"], start=1):
            max_x = max(max_x, hist["norms_x"][k - 1])
            max_r = max(max_r, hist["norms_r"][k - 1])
            inputs = BoundInputs(k=k, s=hist["s"], m=hist["m"],
                                 norm_a=hist["norm_a"], max_x=max_x,
                                 max_r=max_r, max_r_incl0=max_r)
            assert gap <= bound_householder(inputs), \
                f"n={hist['n']} s={hist['s']} k={k}"
    assert elapsed < 60.0, f"criterion-5 corpus took {elapsed:.1f}s (budget 60s)"


def test_criterion_7_qr_quality():
    """Orthonormality departure and reconstruction error stay below 1e-13."""
    rng = np.random.default_rng(99)
    for _ in range(100):
        s = int(rng.integers(1, 33))
        n = int(rng.integers(max(s, 2), 1001))
        v = as_block(rng.standard_normal((n, s)))
        fac = thin_qr(v)
        assert orthonormality_departure(fac.q) <= 1e-13
        assert frobenius_norm(fac.q @ fac.xi - v) <= 1e-13 * frobenius_norm(v)


def test_criterion_8_approximation_norms(approximation_norm_runs):
    """Smoothed approximation norms stay near the solution norm while the
    plain iteration overshoots; the tau brackets hold at every step."""
    runs, inv_norm = approximation_norm_runs
    peak_ratios = []
    for seed, pair in runs.items():
        plain = pair[SolverVariant.PLAIN]
        smooth = pair[SolverVariant.CIRS_ORTHO]
        assert smooth.converged, f"seed={seed}"
        x_star = frobenius_norm(smooth.x_final)
        max_y = max(rec.norm_y for rec in smooth.records)
        assert max_y <= 1.5 * x_star, f"seed={seed}: {max_y:.3e} vs {x_star:.3e}"
        max_x = max(max(rec.norm_x for rec in plain.records),
                    max(rec.mid_norm_x or 0.0 for rec in plain.records))
        peak_ratios.append(max_x / x_star)
        report = blcirs.tau_sequence(inv_norm, smooth.records, smooth.norm_b)
        assert report.violations == [], f"seed={seed}: {report.violations}"
    assert max(peak_ratios) >= 10.0, f"no overshoot seed: {peak_ratios}"


def test_criterion_9_spmm_budget(randomized_runs, twin_gap_runs):
    """Exactly two multiplications by A per iteration for variants 1/2/4/5."""
    audited = 0
    runs, _ = randomized_runs
    pairs, _ = twin_gap_runs
    results = [res for _, res in runs]
    results += [res for pair in pairs.values() for res in pair.values()]
    for result in results:
        if result.variant is SolverVariant.CIRS:
            continue
        for prev, cur in zip(result.records, result.records[1:]):
            assert cur.spmm_count - prev.spmm_count == 2, \
                f"{result.variant.label} at k={cur.k}"
            audited += 1
    assert audited > 1000


def test_criterion_6_trr_sandwich(randomized_runs, twin_gap_runs,
                                  bare_recursion_histories,
                                  approximation_norm_runs):
    """Triangle sandwich between gap, recursive, and true residual norms."""
    checked = 0
    solver_results = [res for _, res in randomized_runs[0]]
    solver_results += [res for pair in twin_gap_runs[0].values()
                       for res in pair.values()]
    solver_results += [res for pair in approximation_norm_runs[0].values()
                       for res in pair.values()]
    for result in solver_results:
        nb = result.norm_b
        for rec in result.records:
            if rec.gap_r is not None:
                assert trr_holds(rec.gap_r, rec.rel_r * nb, rec.true_rel_r * nb)
                checked += 1
            if rec.gap_s is not None:
                assert trr_holds(rec.gap_s, rec.rel_s * nb, rec.true_rel_s * nb)
                checked += 1
    for hist in bare_recursion_histories[0]:
        for gap, res_norm, true_norm in hist["triples"]:
            assert trr_holds(gap, res_norm, true_norm)
            checked += 1
    assert checked > 5000
