import numpy as np
import pytest

from blcirs import (Breakdown, CirsOrthoSmoother, CirsSmoother, CsrMatrix,
                    GlCirsSmoother, SrsSmoother, UNIT_ROUNDOFF, as_block,
                    cirs_ortho_step, cirs_underlying_step, frobenius_norm,
                    gen_convection_diffusion, gen_rhs, gl_cirs_step,
                    new_state, spmm, srs_step, zeros_block)


def drive_primary(a, b, steps, rng, scale=1.0):
    """Synthetic primary recursion x += p, r -= A p with random increments."""
    n, s = b.shape
    x = zeros_block(n, s)
    r = b.copy(order="F")
    seq = []
    for _ in range(steps):
        p = as_block(scale * rng.standard_normal((n, s)))
        x = x + p
        r = r - spmm(a, p)
        seq.append((p, x, r))
    return seq


class TestSrsStep:
    def test_zero_difference_breaks_down(self):
        state = new_state(zeros_block(3, 1), np.ones((3, 1), order="F"))
        with pytest.raises(Breakdown):
            srs_step(state, np.ones((3, 1)), np.ones((3, 1)))

    def test_scalar_hand_case(self):
        # s_res = (1, 0), r = (0, 1): the minimizer mixes them equally.
        state = new_state(zeros_block(2, 1), as_block([[1.0], [0.0]]))
        x = as_block([[0.3], [0.7]])
        r = as_block([[0.0], [1.0]])
        srs_step(state, x, r)
        assert state.eta[0, 0] == pytest.approx(0.5, abs=1e-15)
        assert np.allclose(state.s_res, [[0.5], [0.5]], atol=1e-15)
        norm_s = frobenius_norm(state.s_res)
        assert norm_s <= min(frobenius_norm(r), 1.0) * (1 + 1e-14)

    def test_optimal_input_moves_state_to_primary(self):
        # r orthogonal to (r - s_res) forces the parameter to the identity,
        # so the smoothed residual becomes r itself.
        s_res = as_block([[1.0], [0.5]])
        r = as_block([[1.0], [0.0]])
        assert float((r.T @ (r - s_res))[0, 0]) == 0.0
        state = new_state(zeros_block(2, 1), s_res)
        x = as_block([[2.0], [1.0]])
        srs_step(state, x, r)
        assert state.eta[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(state.s_res, r, atol=1e-15)
        assert np.allclose(state.y, x, atol=1e-15)

    def test_monotone_dominance(self, rng):
        a = gen_convection_diffusion(6, 6, 4.0, 2.0)
        b = gen_rhs(a.n, 3, seed=9)
        state = new_state(zeros_block(a.n, 3), b)
        tol = 1 + 16 * 3 * UNIT_ROUNDOFF
        prev = frobenius_norm(b)
        for _, x, r in drive_primary(a, b, 12, rng):
            srs_step(state, x, r)
            norm_s = frobenius_norm(state.s_res)
            assert norm_s <= min(frobenius_norm(r), prev) * tol
            prev = norm_s


class TestCirsUnderlying:
    def test_orthogonal_update_leaves_state(self):
        # A = I and the new direction orthogonal to s_res: parameter is zero.
        a = CsrMatrix.identity(4)
        s0 = np.zeros((4, 2), order="F")
        s0[0, 0] = s0[1, 1] = 1.0
        p = np.zeros((4, 2), order="F")
        p[2, 0] = p[3, 1] = 1.0
        state = new_state(zeros_block(4, 2), s0)
        res = cirs_underlying_step(state, p, a)
        assert np.array_equal(state.eta, np.zeros((2, 2)))
        assert np.array_equal(state.y, np.zeros((4, 2)))
        assert np.array_equal(state.s_res, s0)
        assert np.array_equal(res.x_next, p)  # y + v (I - 0)
        assert res.eta_norm == 0.0

    def test_two_step_trace_matches_srs_oracle(self, rng):
        a = CsrMatrix.from_dense(np.diag([1.0, 2.0]))
        b = as_block([[1.0], [1.0]])
        state = new_state(zeros_block(2, 1), b)
        oracle = new_state(zeros_block(2, 1), b)
        for p, x, r in drive_primary(a, b, 2, rng):
            cirs_underlying_step(state, p, a)
            srs_step(oracle, x, r)
            assert np.allclose(state.y, oracle.y, rtol=1e-12, atol=1e-14)
            assert np.allclose(state.s_res, oracle.s_res, rtol=1e-12, atol=1e-14)

    def test_scalar_width_matches_plain_recursion(self, rng):
        # s = 1 collapses to s_k = s_{k-1} - eta_k (A v_k) with scalar eta.
        a = gen_convection_diffusion(4, 4, 2.0, 1.0)
        b = gen_rhs(a.n, 1, seed=3)
        state = new_state(zeros_block(a.n, 1), b)
        v = np.zeros((a.n, 1))
        eta_prev = 0.0
        s_oracle = b.copy()
        for p, _, _ in drive_primary(a, b, 5, rng):
            cirs_underlying_step(state, p, a)
            v = v * (1.0 - eta_prev) + p
            u = a.to_dense() @ v
            eta_prev = float((u.T @ s_oracle)[0, 0]) / float((u.T @ u)[0, 0])
            s_oracle = s_oracle - eta_prev * u
            assert np.allclose(state.s_res, s_oracle, rtol=1e-12, atol=1e-13)

    def test_returned_primary_matches_driver(self, rng):
        a = gen_convection_diffusion(5, 5, 3.0, 1.0)
        b = gen_rhs(a.n, 2, seed=4)
        state = new_state(zeros_block(a.n, 2), b)
        for p, x, r in drive_primary(a, b, 8, rng):
            res = cirs_underlying_step(state, p, a)
            assert np.allclose(res.x_next, x, rtol=1e-10, atol=1e-12)
            assert np.allclose(res.r_next, r, rtol=1e-10,
                               atol=1e-12 * frobenius_norm(b))


class TestCirsOrtho:
    def test_matches_underlying_at_desk_scale(self, rng):
        a = gen_convection_diffusion(3, 2, 1.0, 0.5)  # n = 6
        b = gen_rhs(a.n, 2, seed=8)
        plain = new_state(zeros_block(a.n, 2), b)
        ortho = new_state(zeros_block(a.n, 2), b)
        for p, _, _ in drive_primary(a, b, 5, rng):
            cirs_underlying_step(plain, p, a)
            cirs_ortho_step(ortho, p, a)
            scale_y = max(frobenius_norm(plain.y), 1e-12)
            scale_s = max(frobenius_norm(plain.s_res), 1e-12)
            assert frobenius_norm(plain.y - ortho.y) <= 1e-10 * scale_y
            assert frobenius_norm(plain.s_res - ortho.s_res) <= 1e-10 * scale_s

    def test_orthogonal_target_keeps_residual(self):
        a = CsrMatrix.identity(4)
        s0 = np.zeros((4, 2), order="F")
        s0[0, 0] = s0[1, 1] = 1.0
        p = np.zeros((4, 2), order="F")
        p[2, 0] = p[3, 1] = 2.0
        state = new_state(zeros_block(4, 2), s0)
        res = cirs_ortho_step(state, p, a)
        assert np.array_equal(state.eta, np.zeros((2, 2)))
        assert np.array_equal(state.s_res, s0)
        # x_next = y + q_tilde xi with eta = 0
        assert np.allclose(res.x_next, state.q_tilde @ state.zeta, atol=1e-15)

    def test_per_step_monotonicity(self, rng):
        a = gen_convection_diffusion(7, 7, 8.0, 3.0)
        b = gen_rhs(a.n, 4, seed=12)
        state = new_state(zeros_block(a.n, 4), b)
        prev = frobenius_norm(b)
        for p, _, _ in drive_primary(a, b, 15, rng):
            cirs_ortho_step(state, p, a)
            norm_s = frobenius_norm(state.s_res)
            assert norm_s <= prev * (1 + 1e-14)
            prev = norm_s

    def test_eta_first_order_optimality(self, rng):
        a = gen_convection_diffusion(6, 6, 5.0, 2.0)
        b = gen_rhs(a.n, 3, seed=2)
        state = new_state(zeros_block(a.n, 3), b)
        for p, _, _ in drive_primary(a, b, 6, rng):
            s_before = state.s_res.copy()
            cirs_ortho_step(state, p, a)
            u = spmm(a, state.q_tilde)
            grad = frobenius_norm(u.T @ (s_before - u @ state.eta))
            nu = frobenius_norm(u)
            assert grad <= 1e-12 * (nu ** 2 * frobenius_norm(state.eta)
                                    + nu * frobenius_norm(s_before))


class TestGlCirs:
    def test_orthogonal_gives_zero_parameter(self):
        a = CsrMatrix.identity(4)
        s0 = np.zeros((4, 2), order="F")
        s0[0, 0] = s0[1, 1] = 1.0
        p = np.zeros((4, 2), order="F")
        p[2, 0] = p[3, 1] = 1.0
        state = new_state(zeros_block(4, 2), s0)
        gl_cirs_step(state, p, a)
        assert state.eta_scalar == 0.0
        assert np.array_equal(state.s_res, s0)
        assert state.k == 1
        assert np.array_equal(state.v, p)

    def test_exact_fit_annihilates_residual(self, rng):
        a = CsrMatrix.identity(5)
        s0 = as_block(rng.standard_normal((5, 2)))
        state = new_state(zeros_block(5, 2), s0)
        gl_cirs_step(state, s0.copy(order="F"), a)  # u = v = s0 exactly
        assert state.eta_scalar == 1.0
        assert np.array_equal(state.s_res, np.zeros((5, 2)))

    def test_zero_direction_breaks_down(self):
        a = CsrMatrix.identity(3)
        state = new_state(zeros_block(3, 2), np.ones((3, 2), order="F"))
        with pytest.raises(Breakdown):
            gl_cirs_step(state, zeros_block(3, 2), a)

    def test_scalar_width_bitwise_matches_underlying(self, rng):
        a = gen_convection_diffusion(5, 5, 3.0, 1.0)
        b = gen_rhs(a.n, 1, seed=6)
        plain = new_state(zeros_block(a.n, 1), b)
        glob = new_state(zeros_block(a.n, 1), b)
        for p, _, _ in drive_primary(a, b, 6, rng):
            ru = cirs_underlying_step(plain, p, a)
            rg = gl_cirs_step(glob, p, a)
            assert np.array_equal(plain.y, glob.y)
            assert np.array_equal(plain.s_res, glob.s_res)
            assert np.array_equal(ru.x_next, rg.x_next)
            assert np.array_equal(ru.r_next, rg.r_next)

    def test_monotonicity(self, rng):
        a = gen_convection_diffusion(7, 6, 6.0, 2.0)
        b = gen_rhs(a.n, 4, seed=13)
        state = new_state(zeros_block(a.n, 4), b)
        tol = 1 + 16 * 4 * UNIT_ROUNDOFF
        prev = frobenius_norm(b)
        for p, _, _ in drive_primary(a, b, 12, rng):
            gl_cirs_step(state, p, a)
            norm_s = frobenius_norm(state.s_res)
            assert norm_s <= prev * tol
            prev = norm_s


class TestSmootherAdapters:
    def test_srs_adapter_reconstructs_primary(self, rng):
        a = gen_convection_diffusion(5, 4, 2.0, 1.0)
        b = gen_rhs(a.n, 2, seed=1)
        sm = SrsSmoother(zeros_block(a.n, 2), b)
        oracle = new_state(zeros_block(a.n, 2), b)
        for p, x, r in drive_primary(a, b, 6, rng):
            res = sm.step(p, a)
            srs_step(oracle, x, r)
            # The adapter returns the unsmoothed primary pair (observer).
            assert np.allclose(res.x_next, x, atol=1e-13)
            assert np.allclose(res.r_next, r, atol=1e-12 * frobenius_norm(b))
            assert np.allclose(sm.state.s_res, oracle.s_res, rtol=1e-11,
                               atol=1e-13)

    def test_adapters_share_interface(self, rng):
        a = gen_convection_diffusion(4, 4, 1.0, 1.0)
        b = gen_rhs(a.n, 2, seed=0)
        x0 = zeros_block(a.n, 2)
        for cls in (SrsSmoother, CirsSmoother, CirsOrthoSmoother, GlCirsSmoother):
            sm = cls(x0, b)
            p = as_block(rng.standard_normal((a.n, 2)))
            res = sm.step(p, a)
            assert res.x_next.shape == b.shape
            assert res.r_next.shape == b.shape
            assert res.eta_norm >= 0.0
            assert sm.state.k == 1
