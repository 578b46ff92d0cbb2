"""CSR construction, sparse solve, and the damped Newton driver."""

import numpy as np
import pytest

from pamfem.sparsela import (
    CsrMatrix,
    NewtonSettings,
    SingularMatrixError,
    csr_from_triplets,
    newton_solve,
    solve_linear,
    spmv,
)


class TestCsr:
    def test_duplicates_summed(self):
        a = csr_from_triplets(1, 1, [(0, 0, 1.0), (0, 0, 2.0)])
        assert a.nnz == 1
        assert a.vals[0] == 3.0

    def test_empty_triplets(self):
        a = csr_from_triplets(3, 3, [])
        assert a.nnz == 0
        np.testing.assert_array_equal(a.toarray(), np.zeros((3, 3)))

    def test_zero_sum_entry_keeps_pattern(self):
        a = csr_from_triplets(2, 2, [(0, 1, 5.0), (0, 1, -5.0)])
        assert a.nnz == 1
        assert a.vals[0] == 0.0

    def test_out_of_range_rejected(self):
        with pytest.raises(IndexError):
            csr_from_triplets(2, 2, [(2, 0, 1.0)])

    def test_sorted_unique_columns(self):
        rng = np.random.default_rng(0)
        trips = [
            (int(rng.integers(0, 20)), int(rng.integers(0, 20)), float(rng.normal()))
            for _ in range(300)
        ]
        a = csr_from_triplets(20, 20, trips)
        for r in range(20):
            cols = a.col_idx[a.row_ptr[r] : a.row_ptr[r + 1]]
            assert np.all(np.diff(cols) > 0)

    def test_dense_accumulation_oracle(self):
        rng = np.random.default_rng(17)
        n = 30
        trips = [
            (int(rng.integers(0, n)), int(rng.integers(0, n)), float(rng.normal()))
            for _ in range(1000)
        ]
        dense = np.zeros((n, n))
        for r, c, v in trips:
            dense[r, c] += v
        a = csr_from_triplets(n, n, trips)
        np.testing.assert_allclose(a.toarray(), dense, rtol=1e-15, atol=1e-15)


class TestSpmv:
    def test_identity(self):
        eye = csr_from_triplets(4, 4, [(i, i, 1.0) for i in range(4)])
        x = np.array([1.0, -2.0, 3.0, 0.5])
        np.testing.assert_array_equal(spmv(eye, x), x)

    def test_zero_matrix(self):
        a = csr_from_triplets(3, 3, [])
        np.testing.assert_array_equal(spmv(a, np.ones(3)), np.zeros(3))

    def test_against_dense_product(self):
        rng = np.random.default_rng(5)
        n = 50
        dense = np.where(rng.random((n, n)) < 0.1, rng.normal(size=(n, n)), 0.0)
        trips = [(i, j, dense[i, j]) for i in range(n) for j in range(n) if dense[i, j]]
        a = csr_from_triplets(n, n, trips)
        x = rng.normal(size=n)
        got = spmv(a, x)
        want = dense @ x
        assert np.linalg.norm(got - want) <= 1e-14 * max(np.linalg.norm(want), 1.0)

    def test_dimension_mismatch(self):
        a = csr_from_triplets(3, 4, [(0, 0, 1.0)])
        with pytest.raises(ValueError):
            spmv(a, np.ones(3))


def _residual_contract(a: CsrMatrix, x: np.ndarray, b: np.ndarray) -> bool:
    fro = np.linalg.norm(a.vals)
    res = np.linalg.norm(spmv(a, x) - b)
    return res <= 1e-10 * (np.linalg.norm(b) + fro * np.linalg.norm(x))


class TestSolveLinear:
    def test_identity(self):
        eye = csr_from_triplets(3, 3, [(i, i, 1.0) for i in range(3)])
        b = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(solve_linear(eye, b), b)

    def test_diagonal(self):
        a = csr_from_triplets(2, 2, [(0, 0, 2.0), (1, 1, 4.0)])
        np.testing.assert_allclose(solve_linear(a, np.array([2.0, 8.0])), [1.0, 2.0])

    def test_random_spd_against_dense_lu(self):
        rng = np.random.default_rng(99)
        n = 100
        dense = np.where(rng.random((n, n)) < 0.05, rng.normal(size=(n, n)), 0.0)
        dense = 0.5 * (dense + dense.T)
        dense[np.diag_indices(n)] = np.abs(dense).sum(axis=1) + 1.0
        trips = [(i, j, dense[i, j]) for i in range(n) for j in range(n) if dense[i, j]]
        a = csr_from_triplets(n, n, trips)
        b = rng.normal(size=n)
        x = solve_linear(a, b)
        assert _residual_contract(a, x, b)
        np.testing.assert_allclose(x, np.linalg.solve(dense, b), rtol=1e-9, atol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        n = 40
        trips = [(i, i, 2.0 + rng.random()) for i in range(n)]
        trips += [(i, i + 1, -0.5) for i in range(n - 1)]
        a = csr_from_triplets(n, n, trips)
        b = rng.normal(size=n)
        x1 = solve_linear(a, b)
        x2 = solve_linear(a, b)
        assert np.array_equal(x1, x2)

    def test_singular_raises(self):
        a = csr_from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
        with pytest.raises(SingularMatrixError):
            solve_linear(a, np.ones(2))

    def test_not_square_rejected(self):
        a = csr_from_triplets(2, 3, [(0, 0, 1.0)])
        with pytest.raises(ValueError):
            solve_linear(a, np.ones(2))


def _dense_jacobian_cb(mat: np.ndarray):
    n = mat.shape[0]
    trips = [(i, j, mat[i, j]) for i in range(n) for j in range(n) if mat[i, j]]
    a = csr_from_triplets(n, n, trips)
    return lambda u: a


class TestNewton:
    def test_linear_system_one_iteration(self):
        rng = np.random.default_rng(1)
        n = 10
        mat = np.eye(n) * 3.0 + 0.1 * rng.normal(size=(n, n))
        b = rng.normal(size=n)
        u, report = newton_solve(
            residual=lambda u: mat @ u - b,
            jacobian=_dense_jacobian_cb(mat),
            u0=np.zeros(n),
        )
        assert report.converged
        assert report.iterations == 1
        assert report.step_sizes == [1.0]
        np.testing.assert_allclose(u, np.linalg.solve(mat, b), rtol=1e-10)

    def test_scalar_quadratic(self):
        # root of u^2 - 4 from u0 = 3; hand iteration reaches 2 in 4-5 steps
        u, report = newton_solve(
            residual=lambda u: u**2 - 4.0,
            jacobian=lambda u: csr_from_triplets(1, 1, [(0, 0, 2.0 * float(u[0]))]),
            u0=np.array([3.0]),
        )
        assert report.converged
        assert report.iterations <= 8
        assert u[0] == pytest.approx(2.0, abs=1e-7)
        assert all(a == 1.0 for a in report.step_sizes[-2:])

    def test_zero_initial_residual(self):
        u, report = newton_solve(
            residual=lambda u: u.copy(),
            jacobian=_dense_jacobian_cb(np.eye(2)),
            u0=np.zeros(2),
        )
        assert report.converged
        assert report.iterations == 0
        assert report.residual_history == [0.0]

    def test_armijo_acceptance_and_history(self):
        def residual(u):
            return np.array([np.arctan(u[0]) - 1.5])

        def jacobian(u):
            return csr_from_triplets(1, 1, [(0, 0, 1.0 / (1.0 + u[0] ** 2))])

        settings = NewtonSettings(max_iter=60)
        u, report = newton_solve(residual, jacobian, np.array([0.0]), settings)
        assert report.converged
        assert u[0] == pytest.approx(np.tan(1.5), rel=1e-6)
        assert len(report.residual_history) == report.iterations + 1
        assert len(report.step_sizes) == report.iterations
        hist = report.residual_history
        for k, alpha in enumerate(report.step_sizes):
            if alpha >= settings.min_step:
                assert hist[k + 1] <= (1.0 - settings.armijo_c * alpha) * hist[k] + 1e-300
        assert all(b < a for a, b in zip(hist, hist[1:]))

    def test_local_quadratic_convergence(self):
        def residual(u):
            return np.array([u[0] ** 2 - 4.0, np.sin(u[1])])

        def jacobian(u):
            return csr_from_triplets(
                2, 2, [(0, 0, 2.0 * float(u[0])), (1, 1, float(np.cos(u[1])))]
            )

        settings = NewtonSettings(rel_tol=1e-14, abs_tol=1e-14)
        u0 = np.array([2.3, 0.4])
        u, report = newton_solve(residual, jacobian, u0, settings)
        assert report.converged
        hist = report.residual_history
        # ratio ||R_{k+1}|| / ||R_k||^2 stays bounded over the final steps
        ratios = [
            hist[k + 1] / hist[k] ** 2
            for k in range(len(hist) - 2, len(hist))
            if 0 < k < len(hist) - 1 and hist[k] > 0
        ]
        assert ratios and max(ratios) < 10.0

    def test_min_step_accepted_when_backtracking_exhausts(self):
        # a wrong-sign Jacobian makes every trial increase the residual, so
        # the search bottoms out and the min_step move is taken and recorded
        settings = NewtonSettings(max_iter=1)
        u, report = newton_solve(
            residual=lambda u: u.copy(),
            jacobian=_dense_jacobian_cb(-np.eye(1)),
            u0=np.array([1.0]),
            settings=settings,
        )
        assert report.step_sizes == [settings.min_step]
        assert u[0] == pytest.approx(1.0 + settings.min_step)
        assert not report.converged

    def test_nonconvergence_reported_not_raised(self):
        settings = NewtonSettings(max_iter=2)

        def residual(u):
            return np.array([np.arctan(u[0]) - 1.5])

        def jacobian(u):
            return csr_from_triplets(1, 1, [(0, 0, 1.0 / (1.0 + u[0] ** 2))])

        u, report = newton_solve(residual, jacobian, np.array([0.0]), settings)
        assert not report.converged
        assert report.iterations == 2

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            NewtonSettings(backtrack=1.5)
        with pytest.raises(ValueError):
            NewtonSettings(armijo_c=0.9)
        with pytest.raises(ValueError):
            NewtonSettings(rel_tol=0.0)
