"""Space-time engine: fixed/nonlinear blocks, block Newton, slice extraction."""

import numpy as np
import pytest

from pamfem.material import PamParams
from pamfem.mesh import Mesh2D, SpaceTimeMesh, build_structured_square, extrude_spacetime
from pamfem.sparsela import solve_linear
from pamfem.spacetime import (
    StDofMaps,
    assemble_st_fixed,
    assemble_st_nonlinear,
    build_spacetime_problem,
    extract_slice,
    solve_spacetime,
    st_dofmaps,
    st_load_from_nodal,
    st_residual,
)

IRON = PamParams(p0=75.6, p1=0.0223, p2=11.47, p3=0.0001, p4=65.8, p5=1.0)
LINEAR = PamParams(p0=2.0, p3=0.5)


def square_st(n: int, slices: int, t_final: float = 1.0) -> SpaceTimeMesh:
    return extrude_spacetime(build_structured_square(n, lambda x, y: "a"), slices, t_final)


def all_node_dofmaps(mesh: SpaceTimeMesh) -> StDofMaps:
    """Unrestricted maps: u excludes only initial nodes, p keeps every node.

    The residual/Jacobian relationship holds for any dof subsets, so the
    finite-difference checks can run on the smallest two-triangle base."""
    initial = set(int(i) for i in mesh.initial_nodes)
    u_dofs = np.array([n for n in range(mesh.n_nodes) if n not in initial], dtype=np.int64)
    return StDofMaps(u_dofs=u_dofs, p_dofs=np.arange(mesh.n_nodes, dtype=np.int64))


class TestDofMaps:
    def test_partition_counts(self):
        mesh = square_st(3, 4)
        maps = st_dofmaps(mesh)
        n_interior_spatial = mesh.base.n_nodes - len(mesh.base.boundary_nodes)
        assert maps.n_u == n_interior_spatial * mesh.n_slices
        assert maps.n_p == n_interior_spatial * (mesh.n_slices + 1)
        assert maps.n_p - maps.n_u == n_interior_spatial
        assert set(maps.u_dofs) <= set(maps.p_dofs)


class TestFixedBlocks:
    def test_single_tet_mass_matrix(self):
        nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        base = Mesh2D(nodes, [(0, 1, 2)], ["a"])
        mesh = extrude_spacetime(base, 1, 1.0)
        maps = StDofMaps(
            u_dofs=np.arange(mesh.n_nodes), p_dofs=np.arange(mesh.n_nodes)
        )
        fixed = assemble_st_fixed(mesh, maps, {"a": 0.0}, {})
        m = fixed.m_mat.toarray()
        # global mass of the prism: assemble the exact V/20 (ones + I) per tet
        want = np.zeros((6, 6))
        for tet, vol in zip(mesh.tets, mesh.volumes):
            for i, gi in enumerate(tet):
                for j, gj in enumerate(tet):
                    want[gi, gj] += vol / 20.0 * (1.0 + (i == j))
        np.testing.assert_allclose(m, want, rtol=1e-13)
        # and each element block is exactly (V/20)(ones) + (V/20) I
        assert m.sum() == pytest.approx(mesh.volumes.sum(), rel=1e-13)

    def test_zero_conductivity_kills_b(self):
        mesh = square_st(2, 2)
        maps = st_dofmaps(mesh)
        fixed = assemble_st_fixed(mesh, maps, {"a": 0.0}, {})
        assert np.all(fixed.b_mat.toarray() == 0.0)

    def test_bt_reproduces_unit_time_derivative(self):
        # u = t globally: Bt u equals the integrals of the test functions
        mesh = square_st(2, 3, t_final=0.9)
        full = np.arange(mesh.n_nodes)
        maps = StDofMaps(u_dofs=full, p_dofs=full)
        fixed = assemble_st_fixed(mesh, maps, {"a": 0.0}, {})
        u_t = mesh.nodes[:, 2]
        got = fixed.bt_mat.to_scipy() @ u_t
        want = np.zeros(mesh.n_nodes)
        for tet, vol in zip(mesh.tets, mesh.volumes):
            want[tet] += vol / 4.0
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_mass_spd_dense(self):
        mesh = square_st(3, 3)  # 64 nodes
        maps = st_dofmaps(mesh)
        fixed = assemble_st_fixed(mesh, maps, {"a": 1.0}, {})
        m = fixed.m_mat.toarray()
        assert np.max(np.abs(m - m.T)) <= 1e-15
        assert np.linalg.eigvalsh(m).min() > 0.0

    def test_p1_time_derivative_exactness(self):
        # p = M^{-1} Bt u reproduces the constant rate of u = t exactly
        mesh = square_st(2, 2, t_final=2.0)
        full = np.arange(mesh.n_nodes)
        maps = StDofMaps(u_dofs=full, p_dofs=full)
        fixed = assemble_st_fixed(mesh, maps, {"a": 0.0}, {})
        rhs = fixed.bt_mat.to_scipy() @ mesh.nodes[:, 2]
        p = solve_linear(fixed.m_mat, rhs)
        np.testing.assert_allclose(p, np.ones(mesh.n_nodes), rtol=1e-10)


class TestNonlinearBlocks:
    def test_zero_state_linear_region(self):
        mesh = square_st(2, 2)
        maps = st_dofmaps(mesh)
        mats = {"a": LINEAR}
        k, a, tf, tg = assemble_st_nonlinear(
            mesh, maps, np.zeros(maps.n_u), np.zeros(maps.n_p), mats
        )
        # K carries the p0 weight, A the g(0) weight, on the same spatial form
        np.testing.assert_allclose(k.toarray(), tf.toarray(), rtol=1e-13)
        np.testing.assert_allclose(a.toarray(), tg.toarray(), rtol=1e-13)
        u_cols = _p_to_u_cols(maps)
        g0 = LINEAR.p3 + LINEAR.p4 / LINEAR.p5
        np.testing.assert_allclose(
            a.toarray()[:, u_cols] / g0,
            k.toarray() / LINEAR.p0,
            rtol=1e-12,
            atol=1e-15,
        )

    def test_time_only_variation_uses_f0(self):
        # u varying only in t has zero spatial gradient everywhere
        mesh = square_st(2, 2)
        full = np.arange(mesh.n_nodes)
        maps = StDofMaps(u_dofs=full, p_dofs=full)
        mats = {"a": IRON}
        u_t = mesh.nodes[:, 2].copy()
        k_t, _, _, _ = assemble_st_nonlinear(mesh, maps, u_t, np.zeros(maps.n_p), mats)
        k_0, _, _, _ = assemble_st_nonlinear(
            mesh, maps, np.zeros(maps.n_u), np.zeros(maps.n_p), mats
        )
        np.testing.assert_allclose(k_t.toarray(), k_0.toarray(), rtol=1e-13)

    def test_residual_trivial_zero(self):
        mesh = square_st(2, 2)
        maps = st_dofmaps(mesh)
        fixed = assemble_st_fixed(mesh, maps, {"a": 1.0}, {})
        k, a, _, _ = assemble_st_nonlinear(
            mesh, maps, np.zeros(maps.n_u), np.zeros(maps.n_p), {"a": IRON}
        )
        r1, r2 = st_residual(np.zeros(maps.n_u), np.zeros(maps.n_p), fixed, k, a)
        assert np.all(r1 == 0.0) and np.all(r2 == 0.0)

    def test_r2_definition(self):
        mesh = square_st(2, 2)
        maps = st_dofmaps(mesh)
        fixed = assemble_st_fixed(mesh, maps, {"a": 1.0}, {})
        rng = np.random.default_rng(5)
        u = rng.normal(size=maps.n_u)
        p = solve_linear(fixed.m_mat, fixed.bt_mat.to_scipy() @ u)
        k, a, _, _ = assemble_st_nonlinear(mesh, maps, u, p, {"a": IRON})
        _, r2 = st_residual(u, p, fixed, k, a)
        assert np.linalg.norm(r2) <= 1e-10 * (1.0 + np.linalg.norm(u))


class TestBlockJacobianFD:
    def test_two_triangle_two_slice_fd(self):
        # smallest space-time mesh; unrestricted maps keep unknowns nonempty
        mesh = square_st(1, 2, t_final=0.5)
        maps = all_node_dofmaps(mesh)
        mats = {"a": IRON}
        fixed = assemble_st_fixed(mesh, maps, {"a": 0.01}, {})
        rng = np.random.default_rng(99)

        def stacked_residual(x):
            u, p = x[: maps.n_u], x[maps.n_u :]
            k, a, _, _ = assemble_st_nonlinear(mesh, maps, u, p, mats)
            r1, r2 = st_residual(u, p, fixed, k, a)
            return np.concatenate([r1, r2])

        for _ in range(3):
            u = 0.1 * rng.standard_normal(maps.n_u)
            p = 0.1 * rng.standard_normal(maps.n_p)
            _, _, tf, tg = assemble_st_nonlinear(mesh, maps, u, p, mats)
            n = maps.n_u + maps.n_p
            jac = np.zeros((n, n))
            jac[: maps.n_u, : maps.n_u] = fixed.b_mat.toarray() + tf.toarray()
            jac[: maps.n_u, maps.n_u :] = tg.toarray()
            jac[maps.n_u :, : maps.n_u] = -fixed.bt_mat.toarray()
            jac[maps.n_u :, maps.n_u :] = fixed.m_mat.toarray()
            x0 = np.concatenate([u, p])
            fd = np.empty((n, n))
            eps = 1e-6
            for col in range(n):
                e = np.zeros(n)
                e[col] = eps
                fd[:, col] = (stacked_residual(x0 + e) - stacked_residual(x0 - e)) / (2 * eps)
            assert np.linalg.norm(jac - fd) / np.linalg.norm(fd) <= 1e-5


class TestSolve:
    def test_zero_excitation(self):
        mesh = square_st(2, 2)
        problem = build_spacetime_problem(mesh, {"a": 1.0}, {"a": IRON}, {})
        sol = solve_spacetime(problem)
        assert sol.report.converged
        assert sol.report.iterations == 0
        assert np.all(sol.u == 0.0) and np.all(sol.p == 0.0)

    def test_linear_dense_monolithic_oracle(self):
        mesh = square_st(2, 2, t_final=0.6)
        mats = {"a": LINEAR}
        problem = build_spacetime_problem(
            mesh, {"a": 1.0}, mats, {"a": lambda t: np.sin(2.0 * np.pi * t) + 0.5}
        )
        sol = solve_spacetime(problem)
        assert sol.report.iterations == 1
        maps = problem.dofmaps
        fixed = problem.fixed
        k, a, _, _ = assemble_st_nonlinear(
            mesh, maps, np.zeros(maps.n_u), np.zeros(maps.n_p), mats
        )
        n = maps.n_u + maps.n_p
        big = np.zeros((n, n))
        big[: maps.n_u, : maps.n_u] = fixed.b_mat.toarray() + k.toarray()
        big[: maps.n_u, maps.n_u :] = a.toarray()
        big[maps.n_u :, : maps.n_u] = -fixed.bt_mat.toarray()
        big[maps.n_u :, maps.n_u :] = fixed.m_mat.toarray()
        rhs = np.concatenate([fixed.load, np.zeros(maps.n_p)])
        x = np.linalg.solve(big, rhs)
        np.testing.assert_allclose(sol.u, x[: maps.n_u], atol=1e-10)
        np.testing.assert_allclose(sol.p, x[maps.n_u :], atol=1e-10)

    def test_schur_equivalence_after_convergence(self):
        mesh = square_st(3, 4, t_final=1.0)
        problem = build_spacetime_problem(
            mesh, {"a": 0.01}, {"a": IRON}, {"a": lambda t: 50.0 * np.sin(2.0 * np.pi * t)}
        )
        sol = solve_spacetime(problem)
        assert sol.report.converged
        assert sol.schur_residual <= 1e-9 * (1.0 + np.linalg.norm(sol.u))

    def test_nonlinear_run_final_steps_undamped(self):
        mesh = square_st(3, 4, t_final=1.0)
        problem = build_spacetime_problem(
            mesh, {"a": 0.01}, {"a": IRON}, {"a": lambda t: 100.0 * np.sin(2.0 * np.pi * t)}
        )
        sol = solve_spacetime(problem)
        assert sol.report.converged
        assert all(a == 1.0 for a in sol.report.step_sizes[-2:])


class TestExtractSlice:
    def test_slice_zero_is_initial_condition(self):
        mesh = square_st(2, 3)
        problem = build_spacetime_problem(
            mesh, {"a": 1.0}, {"a": LINEAR}, {"a": lambda t: np.cos(t)}
        )
        sol = solve_spacetime(problem)
        s0 = extract_slice(sol, mesh, problem.dofmaps, 0)
        assert np.all(s0 == 0.0)
        s_last = extract_slice(sol, mesh, problem.dofmaps, mesh.n_slices)
        assert np.any(s_last != 0.0)
        boundary = mesh.base.boundary_nodes
        assert np.all(s_last[boundary] == 0.0)

    def test_out_of_range(self):
        mesh = square_st(2, 2)
        problem = build_spacetime_problem(mesh, {"a": 1.0}, {"a": LINEAR}, {})
        sol = solve_spacetime(problem)
        with pytest.raises(IndexError):
            extract_slice(sol, mesh, problem.dofmaps, 5)


def test_st_load_from_nodal_constant_source():
    # constant source: load equals volume weights |q|/4 accumulated per node
    mesh = square_st(2, 2, t_final=0.8)
    maps = st_dofmaps(mesh)
    load = st_load_from_nodal(mesh, maps, np.ones(mesh.n_nodes))
    want = np.zeros(mesh.n_nodes)
    for tet, vol in zip(mesh.tets, mesh.volumes):
        want[tet] += vol / 4.0
    np.testing.assert_allclose(load, want[maps.u_dofs], rtol=1e-12)


def _p_to_u_cols(maps):
    return np.searchsorted(maps.p_dofs, maps.u_dofs)
