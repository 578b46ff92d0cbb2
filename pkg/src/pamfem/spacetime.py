"""Monolithic space-time engine on tetrahedral extrusions.

The second-order-in-space weak form is split with the auxiliary field
p = du/dt, giving the coupled block system

    [ B + K(u)   A(p) ] [u]   [F]
    [   -Bt       M   ] [p] = [0]

on P1 space-time elements: u vanishes on the lateral boundary and at the
initial time, p only on the lateral boundary.  One damped Newton iteration
on the stacked unknown solves the whole time cylinder at once; eliminating
p with the invertible mass matrix M recovers the reduced form
[B + K(u) + A(p) M^{-1} Bt] u = F, which the converged pair satisfies up
to linear-solve tolerance.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .material import ANHYSTERETIC, DYNAMIC, FloatArray, PamParams, f_array, g_array, tangent_array
from .mesh import SpaceTimeMesh
from .sparsela import CsrMatrix, NewtonSettings, SolveReport, newton_solve


@dataclasses.dataclass(frozen=True)
class StDofMaps:
    """Unknown maps of the two space-time fields.

    u_dofs: nodes excluding lateral and initial nodes
    p_dofs: nodes excluding lateral nodes only
    """

    u_dofs: np.ndarray
    p_dofs: np.ndarray

    @property
    def n_u(self) -> int:
        return len(self.u_dofs)

    @property
    def n_p(self) -> int:
        return len(self.p_dofs)

    def expand_u(self, u: FloatArray, n_nodes: int) -> FloatArray:
        full = np.zeros(n_nodes)
        full[self.u_dofs] = u
        return full

    def expand_p(self, p: FloatArray, n_nodes: int) -> FloatArray:
        full = np.zeros(n_nodes)
        full[self.p_dofs] = p
        return full


def st_dofmaps(mesh: SpaceTimeMesh) -> StDofMaps:
    lateral = set(int(n) for n in mesh.lateral_nodes)
    initial = set(int(n) for n in mesh.initial_nodes)
    u_dofs = np.array(
        [n for n in range(mesh.n_nodes) if n not in lateral and n not in initial],
        dtype=np.int64,
    )
    p_dofs = np.array(
        [n for n in range(mesh.n_nodes) if n not in lateral], dtype=np.int64
    )
    return StDofMaps(u_dofs=u_dofs, p_dofs=p_dofs)


def _tet_groups(mesh: SpaceTimeMesh) -> dict[str, np.ndarray]:
    return {tag: np.flatnonzero(mesh.tags == tag) for tag in np.unique(mesh.tags)}


def _scatter(
    mesh: SpaceTimeMesh,
    elem: FloatArray,
    rows: np.ndarray | None,
    cols: np.ndarray | None,
) -> CsrMatrix:
    """Accumulate (n_tets, 4, 4) blocks and restrict to row/col dof lists."""
    tets = mesh.tets
    r = np.repeat(tets, 4, axis=1).ravel()
    c = np.tile(tets, (1, 4)).ravel()
    a = sp.coo_matrix(
        (elem.ravel(), (r, c)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    if rows is not None:
        a = a[rows]
    if cols is not None:
        a = a[:, cols]
    return CsrMatrix.from_scipy(a)


def _spatial_gradients(mesh: SpaceTimeMesh, values_full: FloatArray) -> FloatArray:
    """Per-tet constant (d/dx1, d/dx2) of a nodal space-time P1 function."""
    return np.einsum(
        "ei,eia->ea", values_full[mesh.tets], mesh.basis_gradients[:, :, :2]
    )


def _weights(
    mesh: SpaceTimeMesh, grads: FloatArray, kind: str, materials: Mapping[str, PamParams]
) -> FloatArray:
    s = np.linalg.norm(grads, axis=1)
    w = np.empty(mesh.n_tets)
    for tag, idx in _tet_groups(mesh).items():
        params = materials[tag]
        w[idx] = f_array(s[idx], params) if kind == ANHYSTERETIC else g_array(s[idx], params)
    return w


_MASS_LOCAL_TET = (np.ones((4, 4)) + np.eye(4)) / 20.0


@dataclasses.dataclass(frozen=True)
class StFixedBlocks:
    """State-independent operators of the block system."""

    b_mat: CsrMatrix        # sigma-weighted du/dt coupling, u-rows x u-cols
    m_mat: CsrMatrix        # space-time mass, p-rows x p-cols
    bt_mat: CsrMatrix       # unweighted du/dt coupling, p-rows x u-cols
    load: FloatArray        # u-rows


def assemble_st_fixed(
    mesh: SpaceTimeMesh,
    dofmaps: StDofMaps,
    sigma: Mapping[str, float],
    excitation: Mapping[str, Callable[[FloatArray], FloatArray]],
    m_perp: Mapping[str, FloatArray] | None = None,
) -> StFixedBlocks:
    """Assemble B, M, Bt and the load on the restricted dof sets.

    The time-derivative blocks use that dphi/dt is constant per tet and
    int phi = V/4; the mass matrix is the exact P1 tet mass V/20 (1+delta).
    The source is evaluated at each tet's temporal centroid.
    """
    groups = _tet_groups(mesh)
    vols = mesh.volumes
    gt = mesh.basis_gradients[:, :, 2]

    sig = np.zeros(mesh.n_tets)
    for tag, idx in groups.items():
        sig[idx] = sigma.get(tag, 0.0)
    if np.any(sig < 0):
        raise ValueError("conductivities must be >= 0")

    quarter = vols[:, None] / 4.0
    dt_blocks = quarter[:, :, None] * gt[:, None, :] * np.ones((1, 4, 1))
    b_elem = sig[:, None, None] * dt_blocks
    bt_elem = dt_blocks
    m_elem = vols[:, None, None] * _MASS_LOCAL_TET

    b_mat = _scatter(mesh, b_elem, dofmaps.u_dofs, dofmaps.u_dofs)
    m_mat = _scatter(mesh, m_elem, dofmaps.p_dofs, dofmaps.p_dofs)
    bt_mat = _scatter(mesh, bt_elem, dofmaps.p_dofs, dofmaps.u_dofs)

    load = np.zeros(mesh.n_nodes)
    t_cent = mesh.nodes[mesh.tets, 2].mean(axis=1)
    for tag, evaluator in excitation.items():
        idx = groups.get(tag)
        if idx is None or len(idx) == 0:
            continue
        js = np.asarray(evaluator(t_cent[idx]), dtype=float)
        if js.shape == ():
            js = np.full(len(idx), float(js))
        contrib = js * vols[idx] / 4.0
        np.add.at(load, mesh.tets[idx].ravel(), np.repeat(contrib, 4))
    if m_perp:
        gx = mesh.basis_gradients[:, :, :2]
        for tag, vec in m_perp.items():
            idx = groups.get(tag)
            if idx is None or len(idx) == 0:
                continue
            vec = np.asarray(vec, dtype=float)
            if not np.any(vec):
                continue
            contrib = vols[idx, None] * (gx[idx] @ vec)
            np.add.at(load, mesh.tets[idx].ravel(), contrib.ravel())

    return StFixedBlocks(
        b_mat=b_mat, m_mat=m_mat, bt_mat=bt_mat, load=load[dofmaps.u_dofs]
    )


def st_load_from_nodal(
    mesh: SpaceTimeMesh, dofmaps: StDofMaps, source_nodal: FloatArray
) -> FloatArray:
    """Consistent load of a nodal P1 source field on the u test space.

    Applies the unrestricted space-time mass to the coefficients, which is
    exact for sources interpolated into the P1 space (used by manufactured
    solution runs; scenario sources go through assemble_st_fixed instead).
    """
    source_nodal = np.asarray(source_nodal, dtype=float)
    if source_nodal.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got {source_nodal.shape}")
    elem = mesh.volumes[:, None, None] * _MASS_LOCAL_TET
    local = np.einsum("eij,ej->ei", elem, source_nodal[mesh.tets])
    full = np.zeros(mesh.n_nodes)
    np.add.at(full, mesh.tets.ravel(), local.ravel())
    return full[dofmaps.u_dofs]


def _st_weighted_matrices(
    mesh: SpaceTimeMesh,
    dofmaps: StDofMaps,
    u_full: FloatArray,
    p_full: FloatArray,
    materials: Mapping[str, PamParams],
) -> tuple[CsrMatrix, CsrMatrix]:
    """K(u) on u x u and A(p) on u x p, weighted by f resp. g of the
    spatial gradient magnitudes."""
    gx = mesh.basis_gradients[:, :, :2]
    wk = _weights(mesh, _spatial_gradients(mesh, u_full), ANHYSTERETIC, materials)
    wa = _weights(mesh, _spatial_gradients(mesh, p_full), DYNAMIC, materials)
    k_elem = np.einsum("e,eia,eja->eij", wk * mesh.volumes, gx, gx)
    a_elem = np.einsum("e,eia,eja->eij", wa * mesh.volumes, gx, gx)
    k_mat = _scatter(mesh, k_elem, dofmaps.u_dofs, dofmaps.u_dofs)
    a_mat = _scatter(mesh, a_elem, dofmaps.u_dofs, dofmaps.p_dofs)
    return k_mat, a_mat


def _st_tangents(
    mesh: SpaceTimeMesh,
    dofmaps: StDofMaps,
    u_full: FloatArray,
    p_full: FloatArray,
    materials: Mapping[str, PamParams],
) -> tuple[CsrMatrix, CsrMatrix]:
    gx = mesh.basis_gradients[:, :, :2]
    gu = _spatial_gradients(mesh, u_full)
    gp = _spatial_gradients(mesh, p_full)
    tf = np.empty((mesh.n_tets, 2, 2))
    tg = np.empty((mesh.n_tets, 2, 2))
    for tag, idx in _tet_groups(mesh).items():
        params = materials[tag]
        tf[idx] = tangent_array(ANHYSTERETIC, gu[idx], params)
        tg[idx] = tangent_array(DYNAMIC, gp[idx], params)
    tf_elem = np.einsum("e,eia,eab,ejb->eij", mesh.volumes, gx, tf, gx)
    tg_elem = np.einsum("e,eia,eab,ejb->eij", mesh.volumes, gx, tg, gx)
    tf_mat = _scatter(mesh, tf_elem, dofmaps.u_dofs, dofmaps.u_dofs)
    tg_mat = _scatter(mesh, tg_elem, dofmaps.u_dofs, dofmaps.p_dofs)
    return tf_mat, tg_mat


def assemble_st_nonlinear(
    mesh: SpaceTimeMesh,
    dofmaps: StDofMaps,
    u: FloatArray,
    p: FloatArray,
    materials: Mapping[str, PamParams],
) -> tuple[CsrMatrix, CsrMatrix, CsrMatrix, CsrMatrix]:
    """State-dependent blocks (K(u), A(p), T_f(u), T_g(p)) at restricted
    coefficients u, p (eliminated dofs implicitly zero)."""
    u_full = dofmaps.expand_u(u, mesh.n_nodes)
    p_full = dofmaps.expand_p(p, mesh.n_nodes)
    k_mat, a_mat = _st_weighted_matrices(mesh, dofmaps, u_full, p_full, materials)
    tf_mat, tg_mat = _st_tangents(mesh, dofmaps, u_full, p_full, materials)
    return k_mat, a_mat, tf_mat, tg_mat


def st_residual(
    u: FloatArray,
    p: FloatArray,
    fixed: StFixedBlocks,
    k_mat: CsrMatrix,
    a_mat: CsrMatrix,
) -> tuple[FloatArray, FloatArray]:
    """Block residuals R1 = (B + K(u)) u + A(p) p - F and R2 = M p - Bt u."""
    r1 = fixed.b_mat.to_scipy() @ u + k_mat.to_scipy() @ u + a_mat.to_scipy() @ p - fixed.load
    r2 = fixed.m_mat.to_scipy() @ p - fixed.bt_mat.to_scipy() @ u
    return r1, r2


@dataclasses.dataclass
class SpaceTimeProblem:
    """Discretized scenario for the space-time engine."""

    mesh: SpaceTimeMesh
    dofmaps: StDofMaps
    materials: Mapping[str, PamParams]
    fixed: StFixedBlocks


def build_spacetime_problem(
    mesh: SpaceTimeMesh,
    sigma: Mapping[str, float],
    materials: Mapping[str, PamParams],
    excitation: Mapping[str, Callable[[FloatArray], FloatArray]],
    m_perp: Mapping[str, FloatArray] | None = None,
) -> SpaceTimeProblem:
    dofmaps = st_dofmaps(mesh)
    fixed = assemble_st_fixed(mesh, dofmaps, sigma, excitation, m_perp)
    return SpaceTimeProblem(mesh=mesh, dofmaps=dofmaps, materials=materials, fixed=fixed)


@dataclasses.dataclass
class SpaceTimeSolution:
    """Converged coefficients of both fields plus the Newton report."""

    u: FloatArray
    p: FloatArray
    report: SolveReport
    schur_residual: float


class SpacetimeFailure(RuntimeError):
    """Newton failed to converge on the space-time system."""

    def __init__(self, report: SolveReport) -> None:
        super().__init__(
            f"space-time Newton did not converge: {report.iterations} iterations, "
            f"residual {report.residual_history[-1]:.3e}"
        )
        self.report = report


def solve_spacetime(
    problem: SpaceTimeProblem,
    settings: NewtonSettings = NewtonSettings(),
    raise_on_failure: bool = True,
) -> SpaceTimeSolution:
    """Damped Newton on the stacked unknown (u, p) from the zero iterate."""
    mesh, dofmaps, fixed = problem.mesh, problem.dofmaps, problem.fixed
    n_u = dofmaps.n_u

    def split(x: FloatArray) -> tuple[FloatArray, FloatArray]:
        return x[:n_u], x[n_u:]

    def residual(x: FloatArray) -> FloatArray:
        u, p = split(x)
        u_full = dofmaps.expand_u(u, mesh.n_nodes)
        p_full = dofmaps.expand_p(p, mesh.n_nodes)
        k_mat, a_mat = _st_weighted_matrices(
            mesh, dofmaps, u_full, p_full, problem.materials
        )
        r1, r2 = st_residual(u, p, fixed, k_mat, a_mat)
        return np.concatenate([r1, r2])

    def jacobian(x: FloatArray) -> CsrMatrix:
        u, p = split(x)
        u_full = dofmaps.expand_u(u, mesh.n_nodes)
        p_full = dofmaps.expand_p(p, mesh.n_nodes)
        tf_mat, tg_mat = _st_tangents(mesh, dofmaps, u_full, p_full, problem.materials)
        j = sp.bmat(
            [
                [fixed.b_mat.to_scipy() + tf_mat.to_scipy(), tg_mat.to_scipy()],
                [-fixed.bt_mat.to_scipy(), fixed.m_mat.to_scipy()],
            ],
            format="csr",
        )
        return CsrMatrix.from_scipy(j)

    x0 = np.zeros(dofmaps.n_u + dofmaps.n_p)
    x, report = newton_solve(residual, jacobian, x0, settings)
    if raise_on_failure and not report.converged:
        raise SpacetimeFailure(report)
    u, p = split(x)
    schur = float(
        np.linalg.norm(fixed.m_mat.to_scipy() @ p - fixed.bt_mat.to_scipy() @ u)
    )
    return SpaceTimeSolution(u=u, p=p, report=report, schur_residual=schur)


def extract_slice(
    sol: SpaceTimeSolution,
    mesh: SpaceTimeMesh,
    dofmaps: StDofMaps,
    slice_id: int,
    field: str = "u",
) -> FloatArray:
    """Spatial nodal values of u (or p) at one time slice, zeros on
    eliminated dofs."""
    if not 0 <= slice_id <= mesh.n_slices:
        raise IndexError(f"slice {slice_id} out of range 0..{mesh.n_slices}")
    if field == "u":
        full = dofmaps.expand_u(sol.u, mesh.n_nodes)
    elif field == "p":
        full = dofmaps.expand_p(sol.p, mesh.n_nodes)
    else:
        raise ValueError(f"unknown field {field!r}")
    n_sp = mesh.n_spatial
    return full[slice_id * n_sp : (slice_id + 1) * n_sp]
