"""P1 finite element assembly on 2D triangular meshes.

All data (conductivity, source, magnetization, material parameters) is
region-constant, so every element integral below is exact.  Homogeneous
Dirichlet conditions are imposed by restricting rows and columns to the
interior (free) nodes.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .material import ANHYSTERETIC, FloatArray, PamParams, f_array, g_array, tangent_array
from .mesh import Mesh2D
from .sparsela import CsrMatrix


@dataclasses.dataclass(frozen=True)
class DofMap2D:
    """Free (interior) degrees of freedom of a mesh.

    free_dofs: node indices carrying unknowns, ascending
    node_to_dof: per-node dof index, -1 on the Dirichlet boundary
    """

    free_dofs: np.ndarray
    node_to_dof: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    def expand(self, u_free: FloatArray) -> FloatArray:
        """Pad a free-dof vector with boundary zeros to all nodes."""
        full = np.zeros(len(self.node_to_dof))
        full[self.free_dofs] = u_free
        return full


def interior_dofmap(mesh: Mesh2D) -> DofMap2D:
    mask = np.ones(mesh.n_nodes, dtype=bool)
    mask[mesh.boundary_nodes] = False
    free = np.flatnonzero(mask)
    node_to_dof = np.full(mesh.n_nodes, -1, dtype=np.int64)
    node_to_dof[free] = np.arange(len(free))
    return DofMap2D(free_dofs=free, node_to_dof=node_to_dof)


@dataclasses.dataclass(frozen=True)
class ElementFields:
    """Per-triangle constant gradients of the current iterates."""

    grad_u: FloatArray
    grad_w: FloatArray


def element_gradients(mesh: Mesh2D, u_full: FloatArray) -> FloatArray:
    """Constant per-triangle gradient of a nodal P1 function, shape (m, 2)."""
    u_full = np.asarray(u_full, dtype=float)
    if u_full.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got {u_full.shape}")
    return np.einsum("ei,eia->ea", u_full[mesh.triangles], mesh.basis_gradients)


def flux_density(grads: FloatArray) -> FloatArray:
    """Rotate gradients into flux densities: B = (d2 u, -d1 u)."""
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    return np.column_stack([grads[:, 1], -grads[:, 0]])


def tag_groups(mesh: Mesh2D) -> dict[str, np.ndarray]:
    return {tag: np.flatnonzero(mesh.tags == tag) for tag in np.unique(mesh.tags)}


def region_values(mesh: Mesh2D, values: Mapping[str, float], default: float = 0.0) -> FloatArray:
    """Per-triangle array from a region-tag dictionary."""
    out = np.full(mesh.n_triangles, default)
    for tag, idx in tag_groups(mesh).items():
        if tag in values:
            out[idx] = values[tag]
    return out


def material_weights(
    mesh: Mesh2D, grads: FloatArray, kind: str, materials: Mapping[str, PamParams]
) -> FloatArray:
    """Per-triangle f(|grad|) or g(|grad|) for region-wise PAM parameters."""
    s = np.linalg.norm(grads, axis=1)
    w = np.empty(mesh.n_triangles)
    for tag, idx in tag_groups(mesh).items():
        params = materials[tag]
        if kind == ANHYSTERETIC:
            w[idx] = f_array(s[idx], params)
        else:
            w[idx] = g_array(s[idx], params)
    return w


def _restrict(a: sp.spmatrix, dofmap: DofMap2D | None) -> CsrMatrix:
    a = sp.csr_matrix(a)
    if dofmap is not None:
        a = a[dofmap.free_dofs][:, dofmap.free_dofs]
    return CsrMatrix.from_scipy(a)


def _scatter(mesh: Mesh2D, element_matrices: FloatArray) -> sp.coo_matrix:
    """Accumulate (m, 3, 3) element matrices into the global n x n pattern."""
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return sp.coo_matrix(
        (element_matrices.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    )


_MASS_LOCAL = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_mass(
    mesh: Mesh2D, sigma: Mapping[str, float], dofmap: DofMap2D | None = None
) -> CsrMatrix:
    """Conductivity-weighted P1 mass matrix: M[j,k] = sum sigma |tau|/12 (1+delta)."""
    sig = region_values(mesh, sigma)
    if np.any(sig < 0):
        raise ValueError("conductivities must be >= 0")
    elem = (sig * mesh.areas)[:, None, None] * _MASS_LOCAL
    return _restrict(_scatter(mesh, elem), dofmap)


def assemble_weighted_stiffness(
    mesh: Mesh2D, weights: FloatArray, dofmap: DofMap2D | None = None
) -> CsrMatrix:
    """Stiffness with per-triangle scalar weights: sum w |tau| grad phi_k . grad phi_j."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (mesh.n_triangles,):
        raise ValueError(f"one weight per triangle required, got {weights.shape}")
    g = mesh.basis_gradients
    elem = np.einsum("e,eia,eja->eij", weights * mesh.areas, g, g)
    return _restrict(_scatter(mesh, elem), dofmap)


def assemble_tangent(
    mesh: Mesh2D,
    v_full: FloatArray,
    kind: str,
    materials: Mapping[str, PamParams],
    dofmap: DofMap2D | None = None,
) -> CsrMatrix:
    """Analytic tangent of the flux form at iterate v.

    T[j,k] = sum_tau |tau| grad phi_j . (d/dv [c(|v|) v]) grad phi_k with the
    per-element 2x2 tensor from the material model; symmetric positive
    definite on the free dofs.
    """
    grads = element_gradients(mesh, v_full)
    tensors = np.empty((mesh.n_triangles, 2, 2))
    for tag, idx in tag_groups(mesh).items():
        tensors[idx] = tangent_array(kind, grads[idx], materials[tag])
    g = mesh.basis_gradients
    elem = np.einsum("e,eia,eab,ejb->eij", mesh.areas, g, tensors, g)
    return _restrict(_scatter(mesh, elem), dofmap)


def assemble_load(
    mesh: Mesh2D,
    t: float,
    excitation: Mapping[str, Callable[[float], float]],
    m_perp: Mapping[str, FloatArray] | None = None,
    dofmap: DofMap2D | None = None,
) -> FloatArray:
    """Load vector F_j = sum_tau [ j_s |tau|/3 per vertex + |tau| Mperp . grad phi_j ].

    excitation maps region tags to time evaluators; regions absent from the
    mappings contribute nothing.
    """
    load = np.zeros(mesh.n_nodes)
    groups = tag_groups(mesh)
    for tag, evaluator in excitation.items():
        idx = groups.get(tag)
        if idx is None or len(idx) == 0:
            continue
        js = float(evaluator(t))
        contrib = js * mesh.areas[idx] / 3.0
        np.add.at(load, mesh.triangles[idx].ravel(), np.repeat(contrib, 3))
    if m_perp:
        for tag, vec in m_perp.items():
            idx = groups.get(tag)
            if idx is None or len(idx) == 0:
                continue
            vec = np.asarray(vec, dtype=float)
            if not np.any(vec):
                continue
            contrib = mesh.areas[idx, None] * (mesh.basis_gradients[idx] @ vec)
            np.add.at(load, mesh.triangles[idx].ravel(), contrib.ravel())
    if dofmap is not None:
        return load[dofmap.free_dofs]
    return load
