"""Triangular meshes and their space-time tetrahedral extrusions.

All meshes are structured: the unit-square builders grid (0,1)^2, the
transformer builder grids an axis-aligned block layout, and the space-time
mesh extrudes a 2D mesh through uniform time slices, splitting each prism
into three tetrahedra with the ascending-global-index diagonal rule so that
neighbouring prisms share matching faces.
"""

from __future__ import annotations

import dataclasses
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .material import FloatArray

_BARY_TOL = 1e-12


class PointOutsideDomainError(ValueError):
    """Raised when a probe point lies in no triangle of the mesh."""


class Mesh2D:
    """Conforming triangulation with per-triangle region tags.

    nodes: (n_nodes, 2) coordinates [m]
    triangles: (n_triangles, 3) node indices, counterclockwise
    tags: length n_triangles region names
    boundary_nodes: sorted indices of nodes on the domain boundary
    (derived from the edges that belong to exactly one triangle)

    Instances are treated as immutable once built and are safe to share
    across threads; geometry caches fill in lazily on first use.
    """

    def __init__(self, nodes, triangles, tags: Sequence[str]) -> None:
        self.nodes = np.asarray(nodes, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.tags = np.asarray(tags, dtype=object)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise ValueError(f"nodes must be (n, 2), got {self.nodes.shape}")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError(f"triangles must be (m, 3), got {self.triangles.shape}")
        if len(self.tags) != len(self.triangles):
            raise ValueError("one tag per triangle required")
        if np.any(self.areas <= 0.0):
            bad = int(np.argmin(self.areas))
            raise ValueError(f"triangle {bad} has non-positive area {self.areas[bad]}")
        used = np.unique(self.triangles)
        if len(used) != len(self.nodes):
            raise ValueError("mesh contains nodes not referenced by any triangle")
        self.boundary_nodes = self._find_boundary_nodes()

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> FloatArray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self) -> FloatArray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def basis_gradients(self) -> FloatArray:
        """Constant P1 basis gradients, shape (n_triangles, 3, 2).

        basis_gradients[e, i] is grad(phi) of local vertex i on triangle e.
        """
        p = self.nodes[self.triangles]
        grads = np.empty((self.n_triangles, 3, 2))
        two_a = 2.0 * self.areas
        # grad lambda_i = perp(opposite edge) / (2 |tau|), perp = (-dy, dx) rotated
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            edge = p[:, k] - p[:, j]
            grads[:, i, 0] = -edge[:, 1] / two_a
            grads[:, i, 1] = edge[:, 0] / two_a
        return grads

    def edge_counts(self) -> dict[tuple[int, int], int]:
        """Number of triangles adjacent to each (sorted) edge."""
        counts: dict[tuple[int, int], int] = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (int(min(a, b)), int(max(a, b)))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def _find_boundary_nodes(self) -> np.ndarray:
        on_boundary = set()
        for (a, b), count in self.edge_counts().items():
            if count == 1:
                on_boundary.add(a)
                on_boundary.add(b)
        return np.array(sorted(on_boundary), dtype=np.int64)

    def region_area(self, tag: str) -> float:
        return float(self.areas[self.tags == tag].sum())


def build_structured_square(n: int, classifier: Callable[[float, float], str]) -> Mesh2D:
    """Uniform n x n grid on (0,1)^2, each cell split along the same diagonal.

    The region tag of every triangle is classifier(cx, cy) at its centroid.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(ix: int, iy: int) -> int:
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            a, b = nid(ix, iy), nid(ix + 1, iy)
            c, d = nid(ix + 1, iy + 1), nid(ix, iy + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    mesh_tris = np.array(tris, dtype=np.int64)
    centers = nodes[mesh_tris].mean(axis=1)
    tags = [classifier(float(cx), float(cy)) for cx, cy in centers]
    return Mesh2D(nodes, mesh_tris, tags)


def build_layered_square(
    rows: Sequence[int], classifier: Callable[[float, float], str]
) -> Mesh2D:
    """Triangulation of (0,1)^2 from per-row node counts.

    Row i holds rows[i] evenly spaced nodes at height i/(len(rows)-1); the
    strip between consecutive rows is triangulated by a monotone merge of
    the two node sequences, giving rows[i] + rows[i+1] - 2 triangles.  This
    reproduces arbitrary node/triangle count pairs that no uniform grid hits.
    """
    if len(rows) < 2 or any(r < 2 for r in rows):
        raise ValueError("need at least two rows of at least two nodes each")
    n_rows = len(rows)
    ys = np.linspace(0.0, 1.0, n_rows)
    nodes = []
    row_start = []
    for r, count in enumerate(rows):
        row_start.append(len(nodes))
        for x in np.linspace(0.0, 1.0, count):
            nodes.append((x, ys[r]))
    nodes = np.asarray(nodes)

    tris = []
    for r in range(n_rows - 1):
        nb, nt = rows[r], rows[r + 1]
        base_b, base_t = row_start[r], row_start[r + 1]
        xb = np.linspace(0.0, 1.0, nb)
        xt = np.linspace(0.0, 1.0, nt)
        i = j = 0
        while i < nb - 1 or j < nt - 1:
            if j == nt - 1 or (i < nb - 1 and xb[i + 1] <= xt[j + 1]):
                tris.append((base_b + i, base_b + i + 1, base_t + j))
                i += 1
            else:
                tris.append((base_b + i, base_t + j + 1, base_t + j))
                j += 1
    mesh_tris = np.array(tris, dtype=np.int64)
    centers = nodes[mesh_tris].mean(axis=1)
    tags = [classifier(float(cx), float(cy)) for cx, cy in centers]
    return Mesh2D(nodes, mesh_tris, tags)


@dataclasses.dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle (x0, y0) - (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"degenerate rectangle {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def inside(self, other: "Rect") -> bool:
        return (
            other.x0 <= self.x0
            and other.y0 <= self.y0
            and self.x1 <= other.x1
            and self.y1 <= other.y1
        )

    def overlaps(self, other: "Rect") -> bool:
        return (
            self.x0 < other.x1
            and other.x0 < self.x1
            and self.y0 < other.y1
            and other.y0 < self.y1
        )

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclasses.dataclass(frozen=True)
class Team32Layout:
    """Rectilinear stand-in for the three-limb transformer cross section.

    core rectangles (yokes and limbs) are tagged fe, the two winding
    rectangles cu_left / cu_right, everything else in the air box air.
    All rectangle corners must lie on the mesh-size lattice of the air box.
    """

    air_box: Rect
    core: tuple[Rect, ...] = ()
    winding_left: Rect | None = None
    winding_right: Rect | None = None
    h: float = 0.015

    @property
    def windings(self) -> tuple[Rect, ...]:
        return tuple(w for w in (self.winding_left, self.winding_right) if w is not None)

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ValueError(f"mesh size must be > 0, got {self.h}")
        for rect in (*self.core, *self.windings):
            if not rect.inside(self.air_box):
                raise ValueError(f"{rect} extends outside the air box")
        for winding in self.windings:
            for core_rect in self.core:
                if winding.overlaps(core_rect):
                    raise ValueError(f"winding {winding} overlaps core {core_rect}")
        if (
            self.winding_left is not None
            and self.winding_right is not None
            and self.winding_left.overlaps(self.winding_right)
        ):
            raise ValueError("windings overlap each other")


def default_team32_layout(h: float = 0.015) -> Team32Layout:
    """Approximate three-limb core with one winding block in each window.

    Dimensions are placeholders on a 0.36 x 0.30 m air box; the real
    benchmark geometry can be supplied through the scenario configuration.
    """
    core = (
        Rect(0.06, 0.045, 0.30, 0.075),   # bottom yoke
        Rect(0.06, 0.225, 0.30, 0.255),   # top yoke
        Rect(0.06, 0.075, 0.09, 0.225),   # left limb
        Rect(0.165, 0.075, 0.195, 0.225), # center limb
        Rect(0.27, 0.075, 0.30, 0.225),   # right limb
    )
    return Team32Layout(
        air_box=Rect(0.0, 0.0, 0.36, 0.30),
        core=core,
        winding_left=Rect(0.105, 0.075, 0.135, 0.225),
        winding_right=Rect(0.225, 0.075, 0.255, 0.225),
        h=h,
    )


def _on_lattice(value: float, origin: float, h: float) -> bool:
    steps = (value - origin) / h
    return abs(steps - round(steps)) < 1e-9


def build_team32_layout(layout: Team32Layout) -> Mesh2D:
    """Grid the air box at the layout's mesh size and tag cells by block.

    The global structured grid makes the decomposition conforming by
    construction; rectangle corners that miss the lattice are rejected.
    """
    box, h = layout.air_box, layout.h
    for rect in (*layout.core, *layout.windings, box):
        for v, origin in (
            (rect.x0, box.x0),
            (rect.x1, box.x0),
            (rect.y0, box.y0),
            (rect.y1, box.y0),
        ):
            if not _on_lattice(v, origin, h):
                raise ValueError(
                    f"rectangle edge at {v} not on the {h} lattice of the air box"
                )
    nx = round((box.x1 - box.x0) / h)
    ny = round((box.y1 - box.y0) / h)
    xs = np.linspace(box.x0, box.x1, nx + 1)
    ys = np.linspace(box.y0, box.y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(ix: int, iy: int) -> int:
        return iy * (nx + 1) + ix

    def classify(cx: float, cy: float) -> str:
        for rect in layout.core:
            if rect.contains(cx, cy):
                return "fe"
        if layout.winding_left is not None and layout.winding_left.contains(cx, cy):
            return "cu_left"
        if layout.winding_right is not None and layout.winding_right.contains(cx, cy):
            return "cu_right"
        return "air"

    tris, tags = [], []
    for iy in range(ny):
        for ix in range(nx):
            a, b = nid(ix, iy), nid(ix + 1, iy)
            c, d = nid(ix + 1, iy + 1), nid(ix, iy + 1)
            for tri in ((a, b, c), (a, c, d)):
                tris.append(tri)
                cx, cy = nodes[list(tri)].mean(axis=0)
                tags.append(classify(float(cx), float(cy)))
    return Mesh2D(nodes, np.array(tris, dtype=np.int64), tags)


class SpaceTimeMesh:
    """Tetrahedral extrusion of a 2D mesh through uniform time slices.

    Node k of slice s receives index s * n_spatial + k at time s * T / n_slices.
    lateral_nodes are extruded boundary nodes (all slices), initial_nodes the
    slice-0 nodes.
    """

    def __init__(self, base: Mesh2D, n_slices: int, t_final: float) -> None:
        if n_slices < 1:
            raise ValueError(f"n_slices must be >= 1, got {n_slices}")
        if t_final <= 0.0:
            raise ValueError(f"final time must be > 0, got {t_final}")
        self.base = base
        self.n_slices = n_slices
        self.t_final = float(t_final)

        n_sp = base.n_nodes
        times = np.linspace(0.0, t_final, n_slices + 1)
        self.nodes = np.empty((n_sp * (n_slices + 1), 3))
        for s, t in enumerate(times):
            block = slice(s * n_sp, (s + 1) * n_sp)
            self.nodes[block, :2] = base.nodes
            self.nodes[block, 2] = t
        self.slice_times = times
        self.slice_index = np.repeat(np.arange(n_slices + 1), n_sp)

        # Sort each base triangle by global node index once; the staircase
        # split below then puts the same diagonal on both sides of every
        # shared prism face.
        sorted_tris = np.sort(base.triangles, axis=1)
        flipped = self._is_flipped(base, sorted_tris)

        tets = []
        tags = []
        for s in range(n_slices):
            lo, hi = s * n_sp, (s + 1) * n_sp
            b = sorted_tris + lo
            t = sorted_tris + hi
            stack = np.empty((base.n_triangles, 3, 4), dtype=np.int64)
            stack[:, 0] = np.column_stack([b[:, 0], b[:, 1], b[:, 2], t[:, 2]])
            stack[:, 1] = np.column_stack([b[:, 0], b[:, 1], t[:, 2], t[:, 1]])
            stack[:, 2] = np.column_stack([b[:, 0], t[:, 1], t[:, 2], t[:, 0]])
            # flipped base orientation flips all three tets; swap two vertices
            stack[flipped] = stack[flipped][:, :, [0, 1, 3, 2]]
            tets.append(stack.reshape(-1, 4))
            tags.append(np.repeat(base.tags, 3))
        self.tets = np.concatenate(tets, axis=0)
        self.tags = np.concatenate(tags, axis=0)

        self.initial_nodes = np.arange(n_sp, dtype=np.int64)
        self.lateral_nodes = (
            base.boundary_nodes[None, :] + (np.arange(n_slices + 1) * n_sp)[:, None]
        ).ravel()

        if np.any(self.volumes <= 0.0):
            bad = int(np.argmin(self.volumes))
            raise ValueError(f"tet {bad} has non-positive volume {self.volumes[bad]}")

    @staticmethod
    def _is_flipped(base: Mesh2D, sorted_tris: np.ndarray) -> np.ndarray:
        p = base.nodes[sorted_tris]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) < 0.0

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_spatial(self) -> int:
        return self.base.n_nodes

    @cached_property
    def _edge_matrices(self) -> FloatArray:
        p = self.nodes[self.tets]
        return p[:, 1:] - p[:, :1]

    @cached_property
    def volumes(self) -> FloatArray:
        return np.linalg.det(self._edge_matrices) / 6.0

    @cached_property
    def basis_gradients(self) -> FloatArray:
        """Constant P1 gradients (d/dx1, d/dx2, d/dt), shape (n_tets, 4, 3)."""
        inv = np.linalg.inv(self._edge_matrices)
        grads = np.empty((self.n_tets, 4, 3))
        grads[:, 1:] = np.transpose(inv, (0, 2, 1))
        grads[:, 0] = -grads[:, 1:].sum(axis=1)
        return grads


def extrude_spacetime(mesh: Mesh2D, n_slices: int, t_final: float) -> SpaceTimeMesh:
    """Extrude a 2D mesh into a conforming space-time tetrahedral mesh."""
    return SpaceTimeMesh(mesh, n_slices, t_final)


def barycentric(mesh: Mesh2D, tri: int, x: FloatArray) -> FloatArray:
    """Barycentric coordinates of point x in triangle tri."""
    p = mesh.nodes[mesh.triangles[tri]]
    mat = np.column_stack([p[1] - p[0], p[2] - p[0]])
    l12 = np.linalg.solve(mat, np.asarray(x, dtype=float) - p[0])
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


def locate_point(mesh: Mesh2D, x) -> int:
    """Index of the lowest-numbered triangle containing x.

    A triangle counts as containing x when all barycentric coordinates are
    >= -1e-12; raises PointOutsideDomainError otherwise.
    """
    x = np.asarray(x, dtype=float)
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    rhs = x[None, :] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (rhs[:, 0] * d2[:, 1] - rhs[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * rhs[:, 1] - d1[:, 1] * rhs[:, 0]) / det
    inside = (l1 >= -_BARY_TOL) & (l2 >= -_BARY_TOL) & (l1 + l2 <= 1.0 + _BARY_TOL)
    if not inside.any():
        raise PointOutsideDomainError(f"point {x} lies outside the mesh")
    return int(np.argmax(inside))


def write_mesh_text(mesh: Mesh2D | SpaceTimeMesh, path) -> None:
    """Plain-text node/element dump for debugging."""
    if isinstance(mesh, Mesh2D):
        elements: Iterable = mesh.triangles
    else:
        elements = mesh.tets
    with open(path, "w", encoding="utf-8") as fh:
        for i, coords in enumerate(mesh.nodes):
            fh.write(f"{i} " + " ".join(repr(float(c)) for c in coords) + "\n")
        for i, (elem, tag) in enumerate(zip(elements, mesh.tags)):
            fh.write(f"{i} " + " ".join(str(int(n)) for n in elem) + f" {tag}\n")
