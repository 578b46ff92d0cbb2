"""Probe sampling, CSV export, and series comparison.

A probe samples B and H at a fixed point over time.  B comes from the
rotated element gradient of u in the probe's triangle; the rate dB/dt is a
backward difference of B for the transient engine (zero at t = 0) and the
rotated element gradient of the auxiliary p field for the space-time
engine.  H follows from the material law of the probe's region.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .material import FloatArray, PamParams, f_array, g_array
from .mesh import Mesh2D, locate_point
from .scenario import ScenarioConfig
from .spacetime import SpaceTimeProblem, SpaceTimeSolution
from .timestepping import SpatialProblem, Trajectory

CSV_HEADER = "t,Bx,By,Hx,Hy"
BH_HEADER = "H,B"


@dataclasses.dataclass
class ProbeSeries:
    """Time-sampled flux density and field at one spatial point."""

    times: FloatArray
    Bx: FloatArray
    By: FloatArray
    Hx: FloatArray
    Hy: FloatArray

    def __post_init__(self) -> None:
        n = len(self.times)
        for name in ("Bx", "By", "Hx", "Hy"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"channel {name} length {arr.shape} != {n} samples")
            setattr(self, name, arr)
        self.times = np.asarray(self.times, dtype=float)

    def channel(self, name: str) -> FloatArray:
        return getattr(self, name)


def _h_from_b(b: FloatArray, bdot: FloatArray, m_perp, params: PamParams) -> FloatArray:
    f = f_array(np.linalg.norm(b, axis=1), params)
    g = g_array(np.linalg.norm(bdot, axis=1), params)
    return f[:, None] * b + g[:, None] * bdot - np.asarray(m_perp, dtype=float)[None, :]


def _probe_element(mesh: Mesh2D, probe) -> tuple[int, np.ndarray, FloatArray]:
    tri = locate_point(mesh, probe)
    nodes = mesh.triangles[tri]
    grads = mesh.basis_gradients[tri]
    return tri, nodes, grads


def _rotate(grads: FloatArray) -> FloatArray:
    return np.column_stack([grads[:, 1], -grads[:, 0]])


def probe_series_timestep(
    traj: Trajectory, problem: SpatialProblem, probe, config: ScenarioConfig
) -> ProbeSeries:
    """Sample a transient trajectory; dB/dt is the backward difference of B
    with dB/dt(0) = 0 (exact for the zero initial state)."""
    mesh = problem.mesh
    tri, nodes, grads = _probe_element(mesh, probe)
    tag = mesh.tags[tri]
    params = config.region(tag).material
    m_perp = config.region(tag).m_perp

    full = np.zeros((len(traj.times), mesh.n_nodes))
    full[:, problem.dofmap.free_dofs] = traj.states
    grad_series = full[:, nodes] @ grads          # (n_times, 2)
    b = _rotate(grad_series)
    h_t = traj.times[1] - traj.times[0]
    bdot = np.zeros_like(b)
    bdot[1:] = (b[1:] - b[:-1]) / h_t
    h = _h_from_b(b, bdot, m_perp, params)
    return ProbeSeries(times=traj.times.copy(), Bx=b[:, 0], By=b[:, 1], Hx=h[:, 0], Hy=h[:, 1])


def probe_series_spacetime(
    sol: SpaceTimeSolution, problem: SpaceTimeProblem, probe, config: ScenarioConfig
) -> ProbeSeries:
    """Sample a space-time solution slice by slice; dB/dt comes from the
    p field's rotated element gradient."""
    st_mesh = problem.mesh
    mesh = st_mesh.base
    tri, nodes, grads = _probe_element(mesh, probe)
    tag = mesh.tags[tri]
    params = config.region(tag).material
    m_perp = config.region(tag).m_perp

    n_sp = st_mesh.n_spatial
    u_full = problem.dofmaps.expand_u(sol.u, st_mesh.n_nodes).reshape(-1, n_sp)
    p_full = problem.dofmaps.expand_p(sol.p, st_mesh.n_nodes).reshape(-1, n_sp)
    b = _rotate(u_full[:, nodes] @ grads)
    bdot = _rotate(p_full[:, nodes] @ grads)
    h = _h_from_b(b, bdot, m_perp, params)
    return ProbeSeries(
        times=st_mesh.slice_times.copy(), Bx=b[:, 0], By=b[:, 1], Hx=h[:, 0], Hy=h[:, 1]
    )


def export_csv(series: ProbeSeries, path) -> None:
    """Write the probe schema 't,Bx,By,Hx,Hy', one row per sample,
    scientific notation with 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for i in range(len(series.times)):
            row = (series.times[i], series.Bx[i], series.By[i], series.Hx[i], series.Hy[i])
            fh.write(",".join(f"{v:.16e}" for v in row) + "\n")


def export_bh_csv(series: ProbeSeries, channel: str, path) -> None:
    """Write the 'H,B' pair file for one component ('x' or 'y')."""
    if channel not in ("x", "y"):
        raise ValueError(f"channel must be 'x' or 'y', got {channel!r}")
    h = series.Hx if channel == "x" else series.Hy
    b = series.Bx if channel == "x" else series.By
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(BH_HEADER + "\n")
        for hv, bv in zip(h, b):
            fh.write(f"{hv:.16e},{bv:.16e}\n")


def read_series_csv(path) -> ProbeSeries:
    """Parse a probe CSV back into a series (bit-exact round trip)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}, want {CSV_HEADER!r}")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    data = np.asarray(rows)
    if data.ndim != 2 or data.shape[1] != 5:
        raise ValueError(f"malformed probe CSV {path}")
    return ProbeSeries(
        times=data[:, 0], Bx=data[:, 1], By=data[:, 2], Hx=data[:, 3], Hy=data[:, 4]
    )


def compare_series(a: ProbeSeries, b: ProbeSeries) -> dict[str, dict[str, float]]:
    """Per-channel max absolute and relative L2 differences.

    rel_l2 of channel c is ||a_c - b_c||_2 / max(||a_c||_2, 1e-14).
    """
    if len(a.times) != len(b.times) or np.max(np.abs(a.times - b.times)) > 1e-12 * max(
        1.0, float(np.max(np.abs(a.times)))
    ):
        raise ValueError("probe series have different time grids")
    out = {}
    for name in ("Bx", "By", "Hx", "Hy"):
        va, vb = a.channel(name), b.channel(name)
        diff = va - vb
        out[name] = {
            "max_abs_diff": float(np.max(np.abs(diff))) if len(diff) else 0.0,
            "rel_l2_diff": float(np.linalg.norm(diff) / max(np.linalg.norm(va), 1e-14)),
        }
    return out


def enclosed_loop_area(
    series: ProbeSeries, channel: str = "x", t_start: float | None = None
) -> float:
    """Shoelace area of the (H, B) polygon over t >= t_start.

    By default t_start cuts off everything before the final full excitation
    window, which the caller picks; passing None uses the whole series.
    """
    h = series.Hx if channel == "x" else series.Hy
    b = series.Bx if channel == "x" else series.By
    if t_start is not None:
        keep = series.times >= t_start - 1e-12 * max(1.0, abs(t_start))
        h, b = h[keep], b[keep]
    if len(h) < 3:
        raise ValueError("need at least 3 samples to enclose area")
    return float(0.5 * abs(np.sum(h * np.roll(b, -1) - np.roll(h, -1) * b)))


def write_run_report(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
