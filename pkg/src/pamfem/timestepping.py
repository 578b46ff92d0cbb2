"""Implicit (backward Euler) transient engine.

Each step solves the nonlinear system

    (1/h) [M + A((u - u_prev)/h)] (u - u_prev) + K(u) u = F(t_i)

by damped Newton with the analytic tangents of the material law, warm
started from the previous state.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Mapping

import numpy as np

from .assembly import (
    DofMap2D,
    ElementFields,
    assemble_mass,
    assemble_tangent,
    assemble_weighted_stiffness,
    element_gradients,
    material_weights,
)
from .material import ANHYSTERETIC, DYNAMIC, FloatArray, PamParams
from .mesh import Mesh2D
from .sparsela import CsrMatrix, NewtonSettings, SolveReport, newton_solve


class TransientFailure(RuntimeError):
    """Newton failed to converge during a transient run."""

    def __init__(self, step: int, report: SolveReport) -> None:
        super().__init__(
            f"Newton did not converge at step {step}: "
            f"{report.iterations} iterations, residual {report.residual_history[-1]:.3e}"
        )
        self.step = step
        self.report = report


@dataclasses.dataclass
class SpatialProblem:
    """Spatially discretized scenario consumed by the transient engine."""

    mesh: Mesh2D
    dofmap: DofMap2D
    sigma: Mapping[str, float]
    materials: Mapping[str, PamParams]
    load: Callable[[float], FloatArray]

    def __post_init__(self) -> None:
        self.mass = assemble_mass(self.mesh, self.sigma, self.dofmap)
        self._mass_sp = self.mass.to_scipy()

    @property
    def n_free(self) -> int:
        return self.dofmap.n_free


@dataclasses.dataclass
class Trajectory:
    """Time history of free-dof coefficient vectors."""

    times: FloatArray
    states: FloatArray           # (n_steps + 1, n_free), states[0] = 0
    reports: list[SolveReport]   # one per step


def _step_fields(problem: SpatialProblem, u: FloatArray, w: FloatArray) -> ElementFields:
    return ElementFields(
        grad_u=element_gradients(problem.mesh, problem.dofmap.expand(u)),
        grad_w=element_gradients(problem.mesh, problem.dofmap.expand(w)),
    )


def step_residual(
    u: FloatArray,
    u_prev: FloatArray,
    h_t: float,
    t_i: float,
    problem: SpatialProblem,
) -> FloatArray:
    """Nonlinear residual of one backward Euler step."""
    if h_t <= 0:
        raise ValueError(f"step size must be > 0, got {h_t}")
    du = u - u_prev
    fields = _step_fields(problem, u, du / h_t)
    mesh = problem.mesh
    k_mat = assemble_weighted_stiffness(
        mesh, material_weights(mesh, fields.grad_u, ANHYSTERETIC, problem.materials),
        problem.dofmap,
    )
    a_mat = assemble_weighted_stiffness(
        mesh, material_weights(mesh, fields.grad_w, DYNAMIC, problem.materials),
        problem.dofmap,
    )
    return (
        (problem._mass_sp @ du + a_mat.to_scipy() @ du) / h_t
        + k_mat.to_scipy() @ u
        - problem.load(t_i)
    )


def step_jacobian(
    u: FloatArray, u_prev: FloatArray, h_t: float, problem: SpatialProblem
) -> CsrMatrix:
    """Analytic Jacobian (1/h) M + (1/h) T_g((u-u_prev)/h) + T_f(u)."""
    w = (u - u_prev) / h_t
    t_f = assemble_tangent(
        problem.mesh, problem.dofmap.expand(u), ANHYSTERETIC, problem.materials, problem.dofmap
    )
    t_g = assemble_tangent(
        problem.mesh, problem.dofmap.expand(w), DYNAMIC, problem.materials, problem.dofmap
    )
    j = (problem._mass_sp + t_g.to_scipy()) / h_t + t_f.to_scipy()
    return CsrMatrix.from_scipy(j)


def advance_step(
    u_prev: FloatArray,
    t_i: float,
    h_t: float,
    problem: SpatialProblem,
    settings: NewtonSettings = NewtonSettings(),
) -> tuple[FloatArray, SolveReport]:
    """Solve one step's nonlinear system, warm started at u_prev."""
    return newton_solve(
        residual=lambda u: step_residual(u, u_prev, h_t, t_i, problem),
        jacobian=lambda u: step_jacobian(u, u_prev, h_t, problem),
        u0=u_prev,
        settings=settings,
    )


def run_transient(
    problem: SpatialProblem,
    t_final: float,
    n_steps: int,
    settings: NewtonSettings = NewtonSettings(),
) -> Trajectory:
    """March the zero initial state through n_steps uniform backward Euler steps."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    h_t = t_final / n_steps
    times = np.linspace(0.0, t_final, n_steps + 1)
    states = np.zeros((n_steps + 1, problem.n_free))
    reports: list[SolveReport] = []
    u = states[0]
    for i in range(1, n_steps + 1):
        u, report = advance_step(u, times[i], h_t, problem, settings)
        reports.append(report)
        if not report.converged:
            raise TransientFailure(i, report)
        states[i] = u
    return Trajectory(times=times, states=states, reports=reports)
