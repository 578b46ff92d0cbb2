"""Sparse linear algebra shared by both solution engines.

CsrMatrix is a thin immutable compressed-sparse-row container; scipy
provides the storage conversions and the SuperLU direct factorization
behind it.  newton_solve is the damped (Armijo backtracking) Newton
driver used for every nonlinear system in the package.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .material import FloatArray

# Relative pivot threshold under which a factorization counts as singular.
_PIVOT_TOL = 1e-14


class SingularMatrixError(RuntimeError):
    """Raised when a direct factorization meets a (numerically) zero pivot."""


@dataclasses.dataclass(frozen=True)
class CsrMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free columns."""

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    vals: np.ndarray

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, self.col_idx, self.row_ptr), shape=(self.n_rows, self.n_cols)
        )

    @staticmethod
    def from_scipy(a: sp.spmatrix) -> "CsrMatrix":
        a = sp.csr_matrix(a)
        a.sum_duplicates()
        a.sort_indices()
        return CsrMatrix(
            n_rows=a.shape[0],
            n_cols=a.shape[1],
            row_ptr=np.asarray(a.indptr),
            col_idx=np.asarray(a.indices),
            vals=np.asarray(a.data, dtype=float),
        )

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def toarray(self) -> FloatArray:
        return self.to_scipy().toarray()


def csr_from_triplets(
    n_rows: int, n_cols: int, triplets: Sequence[tuple[int, int, float]]
) -> CsrMatrix:
    """Build a CsrMatrix from (row, col, value) triplets.

    Duplicate (row, col) contributions are summed; entries that sum to zero
    stay in the pattern so that the sparsity structure is stable across
    Newton iterations.
    """
    if triplets:
        rows, cols, vals = (np.asarray(x) for x in zip(*triplets))
    else:
        rows = cols = np.zeros(0, dtype=int)
        vals = np.zeros(0)
    if len(rows) and (
        rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols
    ):
        raise IndexError("triplet index out of range")
    coo = sp.coo_matrix((vals.astype(float), (rows, cols)), shape=(n_rows, n_cols))
    return CsrMatrix.from_scipy(coo)


def spmv(a: CsrMatrix, x: FloatArray) -> FloatArray:
    """Sparse matrix-vector product A @ x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n_cols,):
        raise ValueError(f"dimension mismatch: {a.n_rows}x{a.n_cols} @ {x.shape}")
    return a.to_scipy() @ x


def solve_linear(a: CsrMatrix, b: FloatArray) -> FloatArray:
    """Direct sparse solve A x = b (SuperLU with partial pivoting).

    Guarantees ||A x - b|| <= 1e-10 * (||b|| + ||A||_F ||x||) and raises
    SingularMatrixError when a pivot falls below 1e-14 times the largest
    matrix entry.
    """
    b = np.asarray(b, dtype=float)
    if a.n_rows != a.n_cols:
        raise ValueError(f"matrix is not square: {a.n_rows}x{a.n_cols}")
    if b.shape != (a.n_rows,):
        raise ValueError(f"dimension mismatch: {a.n_rows}x{a.n_cols} \\ {b.shape}")
    if a.n_rows == 0:
        return np.zeros(0)
    mat = a.to_scipy().tocsc()
    max_entry = np.abs(mat.data).max() if mat.nnz else 0.0
    if max_entry == 0.0:
        raise SingularMatrixError("all-zero matrix")
    try:
        lu = spla.splu(mat)
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    pivots = np.abs(lu.U.diagonal())
    if pivots.size and pivots.min() < _PIVOT_TOL * max_entry:
        raise SingularMatrixError(
            f"pivot {pivots.min():.3e} below {_PIVOT_TOL:.0e} * max entry {max_entry:.3e}"
        )
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution from factorization")
    return x


@dataclasses.dataclass(frozen=True)
class NewtonSettings:
    """Controls for the damped Newton iteration."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_iter: int = 25
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-4

    def __post_init__(self) -> None:
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack must be in (0,1), got {self.backtrack}")
        if not 0.0 < self.armijo_c <= 0.5:
            raise ValueError(f"armijo_c must be in (0, 0.5], got {self.armijo_c}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be > 0")


@dataclasses.dataclass
class SolveReport:
    """Outcome of one Newton solve."""

    iterations: int
    residual_history: list[float]
    step_sizes: list[float]
    converged: bool


def newton_solve(
    residual: Callable[[FloatArray], FloatArray],
    jacobian: Callable[[FloatArray], CsrMatrix],
    u0: FloatArray,
    settings: NewtonSettings = NewtonSettings(),
) -> tuple[FloatArray, SolveReport]:
    """Damped Newton iteration for residual(u) = 0.

    Each step solves J(u_k) d = -R(u_k) and backtracks from alpha = 1 until
    ||R(u_k + alpha d)|| <= (1 - armijo_c * alpha) * ||R(u_k)||; if alpha
    falls below min_step the step of size min_step is accepted anyway and
    recorded.  Converged means ||R|| <= max(abs_tol, rel_tol * ||R(u0)||).

    Parameters
    ----------
    residual : callable
        u -> R(u), the nonlinear residual vector.
    jacobian : callable
        u -> dR/du as a CsrMatrix; must be the exact derivative of residual
        for the quadratic local convergence the engines rely on.
    u0 : array
        Initial iterate (also fixes the relative-tolerance reference).
    settings : NewtonSettings
        Tolerances, iteration cap, and line-search controls.

    Returns
    -------
    (u, report) : the final iterate and the SolveReport with the residual
        history (length iterations + 1) and accepted step sizes.
    """
    u = np.array(u0, dtype=float)
    r = residual(u)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    steps: list[float] = []
    target = max(settings.abs_tol, settings.rel_tol * rnorm)

    while rnorm > target and len(steps) < settings.max_iter:
        d = solve_linear(jacobian(u), -r)
        alpha = 1.0
        while True:
            r_trial = residual(u + alpha * d)
            trial_norm = float(np.linalg.norm(r_trial))
            if trial_norm <= (1.0 - settings.armijo_c * alpha) * rnorm:
                break
            alpha *= settings.backtrack
            if alpha < settings.min_step:
                alpha = settings.min_step
                r_trial = residual(u + alpha * d)
                trial_norm = float(np.linalg.norm(r_trial))
                break
        u += alpha * d
        r = r_trial
        rnorm = trial_norm
        history.append(rnorm)
        steps.append(alpha)

    report = SolveReport(
        iterations=len(steps),
        residual_history=history,
        step_sizes=steps,
        converged=rnorm <= target,
    )
    return u, report
