"""Pragmatic Algebraic Model (PAM) of vector magnetic hysteresis.

The constitutive law is

    H = f(|B|) B + g(|dB/dt|) dB/dt - M,

with the anhysteretic coefficient f(s) = p0 + p1 * s**(2*p2) and the
rate-dependent coefficient g(s) = p3 + p4 / sqrt(p5**2 + s**2).  Linear
materials (air, copper) fit the same scheme with p1 = p3 = p4 = 0 and
p0 equal to the reluctivity.

All evaluators are pure functions; the *_array variants are vectorized
over a batch of field magnitudes or vectors and are what the assembly
routines call in their inner loops.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

# Below this magnitude the rank-one tangent term is dropped; v (x) v is
# O(s^2) there while the coefficient stays bounded, so the limit is c(0)*I.
_ZERO_NORM = 1e-12

ANHYSTERETIC = "anhysteretic"
DYNAMIC = "dynamic"


@dataclasses.dataclass(frozen=True)
class PamParams:
    """The six PAM coefficients.

    p0: base reluctivity of the anhysteretic branch [m/H], strictly positive
    p1: anhysteretic gain [m/H per T**(2*p2)]
    p2: anhysteretic exponent (dimensionless, may be fractional)
    p3: macroscopic eddy-current coefficient [A*s/(T*m)]
    p4: hysteresis strength [A/m]
    p5: rate scale [T/s], strictly positive whenever p4 > 0
    """

    p0: float
    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0
    p4: float = 0.0
    p5: float = 1.0

    def __post_init__(self) -> None:
        vals = dataclasses.astuple(self)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite PAM parameter in {vals}")
        if any(v < 0 for v in vals):
            raise ValueError(f"PAM parameters must be >= 0, got {vals}")
        if self.p0 <= 0:
            raise ValueError(f"p0 must be > 0, got {self.p0}")
        if self.p4 > 0 and self.p5 <= 0:
            raise ValueError("p5 must be > 0 when p4 > 0 (g singular at zero rate)")

    @staticmethod
    def linear(nu: float) -> "PamParams":
        """Linear material of reluctivity nu: f == nu, g == 0."""
        return PamParams(p0=nu)


@dataclasses.dataclass(frozen=True)
class FieldPair:
    """Point values of the flux density B [T], its rate [T/s], and the
    magnetization vector [A/m] entering the constitutive law."""

    B: tuple[float, float]
    Bdot: tuple[float, float] = (0.0, 0.0)
    M_perp: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        for v in (self.B, self.Bdot, self.M_perp):
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite field component {v}")


def f_array(s: FloatArray, params: PamParams) -> FloatArray:
    """Anhysteretic coefficient f(s) = p0 + p1 * s**(2*p2), vectorized.

    Fractional exponents are evaluated through exp/log for s > 0; s = 0
    short-circuits to p0.
    """
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, params.p0)
    if params.p1 != 0.0:
        pos = s > 0.0
        out[pos] += params.p1 * np.exp(2.0 * params.p2 * np.log(s[pos]))
    return out


def g_array(s: FloatArray, params: PamParams) -> FloatArray:
    """Rate coefficient g(s) = p3 + p4 / sqrt(p5**2 + s**2), vectorized."""
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, params.p3)
    if params.p4 != 0.0:
        out += params.p4 / np.sqrt(params.p5**2 + s**2)
    return out


def eval_f(s: float, params: PamParams) -> float:
    """f at a single magnitude s = |B| >= 0."""
    if s < 0:
        raise ValueError(f"magnitude must be >= 0, got {s}")
    return float(f_array(np.array([s]), params)[0])


def eval_g(s: float, params: PamParams) -> float:
    """g at a single magnitude s = |dB/dt| >= 0."""
    if s < 0:
        raise ValueError(f"magnitude must be >= 0, got {s}")
    return float(g_array(np.array([s]), params)[0])


def eval_h_field(fields: FieldPair, params: PamParams) -> FloatArray:
    """Magnetic field H = f(|B|) B + g(|Bdot|) Bdot - M."""
    B = np.asarray(fields.B, dtype=float)
    Bdot = np.asarray(fields.Bdot, dtype=float)
    M = np.asarray(fields.M_perp, dtype=float)
    return (
        eval_f(float(np.linalg.norm(B)), params) * B
        + eval_g(float(np.linalg.norm(Bdot)), params) * Bdot
        - M
    )


def _ratio_array(kind: str, s: FloatArray, params: PamParams) -> FloatArray:
    """c'(s)/s for c = f or g, written without a 0/0 division.

    f'(s)/s = 2*p1*p2 * s**(2*p2 - 2)
    g'(s)/s = -p4 * (p5**2 + s**2)**(-3/2)
    """
    s = np.asarray(s, dtype=float)
    if kind == ANHYSTERETIC:
        out = np.zeros(s.shape)
        if params.p1 != 0.0 and params.p2 != 0.0:
            pos = s > 0.0
            out[pos] = 2.0 * params.p1 * params.p2 * np.exp(
                (2.0 * params.p2 - 2.0) * np.log(s[pos])
            )
        return out
    if kind == DYNAMIC:
        if params.p4 == 0.0:
            return np.zeros(s.shape)
        return -params.p4 * (params.p5**2 + s**2) ** (-1.5)
    raise ValueError(f"unknown tangent kind {kind!r}")


def tangent_array(kind: str, v: FloatArray, params: PamParams) -> FloatArray:
    """Derivative d/dv [c(|v|) v] for a batch of 2-vectors v, shape (n, 2, 2).

    The tensor is c(s) I + (c'(s)/s) v (x) v with s = |v|; for s below the
    zero guard the rank-one part is dropped (its limit at the origin).
    """
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    s = np.linalg.norm(v, axis=1)
    if kind == ANHYSTERETIC:
        c = f_array(s, params)
    else:
        c = g_array(s, params)
    ratio = np.where(s >= _ZERO_NORM, _ratio_array(kind, s, params), 0.0)
    eye = np.eye(2)
    return c[:, None, None] * eye + ratio[:, None, None] * (
        v[:, :, None] * v[:, None, :]
    )


def eval_tangent(kind: str, v, params: PamParams) -> FloatArray:
    """Tangent tensor of the flux map v -> c(|v|) v at a single 2-vector v.

    kind selects c: "anhysteretic" (c = f) or "dynamic" (c = g).  The result
    is symmetric positive definite: the eigenvalues are c(s) and
    c(s) + c'(s)*s, both bounded below by p0 (anhysteretic) respectively
    p3 + p4*p5**2*(p5**2+s**2)**(-3/2) > 0 (dynamic).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {v.shape}")
    return tangent_array(kind, v[None, :], params)[0]
