"""Declarative scenario configuration and the two built-in benchmark runs.

A scenario document is JSON with exactly the keys of ScenarioConfig:
geometry, T, n_steps, regions, excitations, probes, method, newton,
output_dir, bh_channels.  Unknown keys are rejected.  See
configs/square_hysteresis.json for the reference document.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .assembly import assemble_load, interior_dofmap
from .material import FloatArray, PamParams
from .mesh import (
    Mesh2D,
    Rect,
    Team32Layout,
    build_layered_square,
    build_structured_square,
    build_team32_layout,
    default_team32_layout,
    extrude_spacetime,
    locate_point,
)
from .sparsela import NewtonSettings
from .spacetime import SpaceTimeProblem, build_spacetime_problem
from .timestepping import SpatialProblem

COPPER_NU = 1e7 / (4.0 * math.pi)

METHODS = ("timestep", "spacetime", "both")


class ConfigError(ValueError):
    """Scenario document failed validation."""


@dataclasses.dataclass(frozen=True)
class Sinusoid:
    """j_s(t) = amplitude * sin(2 pi frequency t)."""

    amplitude: float
    frequency: float

    def __call__(self, t):
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t)


@dataclasses.dataclass(frozen=True)
class TableExcitation:
    """Sampled current record, interpolated linearly or by a clamped cubic
    spline, multiplied by scale (turns per winding area)."""

    times: FloatArray
    values: FloatArray
    interpolation: str = "linear"
    scale: float = 1.0

    def __post_init__(self) -> None:
        if len(self.times) < 2 or len(self.times) != len(self.values):
            raise ConfigError("excitation table needs matching t/I columns, >= 2 rows")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("excitation table times must be strictly increasing")
        if self.interpolation not in ("linear", "bspline"):
            raise ConfigError(f"unknown interpolation {self.interpolation!r}")
        if self.interpolation == "bspline":
            spline = CubicSpline(self.times, self.values, bc_type="clamped")
            object.__setattr__(self, "_spline", spline)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.times[-1]))
        if np.any(t_arr < self.times[0] - tol) or np.any(t_arr > self.times[-1] + tol):
            raise ValueError(
                f"time {t} outside table range [{self.times[0]}, {self.times[-1]}]"
            )
        if self.interpolation == "linear":
            out = np.interp(t_arr, self.times, self.values)
        else:
            out = self._spline(t_arr)
        return self.scale * out


def load_current_table(path, interpolation: str = "linear", scale: float = 1.0) -> TableExcitation:
    """Read a 't,I' CSV (seconds, amperes) into a TableExcitation."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2:
        raise ConfigError(f"current table {path} needs columns t,I")
    return TableExcitation(
        times=data[:, 0], values=data[:, 1], interpolation=interpolation, scale=scale
    )


def sample_excitation(exc, t: float) -> float:
    """Evaluate a named excitation at one time."""
    return float(np.asarray(exc(t)))


@dataclasses.dataclass(frozen=True)
class RegionSpec:
    tag: str
    sigma: float
    material: PamParams
    excitation: str | None = None
    m_perp: tuple[float, float] = (0.0, 0.0)


@dataclasses.dataclass
class ScenarioConfig:
    geometry: dict
    T: float
    n_steps: int
    regions: list[RegionSpec]
    excitations: dict[str, object]
    probes: list[tuple[float, float]]
    method: str = "both"
    newton: NewtonSettings = dataclasses.field(default_factory=NewtonSettings)
    output_dir: str = "out"
    bh_channels: tuple[str, ...] = ("x",)

    def region(self, tag: str) -> RegionSpec:
        for spec in self.regions:
            if spec.tag == tag:
                return spec
        raise KeyError(f"no region tagged {tag!r}")

    @property
    def materials(self) -> dict[str, PamParams]:
        return {r.tag: r.material for r in self.regions}

    @property
    def sigma(self) -> dict[str, float]:
        return {r.tag: r.sigma for r in self.regions}

    @property
    def sources(self) -> dict[str, object]:
        return {
            r.tag: self.excitations[r.excitation]
            for r in self.regions
            if r.excitation is not None
        }

    @property
    def m_perp(self) -> dict[str, FloatArray]:
        return {r.tag: np.asarray(r.m_perp, dtype=float) for r in self.regions}


def _require_keys(doc: dict, allowed: set[str], required: set[str], context: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown {context} key(s): {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing {context} key(s): {sorted(missing)}")


def _parse_geometry(doc) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError("geometry must be an object")
    kind = doc.get("kind")
    if kind == "unit_square":
        _require_keys(
            doc,
            {"kind", "n", "inner_lo", "inner_hi", "inner_tag", "outer_tag"},
            {"kind", "n"},
            "geometry",
        )
        if not isinstance(doc["n"], int) or doc["n"] < 1:
            raise ConfigError("geometry.n must be a positive integer")
        return {
            "kind": "unit_square",
            "n": doc["n"],
            "inner_lo": float(doc.get("inner_lo", 0.25)),
            "inner_hi": float(doc.get("inner_hi", 0.75)),
            "inner_tag": doc.get("inner_tag", "cu"),
            "outer_tag": doc.get("outer_tag", "fe"),
        }
    if kind == "layered_square":
        _require_keys(
            doc,
            {"kind", "rows", "inner_lo", "inner_hi", "inner_tag", "outer_tag"},
            {"kind", "rows"},
            "geometry",
        )
        rows = doc["rows"]
        if not isinstance(rows, list) or any(not isinstance(r, int) or r < 2 for r in rows):
            raise ConfigError("geometry.rows must be a list of integers >= 2")
        return {
            "kind": "layered_square",
            "rows": rows,
            "inner_lo": float(doc.get("inner_lo", 0.25)),
            "inner_hi": float(doc.get("inner_hi", 0.75)),
            "inner_tag": doc.get("inner_tag", "cu"),
            "outer_tag": doc.get("outer_tag", "fe"),
        }
    if kind == "team32":
        _require_keys(doc, {"kind", "layout"}, {"kind"}, "geometry")
        layout_doc = doc.get("layout")
        if layout_doc is None:
            return {"kind": "team32", "layout": None}
        _require_keys(
            layout_doc,
            {"air_box", "core", "winding_left", "winding_right", "h"},
            {"air_box", "core", "h"},
            "geometry.layout",
        )
        return {"kind": "team32", "layout": layout_doc}
    raise ConfigError(f"geometry.kind must be one of unit_square, layered_square, team32; got {kind!r}")


def _parse_material(doc: dict, tag: str) -> PamParams:
    if "nu" in doc and "pam" in doc:
        raise ConfigError(f"region {tag}: give either nu or pam, not both")
    if "nu" in doc:
        return PamParams.linear(float(doc["nu"]))
    if "pam" in doc:
        pam = doc["pam"]
        if not isinstance(pam, list) or len(pam) != 6:
            raise ConfigError(f"region {tag}: pam must be a list of the six parameters")
        return PamParams(*[float(v) for v in pam])
    raise ConfigError(f"region {tag}: missing material (nu or pam)")


def _parse_region(doc) -> RegionSpec:
    if not isinstance(doc, dict):
        raise ConfigError("each region must be an object")
    _require_keys(
        doc,
        {"tag", "sigma", "nu", "pam", "excitation", "m_perp"},
        {"tag", "sigma"},
        "region",
    )
    tag = doc["tag"]
    m_perp = doc.get("m_perp", [0.0, 0.0])
    if not isinstance(m_perp, list) or len(m_perp) != 2:
        raise ConfigError(f"region {tag}: m_perp must be a 2-vector")
    try:
        material = _parse_material(doc, tag)
    except ValueError as exc:
        raise ConfigError(f"region {tag}: {exc}") from exc
    return RegionSpec(
        tag=tag,
        sigma=float(doc["sigma"]),
        material=material,
        excitation=doc.get("excitation"),
        m_perp=(float(m_perp[0]), float(m_perp[1])),
    )


def _parse_excitation(name: str, doc) -> object:
    if not isinstance(doc, dict):
        raise ConfigError(f"excitation {name} must be an object")
    kind = doc.get("kind")
    if kind == "sinusoid":
        _require_keys(doc, {"kind", "amplitude", "frequency"}, {"kind", "amplitude", "frequency"}, f"excitation {name}")
        return Sinusoid(amplitude=float(doc["amplitude"]), frequency=float(doc["frequency"]))
    if kind == "table":
        _require_keys(doc, {"kind", "path", "interpolation", "scale"}, {"kind", "path"}, f"excitation {name}")
        return load_current_table(
            doc["path"],
            interpolation=doc.get("interpolation", "linear"),
            scale=float(doc.get("scale", 1.0)),
        )
    raise ConfigError(f"excitation {name}: kind must be sinusoid or table, got {kind!r}")


def _parse_newton(doc) -> NewtonSettings:
    if not isinstance(doc, dict):
        raise ConfigError("newton must be an object")
    allowed = {"rel_tol", "abs_tol", "max_iter", "armijo_c", "backtrack", "min_step"}
    _require_keys(doc, allowed, set(), "newton")
    try:
        return NewtonSettings(**{k: v for k, v in doc.items()})
    except ValueError as exc:
        raise ConfigError(f"newton: {exc}") from exc


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Validate a parsed scenario document."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be an object")
    allowed = {
        "geometry", "T", "n_steps", "regions", "excitations", "probes",
        "method", "newton", "output_dir", "bh_channels",
    }
    _require_keys(doc, allowed, {"geometry", "T", "n_steps", "regions"}, "scenario")

    t_final = doc["T"]
    if not isinstance(t_final, (int, float)) or t_final <= 0:
        raise ConfigError(f"T must be > 0, got {t_final!r}")
    n_steps = doc["n_steps"]
    if not isinstance(n_steps, int) or n_steps < 1:
        raise ConfigError(f"n_steps must be a positive integer, got {n_steps!r}")

    geometry = _parse_geometry(doc["geometry"])
    regions = [_parse_region(r) for r in doc["regions"]]
    tags = [r.tag for r in regions]
    if len(set(tags)) != len(tags):
        raise ConfigError(f"duplicate region tags in {tags}")

    excitations = {
        name: _parse_excitation(name, spec)
        for name, spec in doc.get("excitations", {}).items()
    }
    for region in regions:
        if region.excitation is not None and region.excitation not in excitations:
            raise ConfigError(
                f"region {region.tag}: unresolved excitation {region.excitation!r}"
            )

    probes = []
    for probe in doc.get("probes", []):
        if not isinstance(probe, list) or len(probe) != 2:
            raise ConfigError(f"each probe must be [x1, x2], got {probe!r}")
        probes.append((float(probe[0]), float(probe[1])))

    method = doc.get("method", "both")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")

    bh_channels = doc.get("bh_channels", ["x"])
    if not isinstance(bh_channels, list) or any(c not in ("x", "y") for c in bh_channels):
        raise ConfigError(f"bh_channels must be a list drawn from ['x','y'], got {bh_channels!r}")

    config = ScenarioConfig(
        geometry=geometry,
        T=float(t_final),
        n_steps=n_steps,
        regions=regions,
        excitations=excitations,
        probes=probes,
        method=method,
        newton=_parse_newton(doc.get("newton", {})),
        output_dir=doc.get("output_dir", "out"),
        bh_channels=tuple(bh_channels),
    )
    mesh = build_mesh(config)
    mesh_tags = set(mesh.tags)
    config_tags = set(tags)
    if not mesh_tags <= config_tags:
        raise ConfigError(f"regions missing for mesh tags {sorted(mesh_tags - config_tags)}")
    for x1, x2 in probes:
        try:
            locate_point(mesh, (x1, x2))
        except ValueError as exc:
            raise ConfigError(f"probe ({x1}, {x2}) outside the domain") from exc
    return config


def load_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


def load_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


def reference_config_text(name: str) -> str:
    """The shipped reference document for a built-in scenario."""
    resource = importlib.resources.files("pamfem").joinpath(f"configs/{name}.json")
    return resource.read_text(encoding="utf-8")


def builtin_scenario(name: str) -> ScenarioConfig:
    """Built-in benchmark scenarios at desk scale."""
    if name not in ("square_hysteresis", "team32"):
        raise KeyError(f"unknown scenario {name!r}")
    return load_config(reference_config_text(name))


def _layout_from_doc(doc: dict | None) -> Team32Layout:
    if doc is None:
        return default_team32_layout()
    def rect(v) -> Rect:
        if not isinstance(v, list) or len(v) != 4:
            raise ConfigError(f"rectangle must be [x0, y0, x1, y1], got {v!r}")
        return Rect(*[float(c) for c in v])
    try:
        return Team32Layout(
            air_box=rect(doc["air_box"]),
            core=tuple(rect(r) for r in doc["core"]),
            winding_left=rect(doc["winding_left"]) if "winding_left" in doc else None,
            winding_right=rect(doc["winding_right"]) if "winding_right" in doc else None,
            h=float(doc["h"]),
        )
    except ValueError as exc:
        raise ConfigError(f"geometry.layout: {exc}") from exc


def build_mesh(config: ScenarioConfig) -> Mesh2D:
    geo = config.geometry
    if geo["kind"] in ("unit_square", "layered_square"):
        lo, hi = geo["inner_lo"], geo["inner_hi"]
        inner, outer = geo["inner_tag"], geo["outer_tag"]

        def classify(x: float, y: float) -> str:
            return inner if (lo < x < hi and lo < y < hi) else outer

        if geo["kind"] == "unit_square":
            return build_structured_square(geo["n"], classify)
        return build_layered_square(geo["rows"], classify)
    if geo["kind"] == "team32":
        return build_team32_layout(_layout_from_doc(geo["layout"]))
    raise ConfigError(f"unknown geometry kind {geo['kind']!r}")


def spatial_problem(config: ScenarioConfig, mesh: Mesh2D | None = None) -> SpatialProblem:
    """Discretize a scenario for the time-stepping engine."""
    mesh = mesh if mesh is not None else build_mesh(config)
    dofmap = interior_dofmap(mesh)
    sources = config.sources
    m_perp = config.m_perp

    def load(t: float) -> FloatArray:
        return assemble_load(mesh, t, sources, m_perp, dofmap)

    return SpatialProblem(
        mesh=mesh,
        dofmap=dofmap,
        sigma=config.sigma,
        materials=config.materials,
        load=load,
    )


def spacetime_problem(config: ScenarioConfig, mesh: Mesh2D | None = None) -> SpaceTimeProblem:
    """Discretize a scenario for the space-time engine (n_steps slices)."""
    mesh = mesh if mesh is not None else build_mesh(config)
    st_mesh = extrude_spacetime(mesh, config.n_steps, config.T)
    return build_spacetime_problem(
        st_mesh, config.sigma, config.materials, config.sources, config.m_perp
    )
