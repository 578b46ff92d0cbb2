"""2D magnetoquasistatic finite elements with PAM hysteresis.

Two engines solve the same nonlinear eddy-current problem: a backward
Euler time stepper and a monolithic space-time method on tetrahedral
extrusions.  See the README for the scenario format and the CLI.
"""

from .material import (
    ANHYSTERETIC,
    DYNAMIC,
    FieldPair,
    PamParams,
    eval_f,
    eval_g,
    eval_h_field,
    eval_tangent,
)
from .mesh import (
    Mesh2D,
    PointOutsideDomainError,
    Rect,
    SpaceTimeMesh,
    Team32Layout,
    build_layered_square,
    build_structured_square,
    build_team32_layout,
    default_team32_layout,
    extrude_spacetime,
    locate_point,
)
from .sparsela import (
    CsrMatrix,
    NewtonSettings,
    SingularMatrixError,
    SolveReport,
    csr_from_triplets,
    newton_solve,
    solve_linear,
    spmv,
)
from .assembly import (
    DofMap2D,
    ElementFields,
    assemble_load,
    assemble_mass,
    assemble_tangent,
    assemble_weighted_stiffness,
    element_gradients,
    flux_density,
    interior_dofmap,
)
from .timestepping import (
    SpatialProblem,
    Trajectory,
    TransientFailure,
    advance_step,
    run_transient,
    step_jacobian,
    step_residual,
)
from .spacetime import (
    SpaceTimeProblem,
    SpaceTimeSolution,
    SpacetimeFailure,
    StDofMaps,
    assemble_st_fixed,
    assemble_st_nonlinear,
    build_spacetime_problem,
    extract_slice,
    solve_spacetime,
    st_dofmaps,
    st_residual,
)
from .scenario import (
    ConfigError,
    ScenarioConfig,
    Sinusoid,
    TableExcitation,
    builtin_scenario,
    build_mesh,
    config_from_dict,
    load_config,
    load_config_file,
    sample_excitation,
    spacetime_problem,
    spatial_problem,
)
from .probes import (
    ProbeSeries,
    compare_series,
    enclosed_loop_area,
    export_bh_csv,
    export_csv,
    probe_series_spacetime,
    probe_series_timestep,
    read_series_csv,
)

__version__ = "0.1.0"
