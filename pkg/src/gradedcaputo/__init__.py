"""Graded-mesh L1 and HL1 discretizations of the Caputo derivative, with
solvers for time-fractional diffusion, fractional delay equations and a
semilinear reaction-diffusion problem."""

from .dde import DelayProblem, DelaySolution, example1, reference_solution_ex1, solve_fdde
from .harness import (
    ConvergenceReport,
    SweepConfig,
    compute_eoc,
    emit_error_grid,
    load_config,
    preset,
    run_sweep,
)
from .linalg import TridiagonalSystem, ZeroPivotError, solve_tridiagonal
from .mesh import (
    NBAR_MAX,
    AuxMesh,
    SpatialMesh,
    TemporalMesh,
    build_aux_mesh,
    build_graded_mesh,
    build_spatial_mesh,
    choose_Nbar,
)
from .nonlinear import NewtonDivergenceError, NonlinearSpec, nlex3, solve_nonlinear
from .pde import ProblemSpec, SchemeKind, SolutionGrid, max_abs_error, solve
from .problems import fpde2, manufactured_source_ex3, ml_homog
from .special import MittagLefflerParams, caputo_of_power, gamma_fn, mittag_leffler
from .stability import PerturbationExperiment, lemma1_audit, run_perturbation
from .weights import (
    discrete_caputo,
    discrete_l1_caputo,
    hl1_coefficient_block,
    hl1_coefficients,
    hl1_kernel_moments,
    l1_weights,
    xi_weights,
)

__version__ = "0.1.0"
