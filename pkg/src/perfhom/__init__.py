"""Numerical laboratory for elliptic problems in finely perforated planar domains."""

from .geometry import (
    CavityShape, DomainSpec, Perforation, Region, StarProfile, ValidationReport,
    generate_perforation, star_shape, unit_disk_shape, validate_a1,
)
from .harness import (
    ExperimentConfig, SweepReport, emit_report, fit_rate, predicted_dominant_slope,
    run_sweep,
)
from .meshing import (
    DiscreteFunction, Mesh, mesh_perforated, mesh_unperforated, read_mesh,
    transfer, write_mesh,
)
from .metrics import ErrorNorms, LemmaConstant, error_norms, lemma_constant
from .problem import (
    Coefficients, ProblemSpec, RobinNonlinearity, ScalingLaw, check_ellipticity,
    check_lipschitz, check_scaling_admissible, coefficient_preset,
    nonlinearity_preset, F_PRESETS,
)
from .solver import (
    AssembledSystem, SolveResult, assemble_load, assemble_volume, robin_residual,
    solve_homogenized, solve_perturbed,
)
from .theory import (
    RateBound, auxiliary_X, bound_l2, bound_w1, corrector_alpha, kappa, radial_X,
    radial_X_deriv, sharpness_neumann, varkappa,
)

__version__ = "0.1.0"
