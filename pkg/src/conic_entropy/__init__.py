"""Perelman's F/lambda and W/mu functionals on cones with an isolated singular tip.

The model is a warped cone ``dr^2 + phi(r)^2 h0`` over a cross section
described by spectral data. Functions are resolved into cross-section modes
and discretised radially with P1 elements on geometric meshes.
"""
__version__ = "0.1.0"

from .asymptotics import (
    DecayFit,
    IndicialRoots,
    UniformDecay,
    fit_decay_exponent,
    indicial_roots,
    weighted_uniform_check,
)
from .discretization import (
    EigenResult,
    EigenSolverError,
    ModeOperator,
    RadialMesh,
    assemble_forms,
    assemble_mode_operator,
    build_mesh,
    default_grading,
    lowest_eigenvalue_bound,
    lumped_weights,
    smallest_eigenpair,
)
from .functionals import (
    SolveReport,
    SolverParams,
    chain_constant,
    concentrating_bumps,
    el_residual,
    f_functional,
    inner_product_equivalence_check,
    lambda_functional,
    log_sobolev_check,
    lower_bound_chain_check,
    mu_functional,
    normalized_constant,
    w_functional,
    w_gradient,
)
from .geometry import (
    ConeModel,
    CrossSection,
    ExactWarp,
    PerturbedWarp,
    check_ac_condition,
    make_round_sphere_cross_section,
    scalar_curvature_at,
    unit_sphere_volume,
)
from .spaces import (
    GridFunction,
    WeightFunction,
    WeightSpec,
    c_k_delta_norm,
    dyadic_annulus_decompose,
    embedding_check,
    h1_norm,
    hardy_check,
    hardy_constant,
    norm_equivalence_check,
    scaling_homogeneity_check,
    sobolev_norm,
    weighted_norm,
)
