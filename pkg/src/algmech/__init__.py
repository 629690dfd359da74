"""Numerical Lagrangian mechanics on anchored frame bundles.

The package evaluates the coordinate formulas of bracket geometries built
over a pair of diffeomorphic bases (generalized Lie algebroids): pull-back
brackets, nonlinear connections and adapted frames, projector and almost
structures, distinguished linear connections with covariant derivatives,
canonical semisprays and sprays, Poincare-Cartan forms, and the resulting
equations of Euler-Lagrange type, together with fixed-step integration and
numerical certification of the algebraic identities.
"""
from .algebroid import (
    ChartChange,
    DegeneracyError,
    EvaluationError,
    GeneralizedLieAlgebroid,
    PullbackSection,
    anchor_morphism_defect,
    jacobi_defect,
    pullback_bracket,
    pullback_eval,
    structure_from_frame,
)
from .dynamics import (
    DivergenceError,
    LiftedState,
    Trajectory,
    el_rhs,
    geodesic_check,
    integrate,
    lift_residual,
    parallel_transport,
)
from .geometry import (
    AdaptedTensorField,
    DistinguishedConnection,
    GhCovector,
    GhSection,
    RhoEtaConnection,
    adapted_coframe,
    adapted_frame,
    adapted_frame_section,
    almost_product,
    almost_tangent,
    berwald,
    bracket_gh,
    cov_deriv_along,
    curvature,
    endomorphism,
    h_cov_deriv,
    horizontal_proj,
    nijenhuis,
    pi_bang,
    rho_tilde,
    tangent_block_matrix,
    transform_connection,
    v_cov_deriv,
    vertical_proj,
)
from .mechanics import (
    ExternalForce,
    FinslerReport,
    GhMorphism,
    Lagrangian,
    LagrangeMechanicalSystem,
    MechanicalSystem,
    RegularityError,
    SemisprayCoefficients,
    canonical_connection,
    canonical_semispray,
    connection_from_semispray,
    el_covector,
    energy,
    finsler_validate,
    hessian_inverse,
    lagrangian_jet,
    liouville_section,
    mechanical_semispray,
    omega_L,
    regularity,
    ring_connection,
    ring_curvature_identity,
    semispray_equation_residual,
    semispray_section,
    semispray_transform_check,
    spray_coefficients,
    spray_deviation,
    spray_section,
    theta_L,
    transform_lagrange_system,
)
from .presets import PRESET_NAMES, PresetDescriptor, build
from .smooth import InvertibleMap, SmoothMap

__version__ = "0.1.0"
