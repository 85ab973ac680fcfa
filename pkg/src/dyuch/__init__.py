"""Verification and exploration toolkit for sliced dyadic martingales,
balanced Carleson-type measures, and the sharp embedding constant e."""

from .dyadic import (
    DEFAULT_TOL,
    REAL_LINE,
    UNIT,
    DyadicInterval,
    HaarCoefficients,
    PiecewiseConstant,
    Root2,
    dyadic_length,
    four_adic_nodes,
    haar_coefficient,
    haar_coefficients,
    haar_inner_indicator,
    interval_from_id,
    plancherel_norm2,
    reconstruct_from_haar,
    tree_from_json,
    tree_to_json,
    unit_root,
    window_root,
)
from .martingale import (
    DyadicAnalytic,
    SlicedMartingale,
    SlicingViolation,
    analytic_from_json,
    analytic_projection,
    analytic_to_json,
    conjugate,
    cr_residual,
    h2_norm2,
    random_analytic,
    random_sliced,
    s0,
    slicing_residual,
)
from .carleson import (
    SUBMARTINGALE_NONPOS,
    SUPERMARTINGALE_NONNEG,
    DiscreteMeasure,
    SlicedSuperMartingale,
    bellman_chain_slacks,
    embedding_slack,
    embedding_sum,
    measure_from_json,
    measure_from_supermartingale,
    measure_to_json,
    pair_supermartingale,
    random_balanced_measure,
    telescoped_weighted_slack,
    weighted_embedding_slack,
)
from .bellman import (
    BellmanPoint,
    HessianParams,
    SplitSpec,
    bellman_value,
    concavity_form_matrix,
    concavity_gap,
    derivative_gap,
    det_closed_form,
    dynamics_gap,
    laplacian_step_gap,
    principal_minors,
    range_gaps,
    scan_unsliced,
    third_minor_closed_form,
    unsliced_form_matrix,
    unsliced_third_minor,
    verify_sliced_psd,
)
from .kernel import (
    KernelRep,
    kernel_norm2,
    kernel_to_analytic,
    normalized_testing_value,
    reproducing_kernel,
    reproducing_residual,
    testing_constant,
    testing_embedding_slack,
    testing_sum,
    testing_to_packing,
    truncation_tail_bound,
)
from .extremal import (
    BoundProfile,
    Configuration,
    competitor,
    exponential_profile,
    lower_bound_certificate,
    profile_residuals,
    search,
)

__version__ = "0.1.0"
