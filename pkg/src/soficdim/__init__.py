"""Finite-scale laboratory for l^p dimension of measured equivalence relations.

Builds exact and perturbed sofic models of finite relations, samples
almost-equivariant maps into l^p(d), brackets normalized dimensions with
covering searches and volume-packing bounds, and carries the discrete graph
cohomology toolkit (Hodge split, grounded Neumann solves, spectral margins,
graphing cost and cycle-quotient dimensions).
"""

__version__ = "0.1.0"

from ._validation import ModelError, ParameterError
from .covering import (
    CoveringResult,
    OracleScopeError,
    PointCloud,
    ResidualNorm,
    alpha_from_fraction,
    covering_curve_rows,
    covering_dim_exact,
    covering_dim_greedy,
    epsilon_contains,
    packing_lower_bound,
    plain_norm,
    product_norm_selector,
    projected_packing_lower_bound,
)
from .estimators import CoveringDimension, CycleQuotientDimensionEstimator, LpDimensionEstimator
from .graphcoh import (
    Graph,
    GraphError,
    SpectralError,
    amenability_margin,
    boundary,
    cycle_space_basis,
    delta,
    hodge_project,
    hodge_projector_matrix,
    neumann_inverse,
    path_chain,
    path_integral,
    potential,
)
from .graphings import (
    ConsistencyError,
    CycleQuotientValue,
    Graphing,
    LoopField,
    cost,
    cycle_quotient_dim_exact,
    edge_quotient_representation,
    estimate_cycle_quotient_dim,
    fiber_graph,
    presentation_mass,
    transfer_operator,
    transfer_spanning_identity,
)
from .homdim import (
    DimEstimate,
    EstimatorGrid,
    GeneratedRepresentation,
    HomParams,
    check_almost_equivariant,
    estimate_dimension,
    finite_orbit_dim_exact,
    sample_transport_map,
    sample_transport_map_periodic,
    support_upper_bound,
)
from .norms import (
    ProductNorm,
    VectorField,
    direct_integral_norm,
    is_dynamically_generating,
    lp_norm,
    support,
)
from .relations import (
    AlgebraElement,
    AtomSpace,
    FinRel,
    Model,
    PartialMap,
    as_matrix,
    compose,
    compose_word,
    inverse,
    trace,
    two_norm,
)
from .reps import (
    constant_fiber_representation,
    cyclic_model,
    direct_sum,
    pair_space_representation,
    projected_pair_representation,
)
from .sofic import QualityReport, SoficApprox, compress, exact_model, perturb, quality_report, word_image
