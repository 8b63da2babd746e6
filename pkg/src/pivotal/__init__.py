"""Pivotal-time machinery for random walks on Gromov hyperbolic spaces.

Simulation library + CLI for the inductive pivotal-time construction on
Schottky block trajectories, with exact Cayley-tree arithmetic and a
hyperbolic-plane model, and Monte Carlo harnesses for the limit laws
(drift, CLT, LIL, log-deviation of translation length, geodesic tracking).
"""

from .geometry import (
    AlignmentResult,
    GromovConstants,
    Segment,
    chain_product_bound,
    check_four_point,
    gromov_product,
    is_aligned,
    is_fully_marked,
    is_glued,
    is_head_marked,
    is_tail_marked,
    is_witnessed,
)
from .models import (
    FreeGroupWord,
    MoebiusIsometry,
    SpaceModel,
    are_independent,
    classify_isometry,
    distance,
    hyperbolic_plane_model,
    translation_length,
    translation_length_limit_oracle,
    tree_model,
)
from .schottky import (
    SchottkyParams,
    VerificationReport,
    reference_setup,
    schottky_subset,
    search_schottky,
    verify_schottky,
)
from .walk import (
    DecomposedModel,
    StepDistribution,
    Trajectory,
    build_decomposed_model,
    exponential_moment,
    is_non_arithmetic,
    is_non_elementary,
    pth_moment,
    sample_bidirectional,
    sample_trajectory,
    uniform_f2_steps,
)
from .pivots import (
    PivotRecord,
    admissible_replacements,
    advance_pivots,
    bidirectional_pivot_check,
    compute_loci,
    count_admissible,
    eventual_pivots,
    pivot_decay,
    pivot_trajectory,
    pivotal_alignment,
    run_pivots,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
