"""matchkit: nearest-neighbor matching toolkit for density-ratio, KL
divergence, and average-treatment-effect estimation."""

__version__ = "0.1.0"

from .data import CausalDataset, EstimatorConfig, PointSet  # noqa: F401
from .errors import MatchkitError  # noqa: F401
from .kdtree import KdTree, build  # noqa: F401
from .matching import (  # noqa: F401
    MatchCounts,
    brute_force_match_counts,
    match_counts_by_group,
    match_counts_extended,
    match_counts_sample,
)
from .ratio import (  # noqa: F401
    RatioEstimate,
    density_ratio_at_points,
    density_ratio_at_sample,
    noshad_ratio,
    select_m_ratio,
    two_step_ratio,
)
from .divergence import DivergenceEstimate, kl_estimate, phi, select_m_kl  # noqa: F401
from .ate import (  # noqa: F401
    AteEstimate,
    OutcomeModel,
    ate_bias_corrected,
    ate_cross_fit,
    ate_doubly_robust,
    ate_matching,
    estimate_ate,
    fit_outcome_model,
    select_m_ate,
    variance_estimate,
)
