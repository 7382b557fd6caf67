"""Precision and efficient allocations for stepped wedge designs with unequal cluster sizes."""

from .approx import (
    ApproxConstants,
    ApproxTerms,
    RegressionFit,
    approx_constants,
    approx_terms,
    approximation_error,
    fit_regression,
    precision_approx,
    precision_PQ,
)
from .cohort import CohortWeights, cohort_exact_precision, cohort_weights
from .errors import (
    ConfigError,
    DegenerateVarianceError,
    InvalidDesignError,
    NoQualifierError,
    NonEstimableError,
    SWDError,
    TooLargeError,
)
from .exact import PrecisionReport, estimability, exact_precision_matrix, exact_precision_scalar
from .geometry import (
    Allocation,
    AllocationProfile,
    ClusterSet,
    SequenceGeometry,
    TrialConfig,
    build_geometry,
    canonical_form,
    derive_profile,
    mirror,
)
from .moments import SizeMoments, approx_W, approx_Wbeta
from .optimal import OptimalDesign, optimal_P, optimal_P_equal_case, optimal_value_formula
from .search import (
    DesignContext,
    RankedAllocation,
    SearchScheme,
    enumerate_allocations,
    metrics,
    recommend,
    sample,
)

__version__ = "0.1.0"
