"""Closed-cohort designs.

Every cross-sectional formula carries over once w_i is replaced by
(N_i + mu) / (lambda + T (N_i + mu)). The weight functions in
:mod:`swd.geometry` already read ``mu`` from the trial configuration, so
this module only packages the tilded quantities and guards the design kind.
"""

from __future__ import annotations

from dataclasses import dataclass

from .approx import RegressionFit, fit_regression
from .errors import InvalidDesignError
from .exact import PrecisionReport, exact_precision_matrix, exact_precision_scalar
from .geometry import CLOSED_COHORT, Allocation, ClusterSet, TrialConfig, q_weights, total_weight


@dataclass(frozen=True)
class CohortWeights:
    mu: float
    q_tilde: tuple
    W_tilde: float
    beta_tilde: float
    fit: RegressionFit


def _require_cohort(config: TrialConfig) -> None:
    if config.kind != CLOSED_COHORT:
        raise InvalidDesignError("a closed-cohort configuration (mu given) is required")


def cohort_weights(config: TrialConfig, clusters: ClusterSet) -> CohortWeights:
    _require_cohort(config)
    fit = fit_regression(config, clusters)
    return CohortWeights(
        mu=config.mu,
        q_tilde=tuple(q_weights(config, clusters)),
        W_tilde=total_weight(config, clusters),
        beta_tilde=fit.beta,
        fit=fit,
    )


def cohort_exact_precision(config: TrialConfig, clusters: ClusterSet, alloc: Allocation,
                           route: str = "scalar") -> PrecisionReport:
    _require_cohort(config)
    if route == "scalar":
        return exact_precision_scalar(config, clusters, alloc)
    if route == "matrix":
        return exact_precision_matrix(config, clusters, alloc)
    raise ValueError(f"unknown route {route!r}")
