"""Exact GLS precision of the treatment-effect estimate.

Two independent routes are provided. :func:`exact_precision_scalar` evaluates
the closed-form scalar expression built from the cluster sums E, F, G, H.
:func:`exact_precision_matrix` assembles the (T+1)x(T+1) information matrix
from the per-cluster inverse covariances and reads off the bottom-right
element of its inverse. They agree to roundoff on every estimable design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateVarianceError
from .geometry import Allocation, ClusterSet, TrialConfig

#: information (in sigma_e^2 units) at or below ESTIMABILITY_TOL * N counts as zero
ESTIMABILITY_TOL = 1e-9


@dataclass(frozen=True)
class PrecisionReport:
    v_exact: float
    """Scaled precision sigma_e^2 / (N var(theta_hat)); 0 when not estimable."""
    var_theta: float
    estimable: bool
    information: float
    """sigma_e^2 / var(theta_hat) before the estimability cut."""


def _sum(values) -> Fraction:
    return sum(values, Fraction(0))


def _report(information, N: int, sigma_e2: float) -> PrecisionReport:
    info = float(information)
    if info > ESTIMABILITY_TOL * N:
        return PrecisionReport(v_exact=info / N, var_theta=sigma_e2 / info, estimable=True, information=info)
    return PrecisionReport(v_exact=0.0, var_theta=math.inf, estimable=False, information=info)


def _rational_weights(config: TrialConfig, clusters: ClusterSet) -> list[Fraction]:
    # every float is a dyadic rational, so this is exact and the scalar
    # formula below suffers no cancellation however ill-conditioned the design
    lam, mu, T = config.lam, config.mu_value, config.periods
    if lam == math.inf:
        return [Fraction(0)] * len(clusters)
    lam, mu = Fraction(lam), Fraction(mu)
    return [(n + mu) / (lam + T * (n + mu)) for n in clusters.sizes]


def efgh(config: TrialConfig, clusters: ClusterSet, alloc: Allocation) -> dict:
    """The cluster sums E, F, G, H and the total weight W, as exact rationals."""
    alloc.validate(len(clusters), config.sequences)
    S = config.sequences
    sizes = clusters.sizes
    w = _rational_weights(config, clusters)
    r = alloc.assignment
    N = clusters.total
    E = sum(n * ri for n, ri in zip(sizes, r))
    F = _sum(n * wi * ri for n, wi, ri in zip(sizes, w, r))
    H = _sum(n * wi * ri * ri for n, wi, ri in zip(sizes, w, r))
    n_seq = [0] * (S + 1)
    for n, ri in zip(sizes, r):
        n_seq[ri] += n
    G = sum(min(l, m) * n_seq[l] * n_seq[m] for l in range(1, S + 1) for m in range(1, S + 1))
    W = _sum(Fraction(n, N) * wi for n, wi in zip(sizes, w))
    return {"E": E, "F": F, "G": G, "H": H, "W": W, "N": N}


def scalar_information(config: TrialConfig, clusters: ClusterSet, alloc: Allocation):
    """sigma_e^2 / var(theta_hat) = E - H - G/N - (T F^2 + W E^2 - 2 E F) / (N (1 - W T))."""
    s = efgh(config, clusters, alloc)
    E, F, G, H, W, N = s["E"], s["F"], s["G"], s["H"], s["W"], s["N"]
    T = config.periods
    if config.lam == 0:
        # W T = 1 exactly; the cross term tends to -E^2 / T
        cross = -Fraction(E * E, T)
    else:
        denom = 1 - W * T
        if not denom > 0:
            raise DegenerateVarianceError(f"1 - W T = {float(denom):.3g} is not positive")
        cross = (T * F * F + W * E * E - 2 * E * F) / denom
    return E - H - Fraction(G, N) - cross / N


def exact_precision_scalar(config: TrialConfig, clusters: ClusterSet, alloc: Allocation) -> PrecisionReport:
    info = scalar_information(config, clusters, alloc)
    return _report(info, clusters.total, config.sigma_e2)


def treatment_indicators(T: int, S: int) -> np.ndarray:
    """Row l-1 is the T-vector with ones in the last l periods."""
    D = np.zeros((S, T))
    for l in range(1, S + 1):
        D[l - 1, T - l:] = 1.0
    return D


def information_matrix(config: TrialConfig, clusters: ClusterSet, alloc: Allocation) -> np.ndarray:
    """Z' V^-1 Z for parameters (period effects..., theta), in units of 1/sigma_e^2.

    Uses V_i^-1 = (N_i / sigma_e^2)(I - w_i J) cluster by cluster, so the
    CT x CT covariance is never formed.
    """
    T, S = config.periods, config.sequences
    alloc.validate(len(clusters), S)
    D = treatment_indicators(T, S)
    lam = float(config.lam)
    mu = float(config.mu_value)
    s2 = config.sigma_e2
    I, J = np.eye(T), np.ones((T, T))
    M = np.zeros((T + 1, T + 1))
    for n, seq in zip(clusters.sizes, alloc.assignment):
        w = 0.0 if math.isinf(lam) else (n + mu) / (lam + T * (n + mu))
        Vinv = (n / s2) * (I - w * J)
        Di = D[seq - 1]
        M[:T, :T] += Vinv
        VD = Vinv @ Di
        M[:T, T] += VD
        M[T, :T] += VD
        M[T, T] += Di @ VD
    return M


def exact_precision_matrix(config: TrialConfig, clusters: ClusterSet, alloc: Allocation) -> PrecisionReport:
    M = information_matrix(config, clusters, alloc)
    T = config.periods
    N = clusters.total
    s2 = config.sigma_e2
    A, c, d = M[:T, :T], M[:T, T], M[T, T]
    # generalized Schur complement; pinv covers lambda = 0 where A is singular
    schur = d - c @ np.linalg.pinv(A, hermitian=True) @ c
    info = schur * s2
    if not info > ESTIMABILITY_TOL * N:
        return PrecisionReport(v_exact=0.0, var_theta=math.inf, estimable=False, information=float(info))
    if config.lam > 0:
        unit = np.zeros(T + 1)
        unit[T] = 1.0
        var_theta = float(np.linalg.solve(M, unit)[T])
    else:
        var_theta = 1.0 / schur
    return PrecisionReport(v_exact=s2 / (N * var_theta), var_theta=var_theta, estimable=True, information=s2 / var_theta)


def estimability(config: TrialConfig, clusters: ClusterSet, alloc: Allocation) -> bool:
    """Whether theta keeps positive information after the period effects are removed."""
    return exact_precision_matrix(config, clusters, alloc).estimable
