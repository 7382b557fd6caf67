"""Regression elimination of Q and the approximate precision V(P, K).

The per-cluster weights q_i are regressed on W p_i. Substituting the fitted
line ``Q = W(1 - beta) K + W beta P + R`` into the exact expression and
dropping the residual terms leaves a precision that depends on the
allocation only through P and the two linear forms b = K'z and a = K'y.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import DegenerateVarianceError, NonEstimableError
from .exact import exact_precision_scalar
from .geometry import (
    Allocation,
    AllocationProfile,
    ClusterSet,
    SequenceGeometry,
    TrialConfig,
    build_geometry,
    derive_profile,
    dot,
    q_weights,
    quad_form,
)

#: correlation between q_i and p_i below which the approximation is flagged
LOW_CORRELATION = 0.99


class LowCorrelationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares fit q_i = alpha + beta W p_i + r_i.

    ``W`` and ``beta`` are exact :class:`~fractions.Fraction` values when the
    trial parameters are rational, floats otherwise.
    """

    W: float
    beta: float
    alpha: float
    residuals: tuple[float, ...]
    corr: float
    periods: int

    @property
    def wbeta(self) -> float:
        return self.W * self.beta


def _mean(xs):
    return sum(xs, Fraction(0)) / len(xs) if all(isinstance(x, Fraction) for x in xs) else math.fsum(xs) / len(xs)


def _sum(xs):
    return sum(xs, Fraction(0)) if all(isinstance(x, Fraction) for x in xs) else math.fsum(xs)


def fit_regression(config: TrialConfig, clusters: ClusterSet, *, warn: bool = True) -> RegressionFit:
    p = clusters.exact_proportions()
    q = q_weights(config, clusters)
    if not all(isinstance(x, Fraction) for x in q):
        q = [float(x) for x in q]
        p = [float(x) for x in p]
    W = _sum(q)
    C = len(p)
    pbar = _mean(p)
    dp = [x - pbar for x in p]
    var_p = float(_sum([d * d for d in dp])) / C
    if var_p < 1e-14 or W == 0:
        # equal sizes (or W = 0): Q = W P holds exactly
        return RegressionFit(W=W, beta=1 if isinstance(W, Fraction) else 1.0, alpha=0.0,
                             residuals=tuple(0.0 for _ in p), corr=1.0, periods=config.periods)
    x = [W * pi for pi in p]
    xbar = _mean(x)
    qbar = _mean(q)
    sxy = _sum([(xi - xbar) * (qi - qbar) for xi, qi in zip(x, q)])
    sxx = _sum([(xi - xbar) ** 2 for xi in x])
    syy = _sum([(qi - qbar) ** 2 for qi in q])
    beta = sxy / sxx
    alpha = qbar - beta * xbar
    residuals = tuple(float(qi - alpha - beta * xi) for qi, xi in zip(q, x))
    corr = float(sxy) / math.sqrt(float(sxx) * float(syy)) if syy > 0 else 1.0
    if warn and corr < LOW_CORRELATION:
        warnings.warn(
            f"correlation of q_i with p_i is {corr:.4f}; the regression approximation may be poor",
            LowCorrelationWarning,
            stacklevel=2,
        )
    return RegressionFit(W=W, beta=beta, alpha=float(alpha), residuals=residuals, corr=corr, periods=config.periods)


@dataclass(frozen=True)
class ApproxConstants:
    W: float
    beta: float
    h1: float
    h2: float
    gamma: float
    h3: float
    A: np.ndarray


def approx_constants(fit: RegressionFit, geometry: SequenceGeometry) -> ApproxConstants:
    S, T = geometry.S, geometry.T
    W, beta = float(fit.W), float(fit.beta)
    one_wt = 1 - W * T
    if not one_wt > 0:
        raise DegenerateVarianceError(f"1 - W T = {one_wt:.3g} is not positive")
    h1 = 2 * W * (1 - beta) * (1 - beta * W * T) / one_wt
    h2 = (1 - beta) ** 2 * W**2 * T / one_wt
    gamma = (2 * beta - 1 - beta**2 * W * T) / one_wt
    h3 = h2 - h1**2 * (S - 1) / (4 * (1 - gamma * W * (S - 1)))
    A = geometry.Xi - beta * W * geometry.Lambda + gamma * W * geometry.Delta
    A.setflags(write=False)
    return ApproxConstants(W=W, beta=beta, h1=h1, h2=h2, gamma=gamma, h3=h3, A=A)


def precision_PQ(profile: AllocationProfile, geometry: SequenceGeometry) -> float:
    """P'Xi P - Q'LambdaTilde P - (T Q'Delta Q + W P'Delta P - 2 Q'Delta P) / (1 - W T)."""
    P, Q, W, T = profile.P, profile.Q, profile.W, geometry.T
    one_wt = 1 - W * T
    if not one_wt > 0:
        raise DegenerateVarianceError(f"1 - W T = {one_wt:.3g} is not positive")
    g = geometry
    inner = math.fsum([
        T * quad_form(Q, g.Delta, Q),
        W * quad_form(P, g.Delta, P),
        -2 * quad_form(Q, g.Delta, P),
    ])
    return math.fsum([quad_form(P, g.Xi, P), -quad_form(Q, g.LambdaTilde, P), -inner / one_wt])


class ApproxTerms(NamedTuple):
    quadratic: float
    """P'AP"""
    linear: float
    """h1 b z'P"""
    b_penalty: float
    """-h2 b^2"""
    a_gain: float
    """-W(1 - beta) a"""

    @property
    def total(self) -> float:
        return math.fsum(self)


def approx_terms(P, K, fit: RegressionFit, constants: ApproxConstants, geometry: SequenceGeometry) -> ApproxTerms:
    P = np.asarray(P, dtype=float)
    K = np.asarray(K, dtype=float)
    b = dot(K, geometry.z)
    a = dot(K, geometry.y)
    c = constants
    return ApproxTerms(
        quadratic=quad_form(P, c.A, P),
        linear=c.h1 * b * dot(geometry.z, P),
        b_penalty=-c.h2 * b * b,
        a_gain=-c.W * (1 - c.beta) * a,
    )


def precision_approx(P, K, fit: RegressionFit, constants: ApproxConstants, geometry: SequenceGeometry) -> float:
    """V(P, K) = P'AP + h1 b z'P - h2 b^2 - W(1 - beta) a."""
    return approx_terms(P, K, fit, constants, geometry).total


def residual_terms(P, K, Rvec, fit: RegressionFit, geometry: SequenceGeometry) -> float:
    """The part of the exact precision carried by the residual vector R.

    precision_approx + residual_terms equals precision_PQ exactly when Q is
    replaced by W(1 - beta) K + W beta P + R.
    """
    P, K, Rv = (np.asarray(v, dtype=float) for v in (P, K, Rvec))
    W, beta, T = float(fit.W), float(fit.beta), geometry.T
    g = geometry
    Q0 = W * (1 - beta) * K + W * beta * P
    one_wt = 1 - W * T
    inner = math.fsum([
        T * (2 * quad_form(Rv, g.Delta, Q0) + quad_form(Rv, g.Delta, Rv)),
        -2 * quad_form(Rv, g.Delta, P),
    ])
    return math.fsum([-quad_form(Rv, g.LambdaTilde, P), -inner / one_wt])


def approximation_error(config: TrialConfig, clusters: ClusterSet, alloc: Allocation,
                        fit: RegressionFit | None = None) -> float:
    """Relative discrepancy |V - V_exact| / V_exact."""
    exact = exact_precision_scalar(config, clusters, alloc)
    if not exact.estimable:
        raise NonEstimableError("treatment effect is not estimable for this allocation")
    geom = build_geometry(config.sequences)
    fit = fit if fit is not None else fit_regression(config, clusters, warn=False)
    consts = approx_constants(fit, geom)
    prof = derive_profile(config, clusters, alloc)
    v = precision_approx(prof.P, prof.K, fit, consts, geom)
    return abs(v - exact.v_exact) / exact.v_exact
