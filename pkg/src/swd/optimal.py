"""Closed-form optimal allocations of individuals for a fixed cluster disposition."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .approx import ApproxConstants, RegressionFit, approx_constants, precision_approx
from .geometry import SequenceGeometry, build_geometry, dot, quad_form


class BoundWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OptimalDesign:
    p_opt: np.ndarray
    v_opt: float
    a: float
    b: float
    feasible: bool
    # simplex-constrained maximiser; equals p_opt when feasible
    p_constrained: np.ndarray
    v_constrained: float


def _quartic(S: int, wbeta: float) -> float:
    return (S - 1) * (3 - 3 * (S - 1) * wbeta + S * (S - 2) * wbeta**2)


def a_inv_ones(fit: RegressionFit, geometry: SequenceGeometry) -> np.ndarray:
    S = geometry.S
    wb = float(fit.W) * float(fit.beta)
    return (12 * wb * geometry.ones + 6 * (1 - wb * S) * geometry.e) / _quartic(S, wb)


def a_inv_z(fit: RegressionFit, geometry: SequenceGeometry, constants: ApproxConstants | None = None) -> np.ndarray:
    c = constants or approx_constants(fit, geometry)
    return geometry.f / (1 - c.gamma * c.W * (geometry.S - 1))


def _check_bound(fit: RegressionFit, T: int) -> None:
    wb = float(fit.W) * float(fit.beta)
    if wb > 1 / T + 1e-12:
        warnings.warn(f"W*beta = {wb:.4f} exceeds 1/T = {1 / T:.4f}", BoundWarning, stacklevel=3)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def maximize_on_simplex(A: np.ndarray, c: np.ndarray, start: np.ndarray, tol: float = 1e-10,
                        max_iter: int = 100_000) -> np.ndarray:
    """Projected gradient ascent for P'AP + c'P over the probability simplex."""
    step = 1 / (2 * np.linalg.norm(A, 2) + 1e-300)
    x = project_simplex(start)
    for _ in range(max_iter):
        x_new = project_simplex(x + step * (2 * A @ x + c))
        if np.max(np.abs(x_new - x)) < tol:
            return x_new
        x = x_new
    return x


def optimal_P(fit: RegressionFit, geometry: SequenceGeometry, K) -> OptimalDesign:
    """Maximise V(P, K) over P for the cluster proportions K.

    The closed form is P = W beta 1 + (1 - W beta S)/2 e - h1 b / (2 (1 - gamma W (S-1))) f.
    When it has a negative entry the design is reported infeasible and a
    simplex-constrained maximiser is supplied alongside.
    """
    K = np.asarray(K, dtype=float)
    S = geometry.S
    _check_bound(fit, geometry.T)
    c = approx_constants(fit, geometry)
    b = dot(K, geometry.z)
    a = dot(K, geometry.y)
    wb = c.W * c.beta
    denom = 1 - c.gamma * c.W * (S - 1)
    p = wb * geometry.ones + 0.5 * (1 - wb * S) * geometry.e - c.h1 * b / (2 * denom) * geometry.f
    v = 1 / dot(geometry.ones, a_inv_ones(fit, geometry)) - c.h3 * b * b - c.W * (1 - c.beta) * a
    feasible = bool(np.all(p >= -1e-15))
    if feasible:
        return OptimalDesign(p_opt=p, v_opt=v, a=a, b=b, feasible=True, p_constrained=p, v_constrained=v)
    pc = maximize_on_simplex(c.A, c.h1 * b * geometry.z, p)
    vc = precision_approx(pc, K, fit, c, geometry)
    return OptimalDesign(p_opt=p, v_opt=v, a=a, b=b, feasible=False, p_constrained=pc, v_constrained=vc)


def optimal_value_formula(fit: RegressionFit, S: int, a: float, b: float) -> float:
    """Largest attainable V for fixed a and b:

    (S-1)(3 - 3(S-1) W beta + S(S-2) W^2 beta^2) / 12 - h3 b^2 - W(1 - beta) a
    """
    geom = build_geometry(S)
    c = approx_constants(fit, geom)
    return _quartic(S, c.W * c.beta) / 12 - c.h3 * b * b - c.W * (1 - c.beta) * a


def optimal_P_equal_case(fit: RegressionFit, geometry: SequenceGeometry) -> np.ndarray:
    """Maximiser of V(P, P): W 1 + (1 - W S)/2 e."""
    W = float(fit.W)
    return W * geometry.ones + 0.5 * (1 - W * geometry.S) * geometry.e


def value_equal_case(P, fit: RegressionFit, geometry: SequenceGeometry) -> float:
    """V(P, P) = P'(Xi - W Lambda + W Delta)P."""
    W = float(fit.W)
    M = geometry.Xi - W * geometry.Lambda + W * geometry.Delta
    return quad_form(P, M, P)


def efficiency(v: float, v_bound: float) -> float:
    if v_bound <= 0 or math.isnan(v_bound):
        return math.nan
    return v / v_bound
