"""Delta-method approximations to W and W*beta from the mean and CV of cluster sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidDesignError

FIRST = "first"
SECOND = "second"


@dataclass(frozen=True)
class SizeMoments:
    M: float
    CV: float
    C: int | None = None

    def __post_init__(self):
        if not self.M > 0:
            raise InvalidDesignError(f"mean cluster size must be positive, got {self.M!r}")
        if not self.CV >= 0:
            raise InvalidDesignError(f"CV must be nonnegative, got {self.CV!r}")


def _check(lam: float, T: int) -> None:
    if not lam >= 0:
        raise InvalidDesignError(f"lambda must be nonnegative, got {lam!r}")
    if T < 2:
        raise InvalidDesignError(f"periods must be >= 2, got {T!r}")


def approx_W(moments: SizeMoments, lam: float, T: int, order: str = SECOND) -> float:
    """E(W) ~ M/(lam + M T) [+ lam^2 M CV^2 / (lam + M T)^3 for the second order]."""
    _check(lam, T)
    if order not in (FIRST, SECOND):
        raise ValueError(f"order must be '{FIRST}' or '{SECOND}', got {order!r}")
    if math.isinf(lam):
        return 0.0
    M, cv = moments.M, moments.CV
    d = lam + M * T
    w = M / d
    if order == SECOND:
        w += lam**2 * M * cv**2 / d**3
    return w


def approx_Wbeta(moments: SizeMoments, lam: float, T: int) -> float:
    """E(W beta) ~ (1 - lam^2 / (lam + M T)^2) / T, always within [0, 1/T]."""
    _check(lam, T)
    if math.isinf(lam):
        return 0.0
    ratio = lam / (lam + moments.M * T)
    return (1 - ratio * ratio) / T


def moment_summary(moments: SizeMoments, lam: float, T: int) -> dict:
    return {
        "W_first": approx_W(moments, lam, T, FIRST),
        "W_second": approx_W(moments, lam, T, SECOND),
        "Wbeta": approx_Wbeta(moments, lam, T),
    }
