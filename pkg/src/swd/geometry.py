"""Trial configuration, cluster data, allocations and the fixed sequence geometry.

Sequences are numbered 1..S with S = T - 1. A cluster on sequence ``l``
receives the intervention in the last ``l`` periods, so sequence 1 switches
in period T and sequence S switches in period 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDesignError

CROSS_SECTIONAL = "cross-sectional"
CLOSED_COHORT = "closed-cohort"

IDENTITY_TOL = 1e-12


def _as_exact(x: Real) -> Real:
    """Promote ints to Fraction so rational inputs stay exact; floats pass through."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a valid numeric parameter")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return float(x)


@dataclass(frozen=True)
class TrialConfig:
    """Design-level parameters of a classic stepped wedge trial.

    Supply exactly one of ``lam`` (lambda = (1 - icc) / icc) or ``icc``. A
    closed-cohort design is requested by giving ``mu`` (omega^2 / tau^2);
    leaving it as ``None`` means cross-sectional.

    Integer or :class:`~fractions.Fraction` values of ``lam``/``icc``/``mu``
    are kept exact, so weights derived from them are exact rationals.
    """

    periods: int
    lam: Real | None = None
    icc: Real | None = None
    mu: Real | None = None
    sigma_e2: float = 1.0

    def __post_init__(self):
        if not isinstance(self.periods, int) or self.periods < 2:
            raise InvalidDesignError(f"periods must be an integer >= 2, got {self.periods!r}")
        if (self.lam is None) == (self.icc is None):
            raise InvalidDesignError("supply exactly one of lam or icc")
        if self.icc is not None:
            rho = _as_exact(self.icc)
            if not 0 <= rho <= 1:
                raise InvalidDesignError(f"icc must lie in [0, 1], got {self.icc!r}")
            # icc = 0 is the independent-observations limit
            lam = math.inf if rho == 0 else (1 - rho) / rho
            object.__setattr__(self, "lam", lam)
        lam = self.lam if self.lam == math.inf else _as_exact(self.lam)
        if not lam >= 0:
            raise InvalidDesignError(f"lambda must be nonnegative, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "icc", None)
        if self.mu is not None:
            mu = _as_exact(self.mu)
            if not mu >= 0 or mu == math.inf:
                raise InvalidDesignError(f"mu must be finite and nonnegative, got {self.mu!r}")
            object.__setattr__(self, "mu", mu)
        if not self.sigma_e2 > 0:
            raise InvalidDesignError("sigma_e2 must be positive")

    @property
    def sequences(self) -> int:
        return self.periods - 1

    @property
    def rho(self) -> Real:
        if self.lam == math.inf:
            return 0.0
        return 1 / (1 + self.lam)

    @property
    def kind(self) -> str:
        return CROSS_SECTIONAL if self.mu is None else CLOSED_COHORT

    @property
    def mu_value(self) -> Real:
        return Fraction(0) if self.mu is None else self.mu


@dataclass(frozen=True)
class ClusterSet:
    """Cluster-period cell sizes N_1..N_C."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if any(int(n) != n for n in self.sizes):
            raise InvalidDesignError("cluster sizes must be integers")
        if not sizes:
            raise InvalidDesignError("at least one cluster is required")
        if min(sizes) < 1:
            raise InvalidDesignError("every cluster size must be >= 1")
        object.__setattr__(self, "sizes", sizes)

    def __len__(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def proportions(self) -> np.ndarray:
        return np.array(self.sizes, dtype=float) / self.total

    def exact_proportions(self) -> list[Fraction]:
        n = self.total
        return [Fraction(s, n) for s in self.sizes]

    @property
    def mean(self) -> float:
        return self.total / len(self.sizes)

    @property
    def cv(self) -> float:
        """Coefficient of variation using the sample (n - 1) standard deviation."""
        if len(self.sizes) < 2:
            return 0.0
        return float(np.std(self.sizes, ddof=1) / self.mean)


@dataclass(frozen=True)
class Allocation:
    """Sequence index (1-based) for each cluster, in cluster order."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))

    def __len__(self) -> int:
        return len(self.assignment)

    def validate(self, n_clusters: int, S: int) -> None:
        if len(self.assignment) != n_clusters:
            raise InvalidDesignError(
                f"allocation has {len(self.assignment)} entries for {n_clusters} clusters"
            )
        bad = [a for a in self.assignment if not 1 <= a <= S]
        if bad:
            raise InvalidDesignError(f"sequence indices must lie in 1..{S}, got {bad}")

    def sequences_used(self) -> int:
        return len(set(self.assignment))


@dataclass(frozen=True)
class AllocationProfile:
    P: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    W: float
    b: float
    a: float


@dataclass(frozen=True)
class SequenceGeometry:
    S: int
    z: np.ndarray
    y: np.ndarray
    e: np.ndarray
    f: np.ndarray
    Xi: np.ndarray
    LambdaTilde: np.ndarray
    Lambda: np.ndarray
    Delta: np.ndarray
    R: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return self.S + 1

    @property
    def ones(self) -> np.ndarray:
        return np.ones(self.S)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def build_geometry(S: int) -> SequenceGeometry:
    """Vectors z, y, e, f and matrices Xi, LambdaTilde, Lambda, Delta, R for S sequences."""
    if not isinstance(S, (int, np.integer)) or S < 2:
        raise InvalidDesignError(f"need at least 2 sequences, got S={S!r}")
    S = int(S)
    idx = np.arange(1, S + 1, dtype=float)
    z = idx - (S + 1) / 2
    y = z**2
    e = np.zeros(S)
    e[[0, -1]] = 1.0
    f = np.zeros(S)
    f[0], f[-1] = 1.0, -1.0
    Xi = np.abs(idx[:, None] - idx[None, :]) / 2
    LambdaTilde = np.outer(y, np.ones(S))
    Lambda = (LambdaTilde + LambdaTilde.T) / 2
    Delta = np.outer(z, z)
    R = np.eye(S)[::-1].copy()
    return SequenceGeometry(
        S=S,
        z=_frozen(z),
        y=_frozen(y),
        e=_frozen(e),
        f=_frozen(f),
        Xi=_frozen(Xi),
        LambdaTilde=_frozen(LambdaTilde),
        Lambda=_frozen(Lambda),
        Delta=_frozen(Delta),
        R=_frozen(R),
    )


def cluster_weights(config: TrialConfig, clusters: ClusterSet) -> list:
    """Per-cluster w_i = (N_i + mu) / (lambda + T (N_i + mu)); mu = 0 when cross-sectional.

    Exact rationals when lambda and mu are rational; floats otherwise.
    """
    lam, mu, T = config.lam, config.mu_value, config.periods
    if lam == math.inf:
        return [0.0 for _ in clusters.sizes]
    return [(n + mu) / (lam + T * (n + mu)) for n in clusters.sizes]


def q_weights(config: TrialConfig, clusters: ClusterSet) -> list:
    """Per-cluster q_i = p_i w_i (the tilded q in the closed-cohort case)."""
    return [p * w for p, w in zip(clusters.exact_proportions(), cluster_weights(config, clusters))]


def total_weight(config: TrialConfig, clusters: ClusterSet) -> Real:
    """W = sum of q_i."""
    q = q_weights(config, clusters)
    if all(isinstance(x, Fraction) for x in q):
        return sum(q, Fraction(0))
    return math.fsum(float(x) for x in q)


def _per_sequence(values: Sequence[float], assignment: Sequence[int], S: int) -> np.ndarray:
    # fsum is correctly rounded, so the result is independent of member order
    buckets: list[list[float]] = [[] for _ in range(S)]
    for v, seq in zip(values, assignment):
        buckets[seq - 1].append(v)
    return np.array([math.fsum(b) for b in buckets])


def derive_profile(config: TrialConfig, clusters: ClusterSet, alloc: Allocation) -> AllocationProfile:
    S = config.sequences
    alloc.validate(len(clusters), S)
    geom = build_geometry(S)
    C = len(clusters)
    p = [float(x) for x in clusters.exact_proportions()]
    q = [float(x) for x in q_weights(config, clusters)]
    P = _per_sequence(p, alloc.assignment, S)
    Q = _per_sequence(q, alloc.assignment, S)
    counts = np.bincount(np.asarray(alloc.assignment) - 1, minlength=S)
    K = counts / C
    b = math.fsum(K * geom.z)
    a = math.fsum(K * geom.y)
    return AllocationProfile(P=P, K=K, Q=Q, W=math.fsum(q), b=b, a=a)


def mirror(alloc: Allocation, S: int) -> Allocation:
    """Send every cluster on sequence l to sequence S + 1 - l."""
    return Allocation(tuple(S + 1 - a for a in alloc.assignment))


Canonical = tuple[tuple[int, ...], ...]


def canonical_form(clusters: ClusterSet, alloc: Allocation, S: int) -> Canonical:
    """Per-sequence multiset of sizes, each sorted in descending order.

    Two allocations that differ only by swapping equal-size clusters share
    a canonical form.
    """
    alloc.validate(len(clusters), S)
    groups: list[list[int]] = [[] for _ in range(S)]
    for n, seq in zip(clusters.sizes, alloc.assignment):
        groups[seq - 1].append(n)
    return tuple(tuple(sorted(g, reverse=True)) for g in groups)


def mirror_canonical(canon: Canonical) -> Canonical:
    return tuple(reversed(canon))


def allocation_from_canonical(clusters: ClusterSet, canon: Canonical) -> Allocation:
    """Build a concrete allocation realising ``canon``.

    Clusters of equal size are taken in index order, so the result is
    deterministic.
    """
    free: dict[int, list[int]] = {}
    for i, n in enumerate(clusters.sizes):
        free.setdefault(n, []).append(i)
    assignment = [0] * len(clusters)
    for seq, group in enumerate(canon, start=1):
        for n in group:
            try:
                i = free[n].pop(0)
            except (KeyError, IndexError):
                raise InvalidDesignError(f"canonical form uses a cluster of size {n} not available") from None
            assignment[i] = seq
    if any(free.values()):
        raise InvalidDesignError("canonical form does not place every cluster")
    return Allocation(tuple(assignment))


def format_canonical(canon: Canonical) -> str:
    """Render as e.g. ``4,4,2;6;6,6``."""
    return ";".join(",".join(str(n) for n in g) for g in canon)


def parse_canonical(text: str) -> Canonical:
    groups = []
    for part in text.strip().split(";"):
        part = part.strip()
        groups.append(tuple(sorted((int(x) for x in part.split(",") if x.strip()), reverse=True)))
    return tuple(groups)


def same_design(clusters: ClusterSet, a1: Allocation, a2: Allocation, S: int) -> bool:
    return canonical_form(clusters, a1, S) == canonical_form(clusters, a2, S)


def quad_form(u: Iterable[float], M: np.ndarray, v: Iterable[float]) -> float:
    """u' M v summed with fsum over the terms (u_l * M_lm) * v_m."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return math.fsum(((u[:, None] * M) * v[None, :]).ravel())


def dot(u: Iterable[float], v: Iterable[float]) -> float:
    return math.fsum(np.asarray(u, dtype=float) * np.asarray(v, dtype=float))
