"""Enumeration, seeded sampling, ranking and recommendation over allocations."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement, product
from typing import Iterator

import numpy as np

from .approx import ApproxConstants, ApproxTerms, RegressionFit, approx_constants, approx_terms, fit_regression
from .errors import InvalidDesignError, NoQualifierError, NonEstimableError, TooLargeError
from .exact import exact_precision_scalar
from .geometry import (
    Allocation,
    Canonical,
    ClusterSet,
    SequenceGeometry,
    TrialConfig,
    allocation_from_canonical,
    build_geometry,
    canonical_form,
    derive_profile,
    dot,
    mirror_canonical,
)
from .optimal import a_inv_ones

EXHAUSTIVE = "exhaustive"
RANDOM_UNRESTRICTED = "random-unrestricted"
RANDOM_BALANCED = "random-cluster-balanced"
MODES = (EXHAUSTIVE, RANDOM_UNRESTRICTED, RANDOM_BALANCED)

OUTER = "outer-symmetric"
INNER = "inner-symmetric"
FREE = "free"
EXTRA_RULES = (OUTER, INNER, FREE)

DEFAULT_CAP = 10**6
EFFICIENCY_TALLY = (0.90, 0.95, 0.98, 0.99)


@dataclass(frozen=True)
class SearchScheme:
    mode: str = EXHAUSTIVE
    reps: int = 1000
    seed: int | None = None
    mirror_dedup: bool = False
    extra_cluster_rule: str = OUTER
    cap: int = DEFAULT_CAP
    exact_top_k: int = 100
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.extra_cluster_rule not in EXTRA_RULES:
            raise ValueError(f"extra_cluster_rule must be one of {EXTRA_RULES}, got {self.extra_cluster_rule!r}")
        if self.mode != EXHAUSTIVE and self.reps < 1:
            raise ValueError("reps must be >= 1 for random modes")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class RankedAllocation:
    allocation: Allocation
    canonical: Canonical
    P: np.ndarray
    K: np.ndarray
    a: float
    b: float
    v_approx: float
    terms: ApproxTerms
    v_opt: float
    p_opt: np.ndarray
    efficiency: float
    distance: float
    imbalance: float
    v_exact: float | None = None


@dataclass(frozen=True)
class DesignContext:
    """Everything about (config, clusters) that does not depend on the allocation."""

    config: TrialConfig
    clusters: ClusterSet
    geometry: SequenceGeometry
    fit: RegressionFit
    constants: ApproxConstants
    _p_base: np.ndarray = field(repr=False)
    _p_slope: np.ndarray = field(repr=False)
    _v_base: float = field(repr=False)

    @classmethod
    def build(cls, config: TrialConfig, clusters: ClusterSet) -> "DesignContext":
        geom = build_geometry(config.sequences)
        fit = fit_regression(config, clusters)
        c = approx_constants(fit, geom)
        S = geom.S
        wb = c.W * c.beta
        p_base = wb * geom.ones + 0.5 * (1 - wb * S) * geom.e
        p_slope = -c.h1 / (2 * (1 - c.gamma * c.W * (S - 1))) * geom.f
        v_base = 1 / dot(geom.ones, a_inv_ones(fit, geom))
        return cls(config, clusters, geom, fit, c, p_base, p_slope, v_base)

    def p_opt(self, b: float) -> np.ndarray:
        return self._p_base + b * self._p_slope

    def v_opt(self, a: float, b: float) -> float:
        c = self.constants
        return self._v_base - c.h3 * b * b - c.W * (1 - c.beta) * a

    def evaluate(self, alloc: Allocation, canonical: Canonical | None = None) -> RankedAllocation:
        S = self.geometry.S
        if canonical is None:
            canonical = canonical_form(self.clusters, alloc, S)
        prof = derive_profile(self.config, self.clusters, alloc)
        terms = approx_terms(prof.P, prof.K, self.fit, self.constants, self.geometry)
        v = terms.total
        v_opt = self.v_opt(prof.a, prof.b)
        p_opt = self.p_opt(prof.b)
        diff = prof.P - p_opt
        return RankedAllocation(
            allocation=alloc,
            canonical=canonical,
            P=prof.P,
            K=prof.K,
            a=prof.a,
            b=prof.b,
            v_approx=v,
            terms=terms,
            v_opt=v_opt,
            p_opt=p_opt,
            efficiency=v / v_opt,
            distance=math.sqrt(dot(diff, diff)),
            imbalance=2 * self.clusters.total * dot(prof.P, self.geometry.z),
        )

    def with_exact(self, ranked: RankedAllocation) -> RankedAllocation:
        rep = exact_precision_scalar(self.config, self.clusters, ranked.allocation)
        return replace(ranked, v_exact=rep.v_exact)


def rank_key(r: RankedAllocation):
    return (-r.v_approx, r.canonical)


# -- enumeration -----------------------------------------------------------

def count_canonical(clusters: ClusterSet, S: int) -> int:
    """Number of distinct canonical allocations of the clusters to S sequences."""
    return math.prod(math.comb(m + S - 1, S - 1) for m in Counter(clusters.sizes).values())


def canonical_allocations(clusters: ClusterSet, S: int) -> Iterator[Canonical]:
    groups = sorted(Counter(clusters.sizes).items(), key=lambda kv: -kv[0])
    choices = [list(combinations_with_replacement(range(S), m)) for _, m in groups]
    for combo in product(*choices):
        seqs: list[list[int]] = [[] for _ in range(S)]
        for (size, _), picks in zip(groups, combo):
            for s in picks:
                seqs[s].append(size)
        yield tuple(tuple(g) for g in seqs)


def _dedup_mirrors(ranked: list[RankedAllocation]) -> list[RankedAllocation]:
    seen: set[Canonical] = set()
    out = []
    for r in ranked:
        if mirror_canonical(r.canonical) in seen:
            continue
        seen.add(r.canonical)
        out.append(r)
    return out


def enumerate_allocations(clusters: ClusterSet, config: TrialConfig,
                          scheme: SearchScheme | None = None) -> list[RankedAllocation]:
    """Every estimable canonical allocation, best approximate precision first.

    Ties are broken on the canonical form, so mirror pairs appear together
    with the lexicographically smaller member first.
    """
    scheme = scheme or SearchScheme()
    S = config.sequences
    n = count_canonical(clusters, S)
    if n > scheme.cap:
        raise TooLargeError(
            f"{n} canonical allocations exceed the cap of {scheme.cap}; use a random sampling mode instead"
        )
    ctx = DesignContext.build(config, clusters)
    ranked = []
    for canon in canonical_allocations(clusters, S):
        if sum(1 for g in canon if g) < 2:
            continue
        ranked.append(ctx.evaluate(allocation_from_canonical(clusters, canon), canon))
    ranked.sort(key=rank_key)
    if scheme.mirror_dedup:
        ranked = _dedup_mirrors(ranked)
    k = min(scheme.exact_top_k, len(ranked))
    ranked[:k] = [ctx.with_exact(r) for r in ranked[:k]]
    return ranked


# -- sampling --------------------------------------------------------------

def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0, rep])


def extra_order(S: int, rule: str) -> list[int]:
    """Sequences (1-based) in the order they receive surplus clusters."""
    if rule == OUTER:
        order = []
        lo, hi = 1, S
        while lo <= hi:
            order.append(lo)
            if hi != lo:
                order.append(hi)
            lo, hi = lo + 1, hi - 1
        return order
    if rule == INNER:
        return list(reversed(extra_order(S, OUTER)))
    raise ValueError(f"no fixed order for rule {rule!r}")


def balanced_counts(C: int, S: int, rule: str, rng: np.random.Generator | None = None) -> list[int]:
    base, extra = divmod(C, S)
    counts = [base] * S
    if extra:
        if rule == FREE:
            targets = (rng.choice(S, size=extra, replace=False) + 1).tolist()
        else:
            targets = extra_order(S, rule)[:extra]
        for t in targets:
            counts[t - 1] += 1
    return counts


def draw_allocation(rep: int, seed: int, mode: str, C: int, S: int, rule: str = OUTER) -> Allocation:
    rng = _rep_rng(seed, rep)
    if C < 2:
        raise InvalidDesignError("at least two clusters are needed for an estimable allocation")
    if mode == RANDOM_UNRESTRICTED:
        while True:
            assignment = rng.integers(1, S + 1, size=C)
            if len(set(assignment.tolist())) >= 2:
                return Allocation(tuple(assignment.tolist()))
    if mode == RANDOM_BALANCED:
        counts = balanced_counts(C, S, rule, rng)
        order = rng.permutation(C)
        assignment = [0] * C
        pos = 0
        for seq, k in enumerate(counts, start=1):
            for i in order[pos:pos + k]:
                assignment[int(i)] = seq
            pos += k
        return Allocation(tuple(assignment))
    raise ValueError(f"mode {mode!r} is not a random sampling mode")


def _sample_chunk(args) -> list[RankedAllocation]:
    ctx, seed, mode, rule, start, stop = args
    C, S = len(ctx.clusters), ctx.geometry.S
    return [ctx.evaluate(draw_allocation(rep, seed, mode, C, S, rule)) for rep in range(start, stop)]


def sample(clusters: ClusterSet, config: TrialConfig, scheme: SearchScheme,
           context: DesignContext | None = None) -> Iterator[RankedAllocation]:
    """Yield one evaluated allocation per rep, in rep order.

    Rep ``i`` draws from a generator seeded by (seed, i) alone, so the
    stream does not depend on ``scheme.workers``.
    """
    if scheme.mode == EXHAUSTIVE:
        raise ValueError("sample() needs a random mode")
    if scheme.seed is None:
        raise ValueError("sampling requires a seed")
    ctx = context or DesignContext.build(config, clusters)
    if scheme.workers <= 1:
        for rep in range(scheme.reps):
            yield from _sample_chunk((ctx, scheme.seed, scheme.mode, scheme.extra_cluster_rule, rep, rep + 1))
        return
    chunk = max(1, math.ceil(scheme.reps / (4 * scheme.workers)))
    jobs = [(ctx, scheme.seed, scheme.mode, scheme.extra_cluster_rule, s, min(s + chunk, scheme.reps))
            for s in range(0, scheme.reps, chunk)]
    with ProcessPoolExecutor(max_workers=scheme.workers) as pool:
        for part in pool.map(_sample_chunk, jobs):
            yield from part


def best_sampled(clusters: ClusterSet, config: TrialConfig, scheme: SearchScheme) -> RankedAllocation:
    return min(sample(clusters, config, scheme), key=rank_key)


# -- recommendation --------------------------------------------------------

@dataclass(frozen=True)
class Recommendation:
    choice: RankedAllocation
    seed: int
    reps: int
    threshold: float
    qualifiers: int
    candidates: int
    best_efficiency: float
    tally: dict

    def audit(self) -> dict:
        return {
            "seed": self.seed,
            "reps": self.reps,
            "threshold": self.threshold,
            "qualifiers": self.qualifiers,
            "candidates": self.candidates,
            "best_efficiency": self.best_efficiency,
            **{f"below_{t:.2f}": n for t, n in self.tally.items()},
        }


def recommend(clusters: ClusterSet, config: TrialConfig, scheme: SearchScheme,
              threshold: float) -> Recommendation:
    """Draw allocations, keep those at or above ``threshold`` efficiency and pick one uniformly."""
    if scheme.seed is None:
        raise ValueError("recommend requires a seed")
    if scheme.mode == EXHAUSTIVE:
        pool = enumerate_allocations(clusters, config, SearchScheme(cap=scheme.cap, exact_top_k=0))
    else:
        pool = list(sample(clusters, config, scheme))
    effs = np.array([r.efficiency for r in pool])
    qualifiers = [r for r in pool if r.efficiency >= threshold]
    best = float(effs.max()) if len(effs) else math.nan
    if not qualifiers:
        raise NoQualifierError(
            f"no allocation reached efficiency {threshold}; best found was {best:.6f}", best_efficiency=best
        )
    rng = np.random.default_rng([scheme.seed, 1])
    choice = qualifiers[int(rng.integers(len(qualifiers)))]
    tally = {t: int(np.sum(effs < t)) for t in EFFICIENCY_TALLY}
    return Recommendation(
        choice=choice,
        seed=scheme.seed,
        reps=len(pool),
        threshold=threshold,
        qualifiers=len(qualifiers),
        candidates=len(pool),
        best_efficiency=best,
        tally=tally,
    )


# -- metrics ---------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    distance: float
    imbalance: float
    mean_sizes: tuple[float | None, ...]


def metrics(alloc: Allocation, config: TrialConfig, clusters: ClusterSet,
            context: DesignContext | None = None) -> Metrics:
    """Distance of P from its optimum, A/B imbalance 2N P'z and mean cluster size per sequence."""
    ctx = context or DesignContext.build(config, clusters)
    r = ctx.evaluate(alloc)
    if sum(1 for k in r.K if k > 0) < 2:
        raise NonEstimableError("allocation uses a single sequence")
    N, C = clusters.total, len(clusters)
    mean_sizes = tuple(None if k == 0 else N * p / (C * k) for p, k in zip(r.P, r.K))
    return Metrics(distance=r.distance, imbalance=r.imbalance, mean_sizes=mean_sizes)
