import numpy as np
import pytest

from swd import (
    Allocation,
    ClusterSet,
    NoQualifierError,
    NonEstimableError,
    SearchScheme,
    TooLargeError,
    TrialConfig,
    canonical_form,
    enumerate_allocations,
    metrics,
    recommend,
    sample,
)
from swd.geometry import format_canonical, mirror_canonical, parse_canonical
from swd.search import (
    FREE,
    INNER,
    OUTER,
    RANDOM_BALANCED,
    RANDOM_UNRESTRICTED,
    DesignContext,
    balanced_counts,
    best_sampled,
    draw_allocation,
    extra_order,
)


def test_enumeration_counts_and_order(rrt, rrt9):
    res = enumerate_allocations(rrt, rrt9)
    assert len(res) == 177
    vs = [r.v_approx for r in res]
    assert vs == sorted(vs, reverse=True)
    assert format_canonical(res[0].canonical) == "4,4,2;6;6,6"
    assert res[0].v_approx == pytest.approx(0.343, abs=1e-3)
    assert res[0].v_exact == pytest.approx(0.3433, abs=1e-4)
    assert len({r.canonical for r in res}) == 177


def test_mirror_pairs_adjacent_and_dedup(rrt, rrt9):
    res = enumerate_allocations(rrt, rrt9)
    assert res[0].v_approx == res[1].v_approx
    assert res[1].canonical == mirror_canonical(res[0].canonical)
    dedup = enumerate_allocations(rrt, rrt9, SearchScheme(mirror_dedup=True))
    selfmirror = sum(1 for r in res if mirror_canonical(r.canonical) == r.canonical)
    assert len(dedup) == (177 - selfmirror) // 2 + selfmirror
    canons = {r.canonical for r in dedup}
    assert all(mirror_canonical(c) not in canons or mirror_canonical(c) == c for c in canons)


def test_exact_only_for_top_k(rrt, rrt9):
    res = enumerate_allocations(rrt, rrt9, SearchScheme(exact_top_k=5))
    assert all(r.v_exact is not None for r in res[:5])
    assert all(r.v_exact is None for r in res[5:])


def test_cap(rrt, rrt9):
    with pytest.raises(TooLargeError):
        enumerate_allocations(rrt, rrt9, SearchScheme(cap=100))


def test_cluster_balanced_subset(rrt, rrt9):
    res = enumerate_allocations(rrt, rrt9)
    balanced = [r for r in res if np.allclose(r.K, 1 / 3)]
    assert len(balanced) == 15
    assert balanced[0].v_approx == pytest.approx(0.3360, abs=5e-4)
    assert format_canonical(balanced[0].canonical) in ("6,6;4,2;6,4", "6,4;4,2;6,6")


def test_extra_order():
    assert extra_order(5, OUTER) == [1, 5, 2, 4, 3]
    assert extra_order(4, INNER) == [3, 2, 4, 1]
    assert balanced_counts(22, 4, OUTER) == [6, 5, 5, 6]
    assert balanced_counts(22, 4, INNER) == [5, 6, 6, 5]
    counts = balanced_counts(23, 4, FREE, np.random.default_rng(0))
    assert sorted(counts) == [5, 6, 6, 6]
    with pytest.raises(ValueError):
        extra_order(4, FREE)


def test_draws_are_deterministic_per_rep():
    a = draw_allocation(7, 123, RANDOM_BALANCED, 22, 4)
    b = draw_allocation(7, 123, RANDOM_BALANCED, 22, 4)
    c = draw_allocation(8, 123, RANDOM_BALANCED, 22, 4)
    assert a == b and a != c
    assert sorted(np.bincount(a.assignment, minlength=5)[1:]) == [5, 5, 6, 6]
    assert list(np.bincount(a.assignment, minlength=5)[1:]) == [6, 5, 5, 6]


def test_unrestricted_draws_use_two_sequences():
    for rep in range(300):
        assert draw_allocation(rep, 5, RANDOM_UNRESTRICTED, 2, 3).sequences_used() >= 2


def test_sample_reproducible_and_worker_independent(rrt, rrt9):
    s1 = SearchScheme(mode=RANDOM_UNRESTRICTED, reps=60, seed=99)
    s2 = SearchScheme(mode=RANDOM_UNRESTRICTED, reps=60, seed=99, workers=3)
    a = [r.allocation for r in sample(rrt, rrt9, s1)]
    b = [r.allocation for r in sample(rrt, rrt9, s2)]
    assert a == b
    c = [r.allocation for r in sample(rrt, rrt9, SearchScheme(mode=RANDOM_UNRESTRICTED, reps=60, seed=100))]
    assert a != c


def test_sample_prefix_property(rrt, rrt9):
    short = [r.allocation for r in sample(rrt, rrt9, SearchScheme(mode=RANDOM_BALANCED, reps=10, seed=1))]
    long = [r.allocation for r in sample(rrt, rrt9, SearchScheme(mode=RANDOM_BALANCED, reps=40, seed=1))]
    assert long[:10] == short


def test_sample_requires_seed_and_random_mode(rrt, rrt9):
    with pytest.raises(ValueError):
        list(sample(rrt, rrt9, SearchScheme(mode=RANDOM_BALANCED, reps=3)))
    with pytest.raises(ValueError):
        list(sample(rrt, rrt9, SearchScheme(seed=1)))


def test_sampling_finds_the_enumerated_optimum(rrt, rrt9):
    best = best_sampled(rrt, rrt9, SearchScheme(mode=RANDOM_UNRESTRICTED, reps=3000, seed=7))
    top = enumerate_allocations(rrt, rrt9)[0]
    assert best.v_approx == pytest.approx(top.v_approx, abs=1e-15)


def test_scheme_validation():
    with pytest.raises(ValueError):
        SearchScheme(mode="greedy")
    with pytest.raises(ValueError):
        SearchScheme(extra_cluster_rule="middle")
    with pytest.raises(ValueError):
        SearchScheme(mode=RANDOM_BALANCED, reps=0, seed=1)
    with pytest.raises(ValueError):
        SearchScheme(seed=-1)


def test_recommend(rrt, rrt9):
    scheme = SearchScheme(mode=RANDOM_BALANCED, reps=200, seed=42)
    rec = recommend(rrt, rrt9, scheme, threshold=0.97)
    assert rec.choice.efficiency >= 0.97
    assert rec.qualifiers >= 1 and rec.candidates == 200
    again = recommend(rrt, rrt9, scheme, threshold=0.97)
    assert again.choice.allocation == rec.choice.allocation
    audit = rec.audit()
    assert audit["seed"] == 42 and audit["reps"] == 200
    assert audit["below_0.90"] <= audit["below_0.95"] <= audit["below_0.98"] <= audit["below_0.99"]


def test_recommend_exhaustive_and_failure(rrt, rrt9):
    rec = recommend(rrt, rrt9, SearchScheme(seed=1), threshold=0.99)
    assert rec.candidates == 177
    with pytest.raises(NoQualifierError) as info:
        recommend(rrt, rrt9, SearchScheme(seed=1), threshold=1.5)
    assert info.value.best_efficiency == pytest.approx(rec.best_efficiency)
    assert info.value.best_efficiency <= 1


def test_metrics(rrt, rrt9):
    alloc = Allocation((2, 3, 3, 1, 1, 1))
    m = metrics(alloc, rrt9, rrt)
    assert m.distance == pytest.approx(0.042, abs=5e-4)
    assert m.imbalance == pytest.approx(2 * 28 * (-10 / 28 + 12 / 28))
    assert m.mean_sizes == pytest.approx((10 / 3, 6.0, 6.0))
    gap = metrics(Allocation((1, 1, 3, 3, 3, 1)), rrt9, rrt)
    assert gap.mean_sizes[1] is None
    with pytest.raises(NonEstimableError):
        metrics(Allocation((2,) * 6), rrt9, rrt)


def test_context_matches_standalone_functions(rrt, rrt19):
    from swd import build_geometry, fit_regression, optimal_P

    ctx = DesignContext.build(rrt19, rrt)
    K = np.array([3, 1, 2]) / 6
    opt = optimal_P(fit_regression(rrt19, rrt), build_geometry(3), K)
    np.testing.assert_allclose(ctx.p_opt(opt.b), opt.p_opt, atol=1e-15)
    assert ctx.v_opt(opt.a, opt.b) == pytest.approx(opt.v_opt, abs=1e-15)


def test_canonical_roundtrip_in_ranked(rrt, rrt19):
    for r in enumerate_allocations(rrt, rrt19)[:20]:
        assert canonical_form(rrt, r.allocation, 3) == r.canonical
        assert parse_canonical(format_canonical(r.canonical)) == r.canonical


def test_larger_trial_enumerates():
    cs = ClusterSet((3, 5, 5, 8, 2, 9, 4))
    res = enumerate_allocations(cs, TrialConfig(5, lam=10), SearchScheme(exact_top_k=3))
    assert res[0].v_exact == pytest.approx(res[0].v_approx, rel=0.02)
    assert all(r.efficiency <= 1 + 1e-12 for r in res)
