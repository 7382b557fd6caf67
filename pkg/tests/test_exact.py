import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import dense_var_theta
from swd import Allocation, ClusterSet, TrialConfig, estimability, exact_precision_matrix, exact_precision_scalar
from swd.exact import information_matrix, scalar_information
from swd.geometry import allocation_from_canonical
from swd.search import canonical_allocations


def rel(a, b):
    return abs(a - b) / abs(b)


def test_routes_agree_on_all_rrt_allocations(rrt):
    for lam in (9, 19):
        cfg = TrialConfig(4, lam=lam)
        n_est = 0
        for canon in canonical_allocations(rrt, 3):
            alloc = allocation_from_canonical(rrt, canon)
            s = exact_precision_scalar(cfg, rrt, alloc)
            m = exact_precision_matrix(cfg, rrt, alloc)
            assert s.estimable == m.estimable
            if s.estimable:
                n_est += 1
                assert rel(s.v_exact, m.v_exact) < 1e-10
        assert n_est == 177


def test_matches_dense_individual_level_gls(rrt):
    alloc = Allocation((2, 3, 3, 1, 1, 1))
    for lam in (0.5, 9, 400):
        cfg = TrialConfig(4, lam=lam)
        want = dense_var_theta(rrt.sizes, alloc.assignment, 4, 1.0, 1 / lam)
        assert rel(exact_precision_scalar(cfg, rrt, alloc).var_theta, want) < 1e-9


def test_dense_oracle_with_nonunit_sigma():
    cs = ClusterSet((3, 5, 2, 4))
    alloc = Allocation((1, 2, 3, 3))
    cfg = TrialConfig(4, lam=2.0, sigma_e2=2.5)
    want = dense_var_theta(cs.sizes, alloc.assignment, 4, 2.5, 2.5 / 2.0)
    assert rel(exact_precision_scalar(cfg, cs, alloc).var_theta, want) < 1e-9
    assert rel(exact_precision_matrix(cfg, cs, alloc).var_theta, want) < 1e-9


def test_random_sets_both_routes():
    rng = np.random.default_rng(11)
    for _ in range(200):
        T = int(rng.integers(3, 7))
        C = int(rng.integers(2, 13))
        sizes = tuple(int(x) for x in rng.integers(1, 51, size=C))
        lam = float(10 ** rng.uniform(-1, 4))
        assign = tuple(int(x) for x in rng.integers(1, T, size=C))
        cfg, cs, alloc = TrialConfig(T, lam=lam), ClusterSet(sizes), Allocation(assign)
        s, m = exact_precision_scalar(cfg, cs, alloc), exact_precision_matrix(cfg, cs, alloc)
        assert s.estimable == m.estimable
        if s.estimable:
            assert rel(s.v_exact, m.v_exact) < 1e-10


def test_rational_inputs_give_exact_information(rrt):
    info = scalar_information(TrialConfig(4, lam=9), rrt, Allocation((2, 3, 3, 1, 1, 1)))
    assert isinstance(info, Fraction)


def test_lambda_zero_limit(rrt):
    alloc = Allocation((2, 3, 3, 1, 1, 1))
    at_zero = exact_precision_scalar(TrialConfig(4, lam=0), rrt, alloc)
    near = exact_precision_scalar(TrialConfig(4, lam=1e-7), rrt, alloc)
    mat = exact_precision_matrix(TrialConfig(4, lam=0), rrt, alloc)
    assert at_zero.estimable and mat.estimable
    assert rel(at_zero.v_exact, near.v_exact) < 1e-5
    assert rel(at_zero.v_exact, mat.v_exact) < 1e-10


def test_independent_observations_limit(rrt):
    alloc = Allocation((2, 3, 3, 1, 1, 1))
    inf = exact_precision_matrix(TrialConfig(4, icc=0), rrt, alloc)
    big = exact_precision_matrix(TrialConfig(4, lam=1e9), rrt, alloc)
    assert rel(inf.v_exact, big.v_exact) < 1e-6
    assert rel(exact_precision_scalar(TrialConfig(4, icc=0), rrt, alloc).v_exact, inf.v_exact) < 1e-10


def test_single_sequence_is_not_estimable(rrt):
    for seq in (1, 2, 3):
        alloc = Allocation((seq,) * 6)
        rep = exact_precision_scalar(TrialConfig(4, lam=9), rrt, alloc)
        assert not rep.estimable
        assert rep.v_exact == 0 and math.isinf(rep.var_theta)
        assert not estimability(TrialConfig(4, lam=9), rrt, alloc)


def test_scale_equivariance():
    cs = ClusterSet((3, 5, 2, 4))
    alloc = Allocation((1, 2, 3, 3))
    a = exact_precision_scalar(TrialConfig(4, lam=3.0, sigma_e2=1.0), cs, alloc)
    b = exact_precision_scalar(TrialConfig(4, lam=3.0, sigma_e2=7.0), cs, alloc)
    assert rel(b.var_theta, 7 * a.var_theta) < 1e-12
    assert rel(a.v_exact, b.v_exact) < 1e-12


def test_information_matrix_is_symmetric_psd(rrt, rrt9):
    M = information_matrix(rrt9, rrt, Allocation((2, 3, 3, 1, 1, 1)))
    np.testing.assert_allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0


def test_mirror_invariance_exact(rrt, rrt9):
    from swd import mirror

    alloc = Allocation((2, 3, 3, 1, 1, 1))
    a = exact_precision_scalar(rrt9, rrt, alloc).v_exact
    b = exact_precision_scalar(rrt9, rrt, mirror(alloc, 3)).v_exact
    assert rel(a, b) < 1e-12
