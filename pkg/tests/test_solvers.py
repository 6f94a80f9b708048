import itertools

import numpy as np
import pytest

from _helpers import random_iqp
from mmdquant.exceptions import ConfigurationError, SizeGuardError
from mmdquant.solvers import (
    IqpProblem, solve, solve_branch_bound, solve_exhaustive, solve_simplex_qp, tuple_objective,
)


def brute_force(problem):
    """Every feasible v, scored directly; lexicographically smallest v on ties."""
    n, s = problem.c.size, problem.s
    pool = itertools.combinations(range(n), s) if problem.binary else itertools.combinations_with_replacement(range(n), s)
    best = None
    for combo in pool:
        v = np.bincount(combo, minlength=n)
        obj = 0.5 * v @ problem.K @ v + problem.c @ v
        key = (round(obj, 12), tuple(-v))
        if best is None or key < best[0]:
            best = (key, v, obj)
    return best[1], best[2]


def test_identity_example():
    sol = solve_exhaustive(IqpProblem(np.eye(3), np.zeros(3), 2))
    np.testing.assert_array_equal(sol.v, [1, 1, 0])
    assert sol.objective == 1.0
    assert sol.proof == "exact"


def test_forced_single_candidate():
    sol = solve_exhaustive(IqpProblem([[2.0]], [-1.5], 3))
    np.testing.assert_array_equal(sol.v, [3])
    assert sol.objective == pytest.approx(0.5 * 9 * 2.0 + 3 * -1.5)


def test_zero_matrix_puts_all_on_argmin():
    c = np.array([0.3, -1.0, 2.0, -1.0])
    sol = solve_branch_bound(IqpProblem(np.zeros((4, 4)), c, 3))
    np.testing.assert_array_equal(sol.v, [0, 3, 0, 0])


def test_binary_full_selection():
    rng = np.random.default_rng(0)
    p = random_iqp(rng, 6, 6, binary=True)
    np.testing.assert_array_equal(solve_branch_bound(p).v, np.ones(6))


@pytest.mark.parametrize("binary", [False, True])
def test_exhaustive_matches_brute_force(binary):
    rng = np.random.default_rng(1 + binary)
    for _ in range(40):
        n = int(rng.integers(1, 8))
        s = int(rng.integers(1, min(n, 3) + 1)) if binary else int(rng.integers(1, 4))
        p = random_iqp(rng, n, s, binary)
        v, obj = brute_force(p)
        sol = solve_exhaustive(p)
        assert sol.objective == pytest.approx(obj, rel=1e-10, abs=1e-12)
        np.testing.assert_array_equal(sol.v, v)


@pytest.mark.parametrize("binary", [False, True])
def test_branch_bound_matches_exhaustive(binary):
    rng = np.random.default_rng(10 + binary)
    for _ in range(60):
        n = int(rng.integers(2, 11))
        s = int(rng.integers(1, min(n, 3) + 1))
        p = random_iqp(rng, n, s, binary)
        ex, bb = solve_exhaustive(p), solve_branch_bound(p)
        assert bb.objective == ex.objective
        np.testing.assert_array_equal(bb.v, ex.v)


def test_pruning_and_relaxation_are_sound():
    rng = np.random.default_rng(20)
    for _ in range(30):
        n = int(rng.integers(5, 15))
        s = int(rng.integers(2, 5))
        p = random_iqp(rng, n, s, bool(rng.integers(0, 2)) and s <= n)
        ref = solve_branch_bound(p, prune=False)
        for kwargs in (dict(), dict(relaxation=True)):
            sol = solve_branch_bound(p, **kwargs)
            np.testing.assert_array_equal(sol.v, ref.v)


def test_branch_bound_beats_random_feasible():
    rng = np.random.default_rng(30)
    for _ in range(10):
        p = random_iqp(rng, 25, 4)
        sol = solve_branch_bound(p)
        for _ in range(100):
            v = np.bincount(rng.integers(0, 25, 4), minlength=25)
            assert sol.objective <= p.objective(v) + 1e-12


def test_solution_invariants():
    rng = np.random.default_rng(40)
    for binary in (False, True):
        p = random_iqp(rng, 9, 3, binary)
        for sol in (solve_exhaustive(p), solve_branch_bound(p), solve(p)):
            assert sol.v.sum() == 3 and sol.v.min() >= 0
            if binary:
                assert sol.v.max() <= 1
            assert sol.objective == pytest.approx(p.objective(sol.v), rel=1e-10, abs=1e-14)
            assert tuple_objective(p, sol.indices) == sol.objective


def test_size_guard_reports_count():
    p = IqpProblem(np.eye(200), np.zeros(200), 5)
    with pytest.raises(SizeGuardError) as err:
        solve_exhaustive(p)
    assert err.value.count == p.enumeration_count()
    assert str(p.enumeration_count()) in str(err.value)


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        IqpProblem(np.eye(2), np.zeros(2), 3, binary=True)
    with pytest.raises(ConfigurationError):
        IqpProblem(np.eye(2), np.zeros(2), 0)
    with pytest.raises(Exception):
        IqpProblem([[1.0, 0.5], [0.0, 1.0]], np.zeros(2), 1)
    with pytest.raises(ConfigurationError):
        solve(IqpProblem(np.eye(2), np.zeros(2), 1), "gurobi")


def kkt_oracle(K, h, c2):
    """Best KKT point over every support pattern."""
    n = h.size
    best = np.inf
    for k in range(1, n + 1):
        for S in itertools.combinations(range(n), k):
            S = list(S)
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = 2 * K[np.ix_(S, S)]
            A[:k, k] = A[k, :k] = 1.0
            sol = np.linalg.lstsq(A, np.concatenate([2 * h[S], [1.0]]), rcond=None)[0][:k]
            if sol.min() < -1e-12 or abs(sol.sum() - 1) > 1e-9:
                continue
            w = np.zeros(n)
            w[S] = np.maximum(sol, 0)
            w /= w.sum()
            best = min(best, w @ K @ w - 2 * w @ h + c2)
    return best


def test_simplex_qp_examples():
    sol = solve_simplex_qp([[2.0]], [0.5], 0.3)
    assert sol.w.tolist() == [1.0]
    assert sol.phi_squared == pytest.approx(2.0 - 1.0 + 0.3)
    sol = solve_simplex_qp(np.eye(5), np.zeros(5), 0.0, tol=1e-12)
    np.testing.assert_allclose(sol.w, 0.2, atol=1e-6)
    assert sol.phi_squared == pytest.approx(0.2, abs=1e-10)


def test_simplex_qp_matches_kkt_oracle():
    rng = np.random.default_rng(50)
    for _ in range(20):
        G = rng.standard_normal((6, 4))
        K = G @ G.T
        h = rng.standard_normal(6)
        sol = solve_simplex_qp(K, h, 1.0, tol=1e-12)
        assert sol.phi_squared == pytest.approx(kkt_oracle(K, h, 1.0), abs=1e-6)
        assert sol.w.min() >= 0 and abs(sol.w.sum() - 1) <= 1e-12


def test_simplex_qp_monotone_and_converges_large():
    rng = np.random.default_rng(60)
    X = rng.standard_normal((1000, 2))
    K = np.exp(-0.5 * np.sum((X[:, None] - X[None]) ** 2, axis=2) / 0.25**2)
    h = K.mean(axis=1)
    sol = solve_simplex_qp(K, h, 0.0, max_iter=100_000, tol=1e-8)
    assert sol.duality_gap <= 1e-8
    assert np.all(np.diff(sol.history) <= 1e-12)
    assert sol.phi_squared == pytest.approx(sol.w @ K @ sol.w - 2 * sol.w @ h, rel=1e-10, abs=1e-14)


def test_time_limit_returns_labelled_incumbent():
    rng = np.random.default_rng(70)
    X = rng.standard_normal((80, 2))
    K = 1.0 / np.sqrt(1.0 + np.sum((X[:, None] - X[None]) ** 2, axis=2))
    p = IqpProblem(K, np.zeros(80), 8)
    sol = solve_branch_bound(p, time_limit=0.05)
    assert sol.proof == "heuristic" and sol.v.sum() == 8
    assert sol.objective == pytest.approx(p.objective(sol.v), rel=1e-10)
    small = random_iqp(rng, 8, 3)
    assert solve_branch_bound(small, time_limit=30).proof == "exact"
    with pytest.raises(ConfigurationError):
        solve_branch_bound(small, time_limit=0)
