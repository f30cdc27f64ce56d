import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alignkit import _kernels_py, kernels
from alignkit.assign import assignment_cost, permutation_from_distribution, solve_lsap
from alignkit.decomp import is_permutation
from alignkit.errors import InfeasibleAssignmentError, ShapeError


def brute_force(cost):
    L = cost.shape[0]
    return min(cost[np.arange(L), list(p)].sum() for p in itertools.permutations(range(L)))


def test_identity_on_zero_diagonal():
    C = np.ones((4, 4)) - np.eye(4)
    np.testing.assert_array_equal(solve_lsap(C), np.arange(4))


def test_three_by_three():
    C = np.array([[4, 1, 3], [2, 0, 5], [3, 2, 2]], dtype=float)
    sigma = solve_lsap(C)
    assert assignment_cost(C, sigma) == 5
    np.testing.assert_array_equal(sigma, [1, 0, 2])


def test_row_and_column_shift_invariance(rng):
    for _ in range(50):
        C = rng.random((6, 6))
        base = assignment_cost(C, solve_lsap(C))
        shifted = C.copy()
        shifted[rng.integers(6)] += rng.normal() * 10
        shifted[:, rng.integers(6)] += rng.normal() * 10
        sigma = solve_lsap(shifted)
        assert assignment_cost(shifted, sigma) == pytest.approx(brute_force(shifted), abs=1e-9)
        assert assignment_cost(C, sigma) == pytest.approx(base, abs=1e-9)


def test_matches_brute_force(rng):
    for _ in range(200):
        L = int(rng.integers(1, 7))
        C = rng.integers(0, 10, size=(L, L)).astype(float)
        assert assignment_cost(C, solve_lsap(C)) == brute_force(C)


def test_forbidden_cells():
    inf = np.inf
    C = np.array([[inf, 1, inf], [2, inf, inf], [inf, inf, 3]])
    np.testing.assert_array_equal(solve_lsap(C), [1, 0, 2])


def test_infeasible():
    C = np.array([[1.0, np.inf], [2.0, np.inf]])
    with pytest.raises(InfeasibleAssignmentError):
        solve_lsap(C)


def test_shape_and_value_errors():
    with pytest.raises(ShapeError):
        solve_lsap(np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        solve_lsap(np.array([[np.nan]]))
    with pytest.raises(ShapeError):
        solve_lsap(np.array([[-np.inf]]))
    assert len(solve_lsap(np.zeros((0, 0)))) == 0


def test_agrees_with_scipy(rng):
    scipy_opt = pytest.importorskip("scipy.optimize")
    for _ in range(100):
        L = int(rng.integers(1, 60))
        C = rng.normal(size=(L, L))
        C[rng.random((L, L)) < 0.2] = np.inf
        rows, cols = np.arange(L), rng.permutation(L)
        C[rows, cols] = rng.normal(size=L)  # keep one feasible matching
        _, ref = scipy_opt.linear_sum_assignment(C)
        assert assignment_cost(C, solve_lsap(C)) == pytest.approx(assignment_cost(C, ref), abs=1e-9)


def test_deterministic_on_ties():
    C = np.zeros((5, 5))
    first = solve_lsap(C)
    assert is_permutation(first)
    for _ in range(3):
        np.testing.assert_array_equal(solve_lsap(C), first)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_compiled_and_python_kernels_agree(rng):
    from alignkit import _kernels

    for _ in range(200):
        L = int(rng.integers(1, 20))
        C = rng.integers(0, 5, size=(L, L)).astype(float)
        np.testing.assert_array_equal(_kernels.lsap(C), _kernels_py.lsap(C))
        A = (rng.random((L, int(rng.integers(1, 20)))) < 0.3).astype(np.uint8)
        A[A.sum(axis=1) == 0, 0] = 1
        for x, y in zip(_kernels.canonical_factors(A), _kernels_py.canonical_factors(A)):
            np.testing.assert_array_equal(x, y)
    assert _kernels.lsap(np.array([[np.inf]])) is None
    assert _kernels_py.lsap(np.array([[np.inf]])) is None


def test_permutation_from_identity_distribution():
    np.testing.assert_array_equal(permutation_from_distribution(np.eye(5)), np.eye(5))


def test_permutation_from_conflicting_rows():
    for L in range(1, 7):
        P_pred = np.full((L, L), 0.0)
        P_pred[:, 0] = 1.0
        P = permutation_from_distribution(P_pred)
        assert np.all(P.sum(axis=0) == 1) and np.all(P.sum(axis=1) == 1)


def test_permutation_from_distribution_is_optimal(rng):
    for _ in range(100):
        L = int(rng.integers(1, 7))
        P_pred = rng.dirichlet(np.ones(L) * 0.3, size=L)
        C = -np.log(P_pred + 1e-9)
        P = permutation_from_distribution(P_pred)
        assert (C * P).sum() == pytest.approx(brute_force(C), abs=1e-9)


def test_uniform_distribution_is_deterministic():
    U = np.full((4, 4), 0.25)
    first = permutation_from_distribution(U)
    np.testing.assert_array_equal(permutation_from_distribution(U), first)
    assert np.all(first.sum(axis=0) == 1)


@settings(max_examples=200)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.just(0)).map(lambda t: (t[0], t[0])), elements=st.floats(-50, 50)))
def test_optimality_property(C):
    sigma = solve_lsap(C)
    assert is_permutation(sigma)
    assert assignment_cost(C, sigma) == pytest.approx(brute_force(C), abs=1e-9)
