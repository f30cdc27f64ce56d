import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alignkit.decomp import (
    aligned_input_weights,
    check_structure,
    decompose,
    duplication_to_matrix,
    group_labels,
    grouping_to_matrix,
    is_permutation,
    labels_to_grouping,
    labels_to_sizes,
    permutation_matrix,
    recompose,
    recompose_factors,
    sizes_to_labels,
)
from alignkit.errors import DecompositionError, InvalidLabelsError, ShapeError


def brute_force_permutation(A):
    """Every permutation P with G P D = A whose matching keeps copies and group members in index order.

    Copy j of column m must meet the j-th nonzero of that column (by target row)
    and member k of row n the k-th nonzero of that row (by source column).
    """
    A = np.asarray(A, dtype=np.int64)
    c, r = A.sum(axis=0), A.sum(axis=1)
    D, G = duplication_to_matrix(c), grouping_to_matrix(r)
    slot_source = np.repeat(np.arange(A.shape[1]), c)
    slot_copy = np.concatenate([np.arange(k) for k in c]) if len(c) else np.zeros(0, int)
    tgt_group = np.repeat(np.arange(A.shape[0]), r)
    tgt_member = np.concatenate([np.arange(k) for k in r])
    found = []
    for perm in itertools.permutations(range(int(c.sum()))):
        P = permutation_matrix(perm)
        if not np.array_equal(G @ P @ D, A):
            continue
        ok = True
        for t, s in enumerate(perm):
            n, m = tgt_group[t], slot_source[s]
            if np.flatnonzero(A[:, m])[slot_copy[s]] != n or np.flatnonzero(A[n])[tgt_member[t]] != m:
                ok = False
                break
        if ok:
            found.append(np.array(perm))
    return found


def random_alignment(rng, N, M, density=0.3):
    A = (rng.random((N, M)) < density).astype(np.uint8)
    for n in np.flatnonzero(A.sum(axis=1) == 0):
        A[n, rng.integers(M)] = 1
    return A


def test_identity():
    d = decompose(np.eye(3, dtype=np.uint8))
    for X in (d.D, d.P, d.G):
        np.testing.assert_array_equal(X, np.eye(3))


def test_one_to_many_and_many_to_one():
    d = decompose([[1, 1], [0, 1]])
    np.testing.assert_array_equal(d.c, [1, 2])
    np.testing.assert_array_equal(d.r, [2, 1])
    assert d.L == 3
    np.testing.assert_array_equal(d.D, [[1, 0], [0, 1], [0, 1]])
    np.testing.assert_array_equal(d.P, np.eye(3))
    np.testing.assert_array_equal(d.G, [[1, 1, 0], [0, 0, 1]])
    np.testing.assert_array_equal(d.G @ d.P @ d.D, [[1, 1], [0, 1]])


def test_swap():
    d = decompose([[0, 1], [1, 0]])
    np.testing.assert_array_equal(d.c, [1, 1])
    np.testing.assert_array_equal(d.D, np.eye(2))
    np.testing.assert_array_equal(d.P, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(d.G, np.eye(2))


def test_zero_fertility_column():
    d = decompose([[0, 1], [0, 1]])
    np.testing.assert_array_equal(d.D, [[0, 1], [0, 1]])
    np.testing.assert_array_equal(recompose(d.D, d.P, d.G), [[0, 1], [0, 1]])


def test_null_row_rejected():
    with pytest.raises(DecompositionError):
        decompose([[1, 0], [0, 0]])


def test_non_binary_rejected():
    with pytest.raises(DecompositionError):
        decompose([[2, 0], [0, 1]])


def test_matches_brute_force_unique_matching(rng):
    for _ in range(150):
        N, M = rng.integers(1, 4, size=2)
        A = random_alignment(rng, N, M, 0.5)
        if A.sum() > 7:
            continue
        found = brute_force_permutation(A)
        assert len(found) == 1
        np.testing.assert_array_equal(decompose(A).perm, found[0])


def test_exhaustive_round_trip_small():
    for N in range(1, 4):
        for M in range(1, 4):
            for bits in itertools.product((0, 1), repeat=N * M):
                A = np.array(bits, dtype=np.uint8).reshape(N, M)
                if (A.sum(axis=1) == 0).any():
                    continue
                d = decompose(A)
                check_structure(d)
                np.testing.assert_array_equal(recompose(d.D, d.P, d.G), A)


def test_random_round_trip_large(rng):
    for _ in range(200):
        N, M = rng.integers(1, 33, size=2)
        A = random_alignment(rng, N, M, rng.uniform(0.02, 0.3))
        d = decompose(A)
        check_structure(d)
        np.testing.assert_array_equal(recompose(d.D, d.P, d.G), A)
        np.testing.assert_array_equal(recompose_factors(d), A)


def _broken(field, X):
    d = decompose(np.array([[1, 0, 0], [0, 1, 1], [0, 0, 1]]))
    d.__dict__[field] = np.asarray(X, dtype=np.uint8)
    return d


@pytest.mark.parametrize(
    "field, X",
    [
        # D: a slot copying the wrong column, an extra copy, a missing slot
        ("D", [[1, 0, 0], [0, 0, 1], [0, 1, 0], [0, 0, 1]]),
        ("D", [[1, 1, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]]),
        ("D", [[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
        # G: groups out of order
        ("G", [[0, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 1]]),
        # P: a zero row whose argmax still lands on a distinct column
        ("P", [[0, 0, 0, 0], [0, 1, 1, 0], [0, 0, 1, 0], [0, 0, 0, 1]]),
        ("P", [[1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]),
    ],
)
def test_check_structure_rejects(field, X):
    with pytest.raises(DecompositionError):
        check_structure(_broken(field, X))


def test_recompose_is_boolean_product():
    # two copies of one source token in one group: the integer product would hold a 2
    D, P, G = duplication_to_matrix([2]), np.eye(2), grouping_to_matrix([2])
    assert (G @ P @ D)[0, 0] == 2
    np.testing.assert_array_equal(recompose(D, P, G), [[1]])


def test_recompose_random_factors_is_binary(rng):
    for _ in range(1000):
        c = rng.integers(0, 4, size=rng.integers(1, 6))
        if c.sum() == 0:
            c[0] = 1
        L = int(c.sum())
        cuts = np.sort(rng.choice(np.arange(1, L), size=rng.integers(0, L), replace=False)) if L > 1 else []
        r = np.diff(np.concatenate([[0], cuts, [L]])).astype(int)
        A = recompose(duplication_to_matrix(c), permutation_matrix(rng.permutation(L)), grouping_to_matrix(r))
        assert set(np.unique(A)) <= {0, 1}


def test_recompose_shape_mismatch():
    with pytest.raises(ShapeError):
        recompose(np.eye(2), np.eye(3), np.eye(3))


def test_group_labels_examples():
    np.testing.assert_array_equal(group_labels(np.eye(3)), [0, 0, 0])
    np.testing.assert_array_equal(group_labels([[1, 1, 0], [0, 0, 1]]), [0, 1, 0])
    np.testing.assert_array_equal(group_labels([[1, 1, 1]]), [0, 1, 1])


def test_labels_to_grouping_inverts_examples():
    np.testing.assert_array_equal(labels_to_grouping([0, 0, 0]), np.eye(3))
    np.testing.assert_array_equal(labels_to_grouping([0, 1, 0]), [[1, 1, 0], [0, 0, 1]])
    np.testing.assert_array_equal(labels_to_grouping([0, 1, 1]), [[1, 1, 1]])


def test_invalid_labels():
    with pytest.raises(InvalidLabelsError):
        labels_to_grouping([1, 0])


def test_duplication_to_matrix_examples():
    np.testing.assert_array_equal(duplication_to_matrix([1, 1]), np.eye(2))
    np.testing.assert_array_equal(duplication_to_matrix([2, 1]), [[1, 0], [1, 0], [0, 1]])
    np.testing.assert_array_equal(duplication_to_matrix([0, 2]), [[0, 1], [0, 1]])
    with pytest.raises(DecompositionError):
        duplication_to_matrix([0, 0])


def test_aligned_input_weights_examples():
    np.testing.assert_array_equal(aligned_input_weights(np.eye(2)), np.eye(2))
    np.testing.assert_array_equal(aligned_input_weights([[1, 0, 1]]), [[0.5, 0, 0.5]])
    np.testing.assert_array_equal(aligned_input_weights([[1, 1], [0, 1]]), [[0.5, 0.5], [0, 1]])
    with pytest.raises(DecompositionError):
        aligned_input_weights([[0, 0]])


@given(st.lists(st.booleans(), min_size=1, max_size=40))
def test_label_round_trip(bits):
    g = np.array([0] + [int(b) for b in bits[1:]])
    G = labels_to_grouping(g)
    np.testing.assert_array_equal(group_labels(G), g)
    np.testing.assert_array_equal(labels_to_grouping(group_labels(G)), G)
    assert G.shape[0] == int((g == 0).sum())
    np.testing.assert_array_equal(sizes_to_labels(labels_to_sizes(g)), g)


@given(st.integers(1, 8), st.integers(1, 8), st.data())
def test_decompose_properties(N, M, data):
    bits = data.draw(st.lists(st.booleans(), min_size=N * M, max_size=N * M))
    A = np.array(bits, dtype=np.uint8).reshape(N, M)
    A[A.sum(axis=1) == 0, data.draw(st.integers(0, M - 1))] = 1
    d = decompose(A)
    assert is_permutation(d.perm)
    assert np.all(d.P.sum(axis=0) == 1) and np.all(d.P.sum(axis=1) == 1)
    assert d.L == A.sum() == d.c.sum() == d.r.sum()
    np.testing.assert_array_equal(d.g, group_labels(d.G))
    W = aligned_input_weights(A)
    assert np.all(np.abs(W.sum(axis=1) - 1.0) <= 1e-12)
