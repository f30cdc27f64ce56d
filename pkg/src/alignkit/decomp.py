"""Exact factorization of an alignment matrix into duplication, permutation and grouping.

For a binary ``A`` (N target rows x M source columns) with column sums ``c`` and
row sums ``r``, ``L = sum(c) = sum(r)`` and

    A = G @ P @ D

with ``D`` (L x M) copying source column ``m`` into ``c[m]`` consecutive slots,
``P`` (L x L) a permutation with ``d' = P @ h'``, and ``G`` (N x L) summing
``r[n]`` consecutive slots into target row ``n``.

Canonical matching. Every nonzero ``(n, m)`` of ``A`` is one source copy and
one group member. Copies of column ``m`` are numbered by increasing target row
and members of row ``n`` by increasing source column; those are the only
orders consistent with the two indexing rules (both orders are total over the
nonzeros of a single column or row, so any other numbering breaks monotonicity
somewhere). Pairing the copy and member induced by the same nonzero therefore
yields the unique ``P``. ``kernels.canonical_factors`` computes it in one
row-major pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DecompositionError, InvalidLabelsError, ShapeError
from .kernels import canonical_factors


@dataclass(frozen=True)
class DecomposedAlignment:
    c: np.ndarray
    r: np.ndarray
    perm: np.ndarray  # perm[t] = s: slot t of d' holds copy s of h'

    @property
    def L(self) -> int:
        return int(self.c.sum())

    @property
    def M(self) -> int:
        return len(self.c)

    @property
    def N(self) -> int:
        return len(self.r)

    @cached_property
    def D(self) -> np.ndarray:
        return duplication_to_matrix(self.c)

    @cached_property
    def P(self) -> np.ndarray:
        return permutation_matrix(self.perm)

    @cached_property
    def G(self) -> np.ndarray:
        return grouping_to_matrix(self.r)

    @property
    def g(self) -> np.ndarray:
        return sizes_to_labels(self.r)


def _as_binary(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2:
        raise ShapeError(f"alignment must be 2-D, got shape {A.shape}")
    if not ((A == 0) | (A == 1)).all():
        raise DecompositionError("alignment matrix must be binary")
    return A.astype(np.uint8)


def decompose(A) -> DecomposedAlignment:
    A = _as_binary(A)
    if A.shape[0] == 0 or (A.sum(axis=1) == 0).any():
        raise DecompositionError("alignment has a null row; fill null rows before decomposing")
    c, r, perm = canonical_factors(A)
    return DecomposedAlignment(c=c, r=r, perm=perm)


def duplication_to_matrix(c) -> np.ndarray:
    """Banded L x M matrix: slot l copies column m iff C[m-1] <= l < C[m] (0-based)."""
    c = np.asarray(c, dtype=np.int64)
    if (c < 0).any():
        raise ShapeError("duplication counts must be nonnegative")
    if c.sum() < 1:
        raise DecompositionError("duplication counts sum to zero; nothing to decode")
    return np.repeat(np.eye(len(c), dtype=np.uint8), c, axis=0)


def grouping_to_matrix(r) -> np.ndarray:
    """Banded N x L matrix: row n sums slots R[n-1] <= l < R[n] (0-based)."""
    r = np.asarray(r, dtype=np.int64)
    if (r < 1).any():
        raise DecompositionError("every group needs at least one member")
    return np.repeat(np.eye(len(r), dtype=np.uint8), r, axis=0).T.copy()


def permutation_matrix(perm) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    P = np.zeros((len(perm), len(perm)), dtype=np.uint8)
    P[np.arange(len(perm)), perm] = 1
    return P


def is_permutation(perm) -> bool:
    perm = np.asarray(perm)
    return perm.ndim == 1 and np.array_equal(np.sort(perm), np.arange(len(perm)))


def recompose(D, P, G) -> np.ndarray:
    """Boolean product ``G P D``.

    The integer product can exceed 1 when a group holds two copies of one
    source column; such a pair still counts as a single link.
    """
    D, P, G = (np.asarray(x, dtype=np.int64) for x in (D, P, G))
    L = P.shape[0]
    if P.shape != (L, L) or D.shape[0] != L or G.shape[1] != L:
        raise ShapeError(f"inconsistent shapes G{G.shape} P{P.shape} D{D.shape}")
    return np.minimum(G @ P @ D, 1).astype(np.uint8)


def recompose_factors(d: DecomposedAlignment) -> np.ndarray:
    """Same product as ``recompose`` without materializing the three matrices."""
    slot_source = np.repeat(np.arange(d.M), d.c)[d.perm]
    slot_group = np.repeat(np.arange(d.N), d.r)
    A = np.zeros((d.N, d.M), dtype=np.uint8)
    A[slot_group, slot_source] = 1
    return A


def group_labels(G) -> np.ndarray:
    """g[l] = 1 iff slot l shares its group with slot l-1; g[0] = 0."""
    G = np.asarray(G)
    g = np.zeros(G.shape[1], dtype=np.int64)
    if G.shape[1] > 1:
        g[1:] = np.all(G[:, 1:] == G[:, :-1], axis=0)
    return g


def sizes_to_labels(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.int64)
    g = np.ones(int(r.sum()), dtype=np.int64)
    g[np.concatenate([[0], np.cumsum(r)[:-1]])] = 0
    return g


def labels_to_sizes(g) -> np.ndarray:
    g = np.asarray(g, dtype=np.int64)
    if len(g) == 0 or g[0] != 0:
        raise InvalidLabelsError("group labels must start with 0")
    starts = np.flatnonzero(g == 0)
    return np.diff(np.append(starts, len(g)))


def labels_to_grouping(g) -> np.ndarray:
    return grouping_to_matrix(labels_to_sizes(g))


def aligned_input_weights(A) -> np.ndarray:
    """Row-normalized alignment: row n averages the source states aligned to target n."""
    A = np.asarray(A, dtype=np.float64)
    r = A.sum(axis=1, keepdims=True)
    if (r == 0).any():
        raise DecompositionError("alignment has a null row")
    return A / r


def _is_banded(X: np.ndarray, sizes: np.ndarray) -> bool:
    """X (slots x groups) has a 1 exactly at (l, k) for the group k that slot l falls in.

    For a nonnegative matrix with one expected cell per row, "every expected
    cell is 1 and the total is L" leaves no room for any other nonzero.
    """
    owner = np.repeat(np.arange(len(sizes)), sizes)
    L = len(owner)
    return X.shape == (L, len(sizes)) and int(X.sum()) == L and bool((X[np.arange(L), owner] == 1).all())


def check_structure(d: DecomposedAlignment) -> None:
    """Raise if the factors break the banded or permutation invariants."""
    if not _is_banded(d.D, d.c):
        raise DecompositionError("D is not banded")
    if not _is_banded(d.G.T, d.r):
        raise DecompositionError("G is not banded")
    P = d.P
    L = P.shape[0]
    # same counting argument row by row, plus distinct columns
    cols = P.argmax(axis=1) if P.size else np.zeros(0, dtype=np.int64)
    if not (P.shape == (L, L) and int(P.sum()) == L and (P[np.arange(L), cols] == 1).all() and is_permutation(cols)):
        raise DecompositionError("P is not a permutation matrix")
