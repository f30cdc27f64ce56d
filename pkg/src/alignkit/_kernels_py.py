"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

The LSAP routine is the shortest augmenting path method (Jonker-Volgenant
style dual updates, one augmentation per row). Both versions must return
identical results for identical inputs; the test suite checks this.
"""
import math

import numpy as np


def _augmenting_path(cost, u, v, path, row4col, spc, cur_row):
    n = len(cost)
    remaining = list(range(n - 1, -1, -1))
    num_remaining = n
    sr = [False] * n
    sc = [False] * n
    for j in range(n):
        spc[j] = math.inf

    min_val = 0.0
    sink = -1
    i = cur_row
    while sink == -1:
        index = -1
        lowest = math.inf
        sr[i] = True
        row = cost[i]
        ui = u[i]
        for it in range(num_remaining):
            j = remaining[it]
            r = min_val + row[j] - ui - v[j]
            if r < spc[j]:
                path[j] = i
                spc[j] = r
            if spc[j] < lowest or (spc[j] == lowest and row4col[j] == -1):
                lowest = spc[j]
                index = it
        min_val = lowest
        if min_val == math.inf:
            return -1, min_val, sr, sc
        j = remaining[index]
        if row4col[j] == -1:
            sink = j
        else:
            i = row4col[j]
        sc[j] = True
        num_remaining -= 1
        remaining[index] = remaining[num_remaining]

    return sink, min_val, sr, sc


def lsap(cost):
    """Row-to-column assignment minimizing total cost, or None if infeasible."""
    cost = np.asarray(cost, dtype=np.float64).tolist()
    n = len(cost)
    u = [0.0] * n
    v = [0.0] * n
    spc = [math.inf] * n
    path = [-1] * n
    col4row = [-1] * n
    row4col = [-1] * n

    for cur_row in range(n):
        sink, min_val, sr, sc = _augmenting_path(cost, u, v, path, row4col, spc, cur_row)
        if sink < 0:
            return None

        u[cur_row] += min_val
        for i in range(n):
            if sr[i] and i != cur_row:
                u[i] += min_val - spc[col4row[i]]
        for j in range(n):
            if sc[j]:
                v[j] -= min_val - spc[j]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    return np.asarray(col4row, dtype=np.int64)


def canonical_factors(A):
    """Column sums, row sums and the slot-to-copy map of the canonical factorization."""
    a = np.asarray(A, dtype=np.uint8)
    c = a.sum(axis=0, dtype=np.int64)
    r = a.sum(axis=1, dtype=np.int64)
    offset = np.concatenate([[0], np.cumsum(c)[:-1]]).astype(np.int64)
    # row-major nonzero order = target slot order; within each column the
    # running offset hands out copies in increasing target row
    rows, cols = np.nonzero(a)
    perm = np.empty(len(cols), dtype=np.int64)
    for t, m in enumerate(cols.tolist()):
        perm[t] = offset[m]
        offset[m] += 1
    return c, r, perm
