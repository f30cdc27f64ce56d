# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: shortest-augmenting-path LSAP and canonical alignment factorization.

Both functions mirror ``alignkit._kernels_py`` exactly; the Python module is the
reference and the fallback when this extension is not built.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef Py_ssize_t _augmenting_path(
    const double[:, :] cost,
    double[:] u,
    double[:] v,
    Py_ssize_t[:] path,
    Py_ssize_t[:] row4col,
    double[:] spc,
    Py_ssize_t cur_row,
    unsigned char[:] sr,
    unsigned char[:] sc,
    Py_ssize_t[:] remaining,
    double* p_min_val,
) noexcept:
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t num_remaining = n
    cdef Py_ssize_t it, j, index, i, sink = -1
    cdef double min_val = 0.0, lowest, r

    for it in range(n):
        remaining[it] = n - it - 1
        sr[it] = 0
        sc[it] = 0
        spc[it] = INFINITY

    i = cur_row
    while sink == -1:
        index = -1
        lowest = INFINITY
        sr[i] = 1
        for it in range(num_remaining):
            j = remaining[it]
            r = min_val + cost[i, j] - u[i] - v[j]
            if r < spc[j]:
                path[j] = i
                spc[j] = r
            if spc[j] < lowest or (spc[j] == lowest and row4col[j] == -1):
                lowest = spc[j]
                index = it
        min_val = lowest
        if min_val == INFINITY:
            return -1
        j = remaining[index]
        if row4col[j] == -1:
            sink = j
        else:
            i = row4col[j]
        sc[j] = 1
        num_remaining -= 1
        remaining[index] = remaining[num_remaining]

    p_min_val[0] = min_val
    return sink


def lsap(cost):
    """Row-to-column assignment minimizing total cost, or None if infeasible."""
    cdef const double[:, :] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t cur_row, i, j, sink
    cdef double min_val = 0.0

    u_arr = np.zeros(n)
    v_arr = np.zeros(n)
    spc_arr = np.empty(n)
    path_arr = np.full(n, -1, dtype=np.intp)
    col4row_arr = np.full(n, -1, dtype=np.intp)
    row4col_arr = np.full(n, -1, dtype=np.intp)
    sr_arr = np.zeros(n, dtype=np.uint8)
    sc_arr = np.zeros(n, dtype=np.uint8)
    rem_arr = np.empty(n, dtype=np.intp)

    cdef double[:] u = u_arr
    cdef double[:] v = v_arr
    cdef double[:] spc = spc_arr
    cdef Py_ssize_t[:] path = path_arr
    cdef Py_ssize_t[:] col4row = col4row_arr
    cdef Py_ssize_t[:] row4col = row4col_arr
    cdef unsigned char[:] sr = sr_arr
    cdef unsigned char[:] sc = sc_arr
    cdef Py_ssize_t[:] remaining = rem_arr

    for cur_row in range(n):
        sink = _augmenting_path(c, u, v, path, row4col, spc, cur_row, sr, sc, remaining, &min_val)
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

    return col4row_arr.astype(np.int64)


def canonical_factors(A):
    """Column sums, row sums and the slot-to-copy map of the canonical factorization."""
    cdef const unsigned char[:, :] a = np.ascontiguousarray(A, dtype=np.uint8)
    cdef Py_ssize_t n_rows = a.shape[0], n_cols = a.shape[1]
    cdef Py_ssize_t n, m, t = 0, total = 0

    c_arr = np.zeros(n_cols, dtype=np.int64)
    r_arr = np.zeros(n_rows, dtype=np.int64)
    cdef cnp.int64_t[:] c = c_arr
    cdef cnp.int64_t[:] r = r_arr

    for n in range(n_rows):
        for m in range(n_cols):
            if a[n, m]:
                c[m] += 1
                r[n] += 1
                total += 1

    offset_arr = np.zeros(n_cols, dtype=np.int64)
    cdef cnp.int64_t[:] offset = offset_arr
    for m in range(1, n_cols):
        offset[m] = offset[m - 1] + c[m - 1]

    perm_arr = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[:] perm = perm_arr
    # rows ascending, then columns ascending: slot order of the target side;
    # the running column offset hands out copies of each column in target order
    for n in range(n_rows):
        for m in range(n_cols):
            if a[n, m]:
                perm[t] = offset[m]
                offset[m] += 1
                t += 1

    return c_arr, r_arr, perm_arr
