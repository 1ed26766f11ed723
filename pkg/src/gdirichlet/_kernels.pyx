# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: triangular box enumeration, interval merging, systole grids."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, fabs

cnp.import_array()

IMPLEMENTATION = "compiled"


def enum_upper(double[:, ::1] B, double[::1] s, double[::1] lo, double[::1] hi,
               long long max_nodes, bint skip_zero, long long max_points):
    """All integer z with lo <= B z + s <= hi for upper-triangular B.

    Returns (Z, nodes, status); status 1 means the node budget was exceeded.
    """
    cdef Py_ssize_t d = B.shape[0]
    cdef Py_ssize_t i, j, level
    cdef long long nodes = 0, found = 0
    cdef double c, a, b, x, diag, tmp
    cdef bint nonzero
    cdef long long[::1] z = np.zeros(d, dtype=np.int64)
    cdef long long[::1] zmax = np.zeros(d, dtype=np.int64)
    cdef double[::1] part = np.zeros(d, dtype=np.float64)
    cdef Py_ssize_t cap = 1024
    buf = np.empty((cap, d), dtype=np.int64)
    cdef long long[:, ::1] ob = buf
    level = d - 1
    # initialise the top level
    part[level] = s[level]
    diag = B[level, level]
    a = (lo[level] - part[level]) / diag
    b = (hi[level] - part[level]) / diag
    if a > b:
        tmp = a; a = b; b = tmp
    z[level] = <long long>ceil(a)
    zmax[level] = <long long>floor(b)
    while True:
        if z[level] > zmax[level]:
            level += 1
            if level >= d:
                break
            z[level] += 1
            continue
        nodes += 1
        if nodes > max_nodes:
            return np.zeros((0, d), dtype=np.int64), nodes, 1
        if level == 0:
            nonzero = False
            for j in range(d):
                if z[j] != 0:
                    nonzero = True
                    break
            if nonzero or not skip_zero:
                x = part[0] + B[0, 0] * z[0]
                if lo[0] <= x <= hi[0]:
                    if found == cap:
                        cap *= 2
                        nb = np.empty((cap, d), dtype=np.int64)
                        nb[:found] = buf[:found]
                        buf = nb
                        ob = buf
                    for j in range(d):
                        ob[found, j] = z[j]
                    found += 1
                    if found >= max_points:
                        break
            z[0] += 1
            continue
        # descend to the next level with the partial sum for row level-1
        i = level - 1
        c = s[i]
        for j in range(level, d):
            c += B[i, j] * z[j]
        x = part[level] + B[level, level] * z[level]
        if not (lo[level] <= x <= hi[level]):
            z[level] += 1
            continue
        part[i] = c
        diag = B[i, i]
        a = (lo[i] - c) / diag
        b = (hi[i] - c) / diag
        if a > b:
            tmp = a; a = b; b = tmp
        z[i] = <long long>ceil(a)
        zmax[i] = <long long>floor(b)
        level = i
    return buf[:found].copy(), nodes, 0


def merge_sorted(double[::1] lefts, double[::1] rights, double rtol):
    """Merge closed intervals sorted by left end; touching within rtol merges."""
    cdef Py_ssize_t n = lefts.shape[0], k, c = 0
    cdef double cl, cr
    if n == 0:
        return np.zeros(0), np.zeros(0)
    ml = np.empty(n, dtype=np.float64)
    mr = np.empty(n, dtype=np.float64)
    cdef double[::1] vl = ml
    cdef double[::1] vr = mr
    cl = lefts[0]
    cr = rights[0]
    for k in range(1, n):
        if lefts[k] <= cr + rtol * fabs(cr):
            if rights[k] > cr:
                cr = rights[k]
        else:
            vl[c] = cl
            vr[c] = cr
            c += 1
            cl = lefts[k]
            cr = rights[k]
    vl[c] = cl
    vr[c] = cr
    c += 1
    return ml[:c].copy(), mr[:c].copy()


def systole_grid(double[:, ::1] R, double[:, ::1] Q, double[:, ::1] sr, double[:, ::1] sq):
    """out[g] = min_k max(max_i R[k,i] sr[g,i], max_j Q[k,j] sq[g,j])."""
    cdef Py_ssize_t K = R.shape[0], n = R.shape[1], m = Q.shape[1], G = sr.shape[0]
    cdef Py_ssize_t g, k, i, j
    cdef double best, val, v
    out = np.empty(G, dtype=np.float64)
    cdef double[::1] o = out
    for g in range(G):
        best = 1e308
        for k in range(K):
            val = 0.0
            for j in range(m):
                v = Q[k, j] * sq[g, j]
                if v > val:
                    val = v
            if val >= best:
                continue
            for i in range(n):
                v = R[k, i] * sr[g, i]
                if v > val:
                    val = v
                    if val >= best:
                        break
            if val < best:
                best = val
        o[g] = best
    return out
