# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: per-vertex BFS tree-ball tests, union-find component
labelling, and anchored cycle enumeration.  Semantics match _fallback."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def tree_ball_flags(head, Py_ssize_t n, Py_ssize_t d, Py_ssize_t r):
    """flags[v] = 1 iff the induced radius-r ball around v is a tree."""
    cdef cnp.ndarray[cnp.int32_t, ndim=1] head_arr = \
        np.ascontiguousarray(head, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] flags = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] seen = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] order = np.empty(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] depth = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[:] hd = head_arr
    cdef cnp.uint8_t[:] fl = flags
    cdef cnp.int64_t[:] sn = seen
    cdef cnp.int32_t[:] od = order
    cdef cnp.int32_t[:] dp = depth
    cdef Py_ssize_t root, cnt, qi, u, h, w, inc, i
    for root in range(n):
        cnt = 0
        od[cnt] = <cnp.int32_t> root
        dp[cnt] = 0
        sn[root] = root
        cnt += 1
        qi = 0
        while qi < cnt and dp[qi] < r:
            u = od[qi]
            for h in range(u * d, u * d + d):
                w = hd[h]
                if sn[w] != root:
                    sn[w] = root
                    od[cnt] = <cnp.int32_t> w
                    dp[cnt] = dp[qi] + 1
                    cnt += 1
            qi += 1
        inc = 0
        for i in range(cnt):
            u = od[i]
            for h in range(u * d, u * d + d):
                if sn[hd[h]] == root:
                    inc += 1
        if inc // 2 == cnt - 1:
            fl[root] = 1
    return flags


def inset_components(head, in_set, Py_ssize_t n, Py_ssize_t d):
    """Component labels (-1 outside the set, else minimum member vertex)."""
    cdef cnp.ndarray[cnp.int32_t, ndim=1] head_arr = \
        np.ascontiguousarray(head, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ins = \
        np.ascontiguousarray(in_set, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] par = np.arange(n, dtype=np.int64)
    cdef cnp.int32_t[:] hd = head_arr
    cdef cnp.uint8_t[:] sb = ins
    cdef cnp.int64_t[:] p = par
    cdef Py_ssize_t v, h, w, a, b, ra, rb
    for v in range(n):
        if not sb[v]:
            continue
        for h in range(v * d, v * d + d):
            w = hd[h]
            if w <= v or not sb[w]:
                continue
            ra = v
            while p[ra] != ra:
                p[ra] = p[p[ra]]
                ra = p[ra]
            rb = w
            while p[rb] != rb:
                p[rb] = p[p[rb]]
                rb = p[rb]
            if ra < rb:
                p[rb] = ra
            elif rb < ra:
                p[ra] = rb
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] ov = out
    for v in range(n):
        if not sb[v]:
            ov[v] = -1
        else:
            ra = v
            while p[ra] != ra:
                p[ra] = p[p[ra]]
                ra = p[ra]
            ov[v] = ra
    return out


cdef void _walk(cnp.int32_t[:] hd, cnp.uint8_t[:] visited,
                cnp.int64_t[:] counts, Py_ssize_t d, Py_ssize_t lmax,
                Py_ssize_t s, Py_ssize_t u, Py_ssize_t k) noexcept:
    cdef Py_ssize_t h, w
    for h in range(u * d, u * d + d):
        w = hd[h]
        if w == s:
            if k >= 2:
                counts[k + 1] += 1
        elif w > s and not visited[w] and k + 1 <= lmax - 1:
            visited[w] = 1
            _walk(hd, visited, counts, d, lmax, s, w, k + 1)
            visited[w] = 0


def cycle_counts(head, pairing, Py_ssize_t n, Py_ssize_t d, Py_ssize_t lmax):
    """counts[ell] for ell in 3..lmax; each cycle counted once."""
    cdef cnp.ndarray[cnp.int32_t, ndim=1] head_arr = \
        np.ascontiguousarray(head, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = \
        np.zeros(lmax + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] visited = np.zeros(n, dtype=np.uint8)
    cdef cnp.int32_t[:] hd = head_arr
    cdef cnp.int64_t[:] ct = counts
    cdef cnp.uint8_t[:] vs = visited
    cdef Py_ssize_t s, ell
    if lmax < 3:
        return counts
    for s in range(n):
        vs[s] = 1
        _walk(hd, vs, ct, d, lmax, s, s, 0)
        vs[s] = 0
    for ell in range(3, lmax + 1):
        ct[ell] //= 2
    return counts
