"""Pure numpy/python kernels, semantically identical to _speedups.

The tree-ball test runs breadth-first searches from every vertex at once,
batched over root chunks so the (root, vertex) key tables stay bounded.
"""

from __future__ import annotations

import numpy as np


def _ball_bound(d: int, r: int, n: int) -> int:
    """Vertex count of the full d-regular tree ball, capped at n."""
    if r == 0 or d == 0:
        return 1
    if d == 1:
        return 2
    if d == 2:
        return min(n, 2 * r + 1)
    size = 1 + d * ((d - 1) ** r - 1) // (d - 2)
    return min(n, size)


def tree_ball_flags(head: np.ndarray, n: int, d: int, r: int) -> np.ndarray:
    """flags[v] = 1 iff the induced radius-r ball around v is a tree.

    Tree means: induced edge count (with multiplicity, loops included)
    equals ball vertex count minus one.
    """
    head = np.asarray(head, dtype=np.int64)
    flags = np.empty(n, dtype=np.uint8)
    bound = _ball_bound(d, r, n)
    chunk = max(1, int(4_000_000 // max(1, bound * d)))
    for start in range(0, n, chunk):
        roots = np.arange(start, min(start + chunk, n), dtype=np.int64)
        flags[start:start + len(roots)] = _flags_chunk(head, n, d, r, roots)
    return flags


def _flags_chunk(head, n, d, r, roots):
    m = len(roots)
    local = np.arange(m, dtype=np.int64)
    members = local * n + roots  # sorted: one key per (root, vertex) pair
    frontier = members.copy()
    offs = np.arange(d, dtype=np.int64)
    for _ in range(r):
        if len(frontier) == 0:
            break
        froot = frontier // n
        fvert = frontier % n
        he = (fvert[:, None] * d + offs).reshape(-1)
        cand = np.repeat(froot, d) * n + head[he]
        cand = np.unique(cand)
        idx = np.searchsorted(members, cand)
        idx[idx >= len(members)] = len(members) - 1
        fresh = cand[members[idx] != cand]
        members = np.sort(np.concatenate([members, fresh]))
        frontier = fresh
    counts = np.bincount(members // n, minlength=m)
    mroot = members // n
    mvert = members % n
    he = (mvert[:, None] * d + offs).reshape(-1)
    q = np.repeat(mroot, d) * n + head[he]
    idx = np.searchsorted(members, q)
    idx[idx >= len(members)] = len(members) - 1
    inside = members[idx] == q
    incidences = np.bincount(np.repeat(mroot, d)[inside], minlength=m)
    return (incidences // 2 == counts - 1).astype(np.uint8)


def cycle_counts(head: np.ndarray, pairing: np.ndarray, n: int, d: int,
                 lmax: int) -> np.ndarray:
    """counts[ell] = number of cycles of length ell for ell in 3..lmax.

    Depth-first enumeration of paths anchored at their minimum vertex;
    every cycle is met once per traversal direction, hence the final /2.
    Parallel edges yield distinct cycles (one per closing half-edge).
    """
    head = np.asarray(head, dtype=np.int64)
    counts = np.zeros(lmax + 1, dtype=np.int64)
    if lmax < 3:
        return counts
    visited = np.zeros(n, dtype=bool)

    def walk(s: int, u: int, k: int) -> None:
        base = u * d
        for h in range(base, base + d):
            w = int(head[h])
            if w == s:
                if k >= 2:
                    counts[k + 1] += 1
            elif w > s and not visited[w] and k + 1 <= lmax - 1:
                visited[w] = True
                walk(s, w, k + 1)
                visited[w] = False

    for s in range(n):
        visited[s] = True
        walk(s, s, 0)
        visited[s] = False
    counts[3:] //= 2
    return counts


def inset_components(head: np.ndarray, in_set: np.ndarray, n: int, d: int,
                     ) -> np.ndarray:
    """Connected-component labels of the sub-multigraph induced by in_set.

    Returns int64 labels: -1 outside the set, otherwise the minimum vertex
    id of the component (a canonical representative).  Parallel edges and
    loops do not affect connectivity.
    """
    head = np.asarray(head, dtype=np.int64)
    inb = np.asarray(in_set, dtype=bool)
    sentinel = np.int64(n)
    labels = np.where(inb, np.arange(n, dtype=np.int64), sentinel)
    nbr = head.reshape(n, d)
    live_edge = inb[:, None] & inb[nbr]  # both endpoints inside
    while True:
        nl = np.where(live_edge, labels[nbr], sentinel)
        best = np.minimum(labels, nl.min(axis=1))
        if np.array_equal(best, labels):
            break
        labels = best
    out = labels.copy()
    out[~inb] = -1
    return out
