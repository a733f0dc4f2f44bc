"""Random d-regular multigraphs via the configuration model.

A graph on n vertices is stored as a fixed-point-free involution ("pairing")
of the nd half-edges; half-edges v*d .. v*d+d-1 belong to vertex v.  Loops
and parallel edges are kept: a loop occupies two half-edges of one vertex
and counts 2 toward its degree.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .rng import derive_rng

MAX_ENUM_HALF_EDGES = 16
MAX_CYCLE_LENGTH = 8


@dataclass
class RegularMultigraph:
    n: int
    d: int
    pairing: np.ndarray  # int32, shape (n*d,), involution with no fixed point
    _head: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.pairing = np.ascontiguousarray(self.pairing, dtype=np.int32)
        if self.pairing.shape != (self.n * self.d,):
            raise ValueError("pairing must have length n*d")

    def validate(self) -> None:
        """Check the involution property; raises on a malformed pairing."""
        p = self.pairing
        m = self.n * self.d
        if m % 2 != 0:
            raise ValueError("n*d must be even")
        if p.min(initial=0) < 0 or p.max(initial=-1) >= m:
            raise ValueError("half-edge index out of range")
        if np.any(p[p] != np.arange(m, dtype=np.int32)):
            raise ValueError("pairing is not an involution")
        if np.any(p == np.arange(m, dtype=np.int32)):
            raise ValueError("pairing has a fixed point")

    @property
    def num_half_edges(self) -> int:
        return self.n * self.d

    @property
    def head(self) -> np.ndarray:
        """head[h] = vertex at the far end of half-edge h."""
        if self._head is None:
            self._head = (self.pairing // self.d).astype(np.int32)
        return self._head

    def neighbors(self) -> np.ndarray:
        """(n, d) matrix: row v lists the d neighbour vertices of v."""
        return self.head.reshape(self.n, self.d)

    def degrees(self) -> np.ndarray:
        """Per-vertex degree with loops counted twice (constant d)."""
        return np.bincount(np.arange(self.num_half_edges) // self.d,
                           minlength=self.n).astype(np.int64)

    def edge_half_edges(self) -> np.ndarray:
        """One half-edge per edge: the smaller of each paired couple."""
        h = np.arange(self.num_half_edges, dtype=np.int32)
        return h[h < self.pairing]

    def loop_count(self) -> int:
        h = np.arange(self.num_half_edges, dtype=np.int32)
        return int(np.count_nonzero((h < self.pairing)
                                    & (self.head == h // self.d)))

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"{self.n} {self.d}\n")
        for h in self.edge_half_edges():
            out.write(f"{h} {self.pairing[h]}\n")
        return out.getvalue()

    def __eq__(self, other) -> bool:
        return (isinstance(other, RegularMultigraph) and self.n == other.n
                and self.d == other.d
                and np.array_equal(self.pairing, other.pairing))


def from_text(text: str) -> RegularMultigraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty graph file")
    n, d = map(int, lines[0].split())
    pairing = np.full(n * d, -1, dtype=np.int32)
    for ln in lines[1:]:
        a, b = map(int, ln.split())
        if pairing[a] != -1 or pairing[b] != -1 or a == b:
            raise ValueError(f"half-edge repeated or self-paired: {ln!r}")
        pairing[a] = b
        pairing[b] = a
    if np.any(pairing < 0):
        raise ValueError("pairing incomplete")
    g = RegularMultigraph(n, d, pairing)
    g.validate()
    return g


def sample_configuration_model(n: int, d: int,
                               seed: int | None = None,
                               rng: np.random.Generator | None = None,
                               ) -> RegularMultigraph:
    """Uniform random pairing of the n*d half-edges (Fisher-Yates shuffle).

    Every one of the (nd-1)!! perfect pairings is equally likely; loops and
    parallel edges are retained.
    """
    if n * d % 2 != 0:
        raise ValueError("n*d must be even")
    if d < 1 or n < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if rng is None:
        rng = derive_rng(0 if seed is None else seed, "configuration-model")
    perm = rng.permutation(n * d).astype(np.int32)
    pairing = np.empty(n * d, dtype=np.int32)
    pairing[perm[0::2]] = perm[1::2]
    pairing[perm[1::2]] = perm[0::2]
    return RegularMultigraph(n, d, pairing)


def enumerate_pairings_array(m: int) -> np.ndarray:
    """All (m-1)!! pairings of m half-edges as an (N, m) int8 partner table.

    Built level by level: the lowest unmatched half-edge of every partial
    pairing is matched with each remaining one.  Guarded to m <= 16, where
    N = 2 027 025.
    """
    if m % 2 != 0 or m <= 0:
        raise ValueError("m must be positive and even")
    if m > MAX_ENUM_HALF_EDGES:
        raise ValueError(f"exhaustive enumeration guarded to m <= {MAX_ENUM_HALF_EDGES}")
    table = np.full((1, m), -1, dtype=np.int8)
    for level in range(m // 2):
        free = m - 2 * level
        rows = table.shape[0]
        # row-major nonzero lists each row's free slots in ascending order
        free_pos = np.nonzero(table < 0)[1].reshape(rows, free)
        first = free_pos[:, 0]
        partners = free_pos[:, 1:]  # free - 1 choices per row
        reps = free - 1
        new = np.repeat(table, reps, axis=0)
        first_rep = np.repeat(first, reps)
        partner_flat = partners.reshape(-1)
        r = np.arange(rows * reps)
        new[r, first_rep] = partner_flat.astype(np.int8)
        new[r, partner_flat] = first_rep.astype(np.int8)
        table = new
    return table


def enumerate_pairings(n: int, d: int):
    """Yield every configuration-model graph on n vertices of degree d.

    Exhaustive: (nd-1)!! graphs, guarded to nd <= 16.
    """
    for row in enumerate_pairings_array(n * d):
        yield RegularMultigraph(n, d, row.astype(np.int32))


@dataclass
class RootedBall:
    """Induced sub-multigraph within graph distance `radius` of `center`.

    `vertices` lists ball members in BFS order (center first); `depth` and
    `parent` describe the BFS tree (`parent` indexes into `vertices`, -1 at
    the root).  `edge_count` counts induced edges with multiplicity, loops
    included, so the ball is a tree iff edge_count == len(vertices) - 1.
    """
    center: int
    radius: int
    vertices: np.ndarray
    depth: np.ndarray
    parent: np.ndarray
    edge_count: int
    is_tree: bool

    def children(self) -> list[list[int]]:
        """Ball-index children lists of the BFS tree."""
        out: list[list[int]] = [[] for _ in range(len(self.vertices))]
        for i, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(i)
        return out


def neighborhood(g: RegularMultigraph, v: int, r: int) -> RootedBall:
    """BFS ball of radius r around v, with the induced edge count."""
    head = g.head
    d = g.d
    order = [v]
    depth = [0]
    parent = [-1]
    index = {v: 0}
    lo = 0
    for cur_depth in range(r):
        hi = len(order)
        while lo < hi:
            u = order[lo]
            for h in range(u * d, u * d + d):
                w = int(head[h])
                if w not in index:
                    index[w] = len(order)
                    order.append(w)
                    depth.append(cur_depth + 1)
                    parent.append(lo)
            lo += 1
    incidences = 0
    for u in order:
        for h in range(u * d, u * d + d):
            if int(head[h]) in index:
                incidences += 1
    edge_count = incidences // 2
    vertices = np.array(order, dtype=np.int64)
    return RootedBall(center=v, radius=r, vertices=vertices,
                      depth=np.array(depth, dtype=np.int64),
                      parent=np.array(parent, dtype=np.int64),
                      edge_count=edge_count,
                      is_tree=edge_count == len(order) - 1)


def tree_ball_flags(g: RegularMultigraph, r: int) -> np.ndarray:
    """Boolean array: flags[v] iff the radius-r ball around v is a tree.

    A radius-0 ball is {v} plus any loops at v, so a loop vertex fails
    even at r=0.  Cached per (graph, radius) since projections of
    different factors at the same radius reuse it.
    """
    if r < 0:
        raise ValueError("radius must be >= 0")
    cache = getattr(g, "_tree_flag_cache", None)
    if cache is None:
        cache = {}
        g._tree_flag_cache = cache
    if r not in cache:
        cache[r] = kernels.tree_ball_flags(g.head, g.n, g.d, r).astype(bool)
    return cache[r]


def count_cycles(g: RegularMultigraph, lmax: int) -> dict[int, int]:
    """Number of cycles of each length 1..lmax (exhaustive, lmax <= 8).

    Length 1 is a loop, length 2 a pair of parallel edges; for length >= 3
    each cycle subgraph is counted once regardless of traversal direction.
    """
    if not 1 <= lmax <= MAX_CYCLE_LENGTH:
        raise ValueError(f"lmax must be in 1..{MAX_CYCLE_LENGTH}")
    out: dict[int, int] = {}
    h = np.arange(g.num_half_edges, dtype=np.int64)
    tail = h // g.d
    if lmax >= 1:
        out[1] = int(np.count_nonzero((h < g.pairing) & (g.head == tail)))
    if lmax >= 2:
        lo = np.minimum(tail, g.head)
        hi = np.maximum(tail, g.head)
        keys = lo * g.n + hi
        mult = np.bincount(keys[(h < g.pairing) & (g.head != tail)].astype(np.int64),
                           minlength=0)
        mult = mult[mult >= 2].astype(np.int64)
        out[2] = int(np.sum(mult * (mult - 1) // 2))
    if lmax >= 3:
        longer = kernels.cycle_counts(g.head, g.pairing, g.n, g.d, lmax)
        for ell in range(3, lmax + 1):
            out[ell] = int(longer[ell])
    return out
