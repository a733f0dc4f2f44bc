"""Edge orientation without sources or sinks.

Peel d-2 edge-disjoint perfect matchings off a d-regular multigraph so a
2-factor remains, orient every matching edge by an independent fair coin,
and classify each vertex by whether its last-matching edge points toward
it (in) or away (out).  Along each 2-factor cycle the class is constant
on maximal segments; interior segment edges share one random direction,
and each class-flip edge is oriented from the in-classed endpoint to the
out-classed one.  Every in-vertex then owns an outgoing cycle edge and
every out-vertex an incoming one, so no source or sink can appear.

Matchings are found by randomized greedy seeding plus augmenting-path
search with blossom contraction, so a layer failure means the residual
truly has no perfect matching; the peel then restarts with fresh
randomness, charging the failing layer's retry budget.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graphs import RegularMultigraph
from .rng import derive_rng

LAYER_RETRY_BUDGET = 20


class PeelFailure(RuntimeError):
    def __init__(self, layer: int, message: str):
        super().__init__(message)
        self.layer = layer


def _blossom_matching(n: int, adj: list[list[int]],
                      rng: np.random.Generator) -> np.ndarray:
    """Maximum matching on a simple graph; match[v] = partner or -1."""
    match = np.full(n, -1, dtype=np.int64)
    order = rng.permutation(n)
    for v in order:
        if match[v] < 0:
            nbrs = [u for u in adj[v] if match[u] < 0]
            if nbrs:
                u = nbrs[int(rng.integers(len(nbrs)))]
                match[v] = u
                match[u] = v

    p = np.full(n, -1, dtype=np.int64)
    base = np.arange(n, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    blossom = np.zeros(n, dtype=bool)

    def lca(a: int, b: int) -> int:
        seen = np.zeros(n, dtype=bool)
        while True:
            a = int(base[a])
            seen[a] = True
            if match[a] < 0:
                break
            a = int(p[match[a]])
        while True:
            b = int(base[b])
            if seen[b]:
                return b
            b = int(p[match[b]])

    def mark_path(v: int, b: int, child: int) -> None:
        while base[v] != b:
            blossom[base[v]] = True
            blossom[base[match[v]]] = True
            p[v] = child
            child = int(match[v])
            v = int(p[match[v]])

    def find_path(root: int) -> bool:
        used[:] = False
        p[:] = -1
        base[:] = np.arange(n)
        used[root] = True
        q = deque([root])
        while q:
            v = q.popleft()
            for to in adj[v]:
                if base[v] == base[to] or match[v] == to:
                    continue
                if to == root or (match[to] >= 0 and p[match[to]] >= 0):
                    cur = lca(v, to)
                    blossom[:] = False
                    mark_path(v, cur, to)
                    mark_path(to, cur, v)
                    for i in range(n):
                        if blossom[base[i]]:
                            base[i] = cur
                            if not used[i]:
                                used[i] = True
                                q.append(i)
                elif p[to] < 0:
                    p[to] = v
                    if match[to] < 0:
                        u = to
                        while u >= 0:
                            pv = int(p[u])
                            nxt = int(match[pv])
                            match[u] = pv
                            match[pv] = u
                            u = nxt
                        return True
                    used[match[to]] = True
                    q.append(int(match[to]))
        return False

    for v in order:
        if match[v] < 0:
            find_path(int(v))
    return match


def perfect_matching(g: RegularMultigraph, seed: int,
                     alive: np.ndarray | None = None,
                     ) -> np.ndarray | None:
    """Perfect matching among the alive half-edges, as an array of lower
    half-edge ids (one per edge), or None when no perfect matching exists.
    Loops are never matchable; parallel edges collapse for the search."""
    if g.n % 2:
        return None
    if alive is None:
        alive = np.ones(g.n * g.d, dtype=bool)
    adj: list[list[int]] = [[] for _ in range(g.n)]
    seen_pairs = set()
    hs = np.nonzero(alive)[0]
    for h in hs:
        h = int(h)
        if h > int(g.pairing[h]):
            continue
        u, w = h // g.d, int(g.pairing[h]) // g.d
        if u == w:
            continue
        if (u, w) not in seen_pairs:
            seen_pairs.add((u, w))
            adj[u].append(w)
            adj[w].append(u)
    rng = derive_rng(seed, "matching")
    match = _blossom_matching(g.n, adj, rng)
    if np.any(match < 0):
        return None
    # map vertex pairs back to specific half-edges (smallest alive id)
    out = []
    for v in range(g.n):
        w = int(match[v])
        if v < w:
            cands = [int(h) for h in range(v * g.d, (v + 1) * g.d)
                     if alive[h] and int(g.pairing[h]) // g.d == w]
            out.append(min(cands))
    return np.array(sorted(out), dtype=np.int64)


@dataclass
class MatchingPeel:
    g: RegularMultigraph
    pre_matchings: list[np.ndarray]      # M_1 .. M_{d-3}
    final_matching: np.ndarray           # M_{d-2}
    cycles: list[tuple[np.ndarray, np.ndarray]]  # (vertices, forward edges)
    restarts: int = 0

    def all_matchings(self) -> list[np.ndarray]:
        return [*self.pre_matchings, self.final_matching]

    def validate(self) -> None:
        used = np.zeros(self.g.n * self.g.d, dtype=bool)
        for m in self.all_matchings():
            verts = np.zeros(self.g.n, dtype=np.int64)
            for h in m:
                h = int(h)
                hp = int(self.g.pairing[h])
                if used[h] or used[hp]:
                    raise ValueError("matchings are not edge-disjoint")
                used[h] = used[hp] = True
                verts[h // self.g.d] += 1
                verts[hp // self.g.d] += 1
            if not np.all(verts == 1):
                raise ValueError("a matching fails to saturate all vertices")
        covered = np.zeros(self.g.n, dtype=np.int64)
        for verts, fwd in self.cycles:
            if len(verts) != len(fwd):
                raise ValueError("cycle arrays disagree")
            for h in fwd:
                h = int(h)
                if used[h] or used[int(self.g.pairing[h])]:
                    raise ValueError("cycle edge reuses a matching edge")
            for v in verts:
                covered[int(v)] += 1
        if not np.all(covered == 1):
            raise ValueError("2-factor cycles do not partition the vertices")


def _two_factor_cycles(g: RegularMultigraph, alive: np.ndarray,
                       ) -> list[tuple[np.ndarray, np.ndarray]]:
    half_at: list[list[int]] = [[] for _ in range(g.n)]
    for h in np.nonzero(alive)[0]:
        half_at[int(h) // g.d].append(int(h))
    for v, hh in enumerate(half_at):
        if len(hh) != 2:
            raise ValueError(f"residual degree at {v} is {len(hh)}, not 2")
    done = np.zeros(g.n * g.d, dtype=bool)
    cycles = []
    for start in np.nonzero(alive)[0]:
        start = int(start)
        if done[start]:
            continue
        verts, fwd = [], []
        h = start
        while not done[h]:
            done[h] = True
            back = int(g.pairing[h])
            done[back] = True
            verts.append(h // g.d)
            fwd.append(h)
            w = back // g.d
            a, b = half_at[w]
            h = b if a == back else a
        cycles.append((np.array(verts, dtype=np.int64),
                       np.array(fwd, dtype=np.int64)))
    return cycles


def matching_peel(g: RegularMultigraph, seed: int) -> MatchingPeel:
    """Peel d-2 perfect matchings, leaving a 2-factor.

    A failed layer aborts the attempt and the whole peel restarts with
    fresh randomness; each layer has its own retry budget and the report
    names the layer whose budget ran out.
    """
    if g.d < 3:
        raise ValueError("peeling needs d >= 3")
    if g.n % 2:
        raise PeelFailure(1, "odd vertex count: no perfect matching")
    budget = [LAYER_RETRY_BUDGET] * (g.d - 2)
    restarts = 0
    attempt = 0
    while True:
        alive = np.ones(g.n * g.d, dtype=bool)
        matchings: list[np.ndarray] = []
        failed_layer = None
        for layer in range(g.d - 2):
            m = perfect_matching(g, derive_rng_seed(seed, layer, attempt),
                                 alive=alive)
            if m is None:
                failed_layer = layer
                break
            matchings.append(m)
            for h in m:
                alive[int(h)] = False
                alive[int(g.pairing[int(h)])] = False
        if failed_layer is None:
            cycles = _two_factor_cycles(g, alive)
            peel = MatchingPeel(g=g, pre_matchings=matchings[:-1],
                                final_matching=matchings[-1],
                                cycles=cycles, restarts=restarts)
            return peel
        budget[failed_layer] -= 1
        restarts += 1
        attempt += 1
        if budget[failed_layer] <= 0:
            raise PeelFailure(
                failed_layer + 1,
                f"matching layer {failed_layer + 1} failed "
                f"{LAYER_RETRY_BUDGET} times")


def derive_rng_seed(seed: int, layer: int, attempt: int) -> int:
    # distinct, reproducible sub-seed per (layer, attempt)
    return (seed * 1_000_003 + layer * 1009 + attempt) % (2**63)


@dataclass
class Orientation:
    g: RegularMultigraph
    direction: np.ndarray  # int8 per half-edge; 1 = points tail -> head
    peel: MatchingPeel | None = field(default=None, repr=False)

    def out_degrees(self) -> np.ndarray:
        return self.direction.reshape(self.g.n, self.g.d).sum(axis=1)

    def in_degrees(self) -> np.ndarray:
        return self.g.d - self.out_degrees()

    def sources(self) -> list[int]:
        return [int(v) for v in np.nonzero(self.in_degrees() == 0)[0]]

    def sinks(self) -> list[int]:
        return [int(v) for v in np.nonzero(self.out_degrees() == 0)[0]]

    def certify(self) -> dict:
        d = self.direction
        if np.any((d != 0) & (d != 1)):
            raise ValueError("unoriented half-edges remain")
        if np.any(d + d[self.g.pairing] != 1):
            raise ValueError("orientation is not antisymmetric")
        return {"sources": self.sources(), "sinks": self.sinks()}

    def to_text(self) -> str:
        lines = []
        for h in range(self.g.n * self.g.d):
            hp = int(self.g.pairing[h])
            if h > hp:
                continue
            u, w = h // self.g.d, hp // self.g.d
            if self.direction[h] == 1:
                lines.append(f"{u} {w}")
            else:
                lines.append(f"{w} {u}")
        return "\n".join(lines) + "\n"


def orient_no_source_sink(g: RegularMultigraph, seed: int) -> Orientation:
    peel = matching_peel(g, seed)
    n, d = g.n, g.d
    rng = derive_rng(seed, "orient")
    direction = np.full(n * d, -1, dtype=np.int8)

    # every matching edge: independent fair coin
    for m in peel.all_matchings():
        coins = rng.integers(0, 2, size=len(m))
        for h, c in zip(m, coins):
            h = int(h)
            direction[h] = c
            direction[int(g.pairing[h])] = 1 - c

    # class of v: does its final-matching edge point away (out) or in
    is_out = np.zeros(n, dtype=bool)
    for h in peel.final_matching:
        h = int(h)
        hp = int(g.pairing[h])
        is_out[h // d] = direction[h] == 1
        is_out[hp // d] = direction[hp] == 1

    for verts, fwd in peel.cycles:
        L = len(verts)
        if L == 1:
            # loop: one in plus one out whatever the coin
            c = int(rng.integers(0, 2))
            h = int(fwd[0])
            direction[h] = c
            direction[int(g.pairing[h])] = 1 - c
            continue
        cls = is_out[verts]
        flip = cls != np.roll(cls, -1)  # edge i joins verts[i], verts[i+1]
        if not flip.any():
            c = int(rng.integers(0, 2))
            for h in fwd:
                h = int(h)
                direction[h] = c
                direction[int(g.pairing[h])] = 1 - c
            continue
        # segment-coherent directions for non-boundary edges: resolve each
        # maximal same-class run with one coin, walking from a boundary
        start = int(np.nonzero(flip)[0][0]) + 1  # verts[start] begins a run
        seg_coin = int(rng.integers(0, 2))
        for step in range(L):
            i = (start + step) % L
            nxt = (i + 1) % L
            h = int(fwd[i])
            if flip[i]:
                # boundary: orient from the in-classed to the out-classed
                if is_out[verts[nxt]]:
                    direction[h] = 1
                    direction[int(g.pairing[h])] = 0
                else:
                    direction[h] = 0
                    direction[int(g.pairing[h])] = 1
                seg_coin = int(rng.integers(0, 2))  # coin for the next run
            else:
                direction[h] = seg_coin
                direction[int(g.pairing[h])] = 1 - seg_coin
    return Orientation(g=g, direction=direction, peel=peel)
