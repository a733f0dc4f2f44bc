"""Observables of colourings: edge profiles, percolation statistics,
component structure, entropies, and the entropy functional.

Empirical profiles keep their integer half-edge counts alongside the
float views so the structural identities (symmetry, row marginals equal
to d times the vertex counts) can be asserted exactly, not to a
tolerance.  Entropies are in nats.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .graphs import RegularMultigraph, sample_configuration_model
from .labels import sample_labels
from .rng import derive_rng


@dataclass
class EdgeProfile:
    """Directed colour-pair frequencies P and vertex frequencies pi.

    P[i, j] is the fraction of the nd directed edges whose tail has
    colour i and head colour j; a loop at v contributes two directed
    (v, v) edges.  The counts fields are present for profiles measured
    on a graph and None for analytic profiles.
    """

    P: np.ndarray
    pi: np.ndarray
    counts: np.ndarray | None = None
    vertex_counts: np.ndarray | None = None
    n: int | None = None
    d: int | None = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.pi = np.asarray(self.pi, dtype=np.float64)

    @classmethod
    def from_counts(cls, counts: np.ndarray, vertex_counts: np.ndarray,
                    n: int, d: int) -> "EdgeProfile":
        counts = np.asarray(counts, dtype=np.int64)
        vertex_counts = np.asarray(vertex_counts, dtype=np.int64)
        prof = cls(P=counts / (n * d), pi=vertex_counts / n,
                   counts=counts, vertex_counts=vertex_counts, n=n, d=d)
        prof.validate()
        return prof

    @property
    def num_colours(self) -> int:
        return len(self.pi)

    @property
    def is_empirical(self) -> bool:
        return self.counts is not None

    def validate(self, atol: float = 1e-9) -> None:
        if np.any(self.P < 0) or np.any(self.pi < 0):
            raise ValueError("negative mass in profile")
        if self.is_empirical:
            c, v = self.counts, self.vertex_counts
            if not np.array_equal(c, c.T):
                raise ValueError("count matrix not symmetric")
            if int(c.sum()) != self.n * self.d:
                raise ValueError("counts do not sum to nd")
            if int(v.sum()) != self.n:
                raise ValueError("vertex counts do not sum to n")
            if not np.array_equal(c.sum(axis=1), self.d * v):
                raise ValueError("row marginals disagree with d * pi")
            return
        if not np.allclose(self.P, self.P.T, atol=atol, rtol=0):
            raise ValueError("P not symmetric")
        if abs(self.P.sum() - 1.0) > atol:
            raise ValueError("P mass differs from 1")
        if abs(self.pi.sum() - 1.0) > atol:
            raise ValueError("pi mass differs from 1")
        if not np.allclose(self.P.sum(axis=1), self.pi, atol=atol, rtol=0):
            raise ValueError("row marginals of P differ from pi")

    def to_csv(self) -> str:
        lines = []
        if self.is_empirical:
            lines.append(f"# n={self.n} d={self.d}")
            nd = self.n * self.d
            for i in range(self.num_colours):
                for j in range(self.num_colours):
                    lines.append(f"P,{i},{j},{int(self.counts[i, j])}/{nd}")
            for i in range(self.num_colours):
                lines.append(f"pi,{i},{int(self.vertex_counts[i])}/{self.n}")
        else:
            for i in range(self.num_colours):
                for j in range(self.num_colours):
                    lines.append(f"P,{i},{j},{float(self.P[i, j])!r}")
            for i in range(self.num_colours):
                lines.append(f"pi,{i},{float(self.pi[i])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "EdgeProfile":
        n = d = None
        pmap: dict[tuple[int, int], Fraction | float] = {}
        pimap: dict[int, Fraction | float] = {}
        exact = True
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    if k == "n":
                        n = int(v)
                    elif k == "d":
                        d = int(v)
                continue
            parts = line.split(",")
            if parts[0] == "P":
                i, j, val = int(parts[1]), int(parts[2]), parts[3]
            elif parts[0] == "pi":
                i, j, val = int(parts[1]), None, parts[2]
            else:
                raise ValueError(f"bad profile line {line!r}")
            if "/" in val:
                num, den = val.split("/")
                parsed: Fraction | float = Fraction(int(num), int(den))
            else:
                parsed = float(val)
                exact = False
            if j is None:
                pimap[i] = parsed
            else:
                pmap[(i, j)] = parsed
        q1 = max(pimap) + 1
        P = np.zeros((q1, q1))
        pi = np.zeros(q1)
        for (i, j), v in pmap.items():
            P[i, j] = float(v)
        for i, v in pimap.items():
            pi[i] = float(v)
        if exact and n is not None and d is not None:
            counts = np.zeros((q1, q1), dtype=np.int64)
            vcounts = np.zeros(q1, dtype=np.int64)
            for (i, j), v in pmap.items():
                counts[i, j] = v * n * d
            for i, v in pimap.items():
                vcounts[i] = v * n
            return cls.from_counts(counts, vcounts, n, d)
        return cls(P=P, pi=pi)

    def __eq__(self, other):
        if not isinstance(other, EdgeProfile):
            return NotImplemented
        if self.is_empirical != other.is_empirical:
            return False
        if self.is_empirical:
            return (self.n == other.n and self.d == other.d
                    and np.array_equal(self.counts, other.counts)
                    and np.array_equal(self.vertex_counts,
                                       other.vertex_counts))
        return (np.array_equal(self.P, other.P)
                and np.array_equal(self.pi, other.pi))


def edge_profile(colours: np.ndarray, g: RegularMultigraph,
                 num_colours: int | None = None) -> EdgeProfile:
    colours = np.asarray(colours)
    if len(colours) != g.n:
        raise ValueError("colouring does not cover the graph")
    q1 = int(colours.max(initial=0)) + 1 if num_colours is None \
        else int(num_colours)
    tail = np.repeat(colours, g.d).astype(np.int64)
    head = colours[g.head].astype(np.int64)
    counts = np.bincount(tail * q1 + head,
                         minlength=q1 * q1).reshape(q1, q1)
    vcounts = np.bincount(colours, minlength=q1).astype(np.int64)
    prof = EdgeProfile.from_counts(counts, vcounts, g.n, g.d)
    prof.validate()
    return prof


@dataclass
class PercStats:
    """Density, correlation ratio, and in-set degree of a binary colouring.

    Derived quantities are computed from the exact integer counts so that
    avdeg = d * density * corr holds as an algebraic identity.
    """

    n: int
    d: int
    ones: int            # vertices with colour 1
    pair_ones: int       # directed edges with both endpoints colour 1
    component_sizes: Counter = field(default_factory=Counter)

    @property
    def density(self) -> float:
        return self.ones / self.n

    @property
    def corr(self) -> float:
        if self.ones == 0:
            return 0.0
        return (self.pair_ones * self.n) / (self.d * self.ones * self.ones)

    @property
    def avdeg(self) -> float:
        if self.ones == 0:
            return 0.0
        return self.pair_ones / self.ones

    def to_dict(self) -> dict:
        return {
            "n": self.n, "d": self.d,
            "density": self.density, "corr": self.corr,
            "avdeg": self.avdeg,
            "components": {str(k): v for k, v in
                           sorted(self.component_sizes.items())},
        }


def percolation_stats(colours: np.ndarray, g: RegularMultigraph,
                      ) -> PercStats:
    colours = np.asarray(colours)
    in_set = colours == 1
    ones = int(np.count_nonzero(in_set))
    head_in = in_set[g.head]
    pair = int(np.count_nonzero(np.repeat(in_set, g.d) & head_in))
    hist: Counter = Counter()
    if ones:
        comp = kernels.inset_components(g.head, in_set, g.n, g.d)
        _, sizes = np.unique(comp[comp >= 0], return_counts=True)
        hist = Counter(int(s) for s in sizes)
    return PercStats(n=g.n, d=g.d, ones=ones, pair_ones=pair,
                     component_sizes=hist)


@dataclass
class ComponentDegrees:
    sizes: np.ndarray        # per component
    edges: np.ndarray        # edges inside each component
    avg_degree: np.ndarray   # 2*edges/size
    is_tree: np.ndarray
    global_average: float
    all_trees: bool

    def to_dict(self) -> dict:
        return {
            "components": len(self.sizes),
            "all_trees": bool(self.all_trees),
            "global_average_degree": self.global_average,
            "max_component": int(self.sizes.max(initial=0)),
        }


def component_degree_check(colours: np.ndarray, g: RegularMultigraph,
                           ) -> ComponentDegrees:
    """Per-component average in-set degree of the induced subgraph."""
    colours = np.asarray(colours)
    in_set = colours == 1
    comp = kernels.inset_components(g.head, in_set, g.n, g.d)
    roots, inv, sizes = np.unique(comp[comp >= 0], return_inverse=True,
                                  return_counts=True)
    k = len(roots)
    if k == 0:
        return ComponentDegrees(sizes=np.zeros(0, np.int64),
                                edges=np.zeros(0, np.int64),
                                avg_degree=np.zeros(0),
                                is_tree=np.zeros(0, bool),
                                global_average=0.0, all_trees=True)
    # undirected edges inside the set: half-edge h < partner, both ends in
    h = np.nonzero(np.repeat(in_set, g.d) & in_set[g.head])[0]
    h = h[h < g.pairing[h]]
    tail_comp = comp[h // g.d]
    idx = np.searchsorted(roots, tail_comp)
    edges = np.bincount(idx, minlength=k).astype(np.int64)
    avg = 2.0 * edges / sizes
    is_tree = edges == sizes - 1
    total_in = int(sizes.sum())
    global_avg = 2.0 * int(edges.sum()) / total_in
    return ComponentDegrees(sizes=sizes.astype(np.int64), edges=edges,
                            avg_degree=avg, is_tree=is_tree,
                            global_average=global_avg,
                            all_trees=bool(is_tree.all()))


def h(x):
    """Pointwise entropy term -x log x with h(0) = 0, natural log."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("h is defined on [0, 1]")
    out = np.zeros_like(x)
    mask = x > 0
    xv = x[mask]
    out[mask] = -xv * np.log(xv)
    out = out + 0.0  # turn -0.0 from x=1 into +0.0
    return out if out.ndim else float(out)


def entropy(dist) -> float:
    """Shannon entropy in nats of a probability vector or matrix."""
    a = np.asarray(dist, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("negative mass")
    if abs(a.sum() - 1.0) > 1e-8:
        raise ValueError(f"mass {a.sum()!r} differs from 1")
    pos = a[a > 0]
    return float(-(pos * np.log(pos)).sum())


def entropy_functional(profile: EdgeProfile, d: int) -> float:
    """(d/2) H(P) - (d-1) H(pi); nonnegative for FIID colourings."""
    return (d / 2.0) * entropy(profile.P) - (d - 1.0) * entropy(profile.pi)


@dataclass
class EntropyCheckResult:
    factor_spec: str
    d: int
    n: int
    trials: int
    seed: int
    values: list[float]

    @property
    def min_value(self) -> float:
        return min(self.values)

    @property
    def mean_value(self) -> float:
        return float(np.mean(self.values))

    def to_dict(self) -> dict:
        return {
            "factor": self.factor_spec, "d": self.d, "n": self.n,
            "trials": self.trials, "seed": self.seed,
            "min": self.min_value, "mean": self.mean_value,
            "values": self.values,
        }


def entropy_check(factor, d: int, n: int, trials: int, seed: int,
                  ) -> EntropyCheckResult:
    """Empirical entropy functional over freshly sampled (graph, labels)."""
    values = []
    for t in range(trials):
        g = sample_configuration_model(n, d,
                                       rng=derive_rng(seed, "graph", t))
        labels = sample_labels(n, seed, index=t)
        colours = factor.project(g, labels)
        prof = edge_profile(colours, g, num_colours=factor.num_colours)
        values.append(entropy_functional(prof, d))
    return EntropyCheckResult(factor_spec=factor.spec_string(), d=d, n=n,
                              trials=trials, seed=seed, values=values)


@dataclass
class ConcentrationResult:
    factor_spec: str
    d: int
    grid: list[int]
    trials: int
    seed: int
    max_dev: list[float]   # per n: max over trials of max-entry |P_t - mean|
    mean_dev: list[float]  # per n: mean over trials of the same statistic

    def to_dict(self) -> dict:
        return {
            "factor": self.factor_spec, "d": self.d, "grid": self.grid,
            "trials": self.trials, "seed": self.seed,
            "max_dev": self.max_dev, "mean_dev": self.mean_dev,
        }


def concentration_experiment(factor, d: int, grid, trials: int, seed: int,
                             ) -> ConcentrationResult:
    """Spread of the empirical edge profile around its mean, per n."""
    grid = [int(n) for n in grid]
    max_dev = []
    mean_dev = []
    for gi, n in enumerate(grid):
        mats = np.empty((trials, factor.num_colours, factor.num_colours))
        for t in range(trials):
            g = sample_configuration_model(
                n, d, rng=derive_rng(seed, f"graph-{gi}", t))
            labels = sample_labels(n, seed, index=gi * trials + t)
            colours = factor.project(g, labels)
            mats[t] = edge_profile(colours, g,
                                   num_colours=factor.num_colours).P
        mean = mats.mean(axis=0)
        devs = np.abs(mats - mean).max(axis=(1, 2))
        max_dev.append(float(devs.max()))
        mean_dev.append(float(devs.mean()))
    return ConcentrationResult(factor_spec=factor.spec_string(), d=d,
                               grid=grid, trials=trials, seed=seed,
                               max_dev=max_dev, mean_dev=mean_dev)
