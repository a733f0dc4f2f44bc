"""Block factors applied to iid vertex labels.

A factor of radius r colours each vertex by a rule of its labelled r-ball.
On a finite multigraph the projection keeps the rule value where the ball
is a tree and emits colour 0 everywhere else, so every colouring produced
here is an exact finite window of the tree process.

Two evaluation routes exist on purpose.  ``raw_colours`` runs the rule
vectorised over the whole graph; ``eval_ball`` recomputes it on a single
extracted ball, one vertex at a time.  Tests drive both and require bitwise
agreement on tree balls; keep them independent when editing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import RegularMultigraph, RootedBall, tree_ball_flags
from .labels import LabelField
from .rng import bits_to_unit, derive_rng, splitmix64, tag_to_int

_UMAX = np.uint64(2**64 - 1)
_INF_BITS = 1 << 70  # larger than any uint64 label


def _mixed_unit(bits: np.ndarray, tag: str, index: int = 0) -> np.ndarray:
    salt = np.uint64(tag_to_int(f"{tag}#{index}"))
    return bits_to_unit(splitmix64(bits ^ salt))


class BlockFactor:
    """Base class: subclasses set name/radius and the two rule routes."""

    name: str = "?"
    radius: int = 0
    num_colours: int = 2

    def raw_colours(self, g: RegularMultigraph, labels: LabelField,
                    ) -> np.ndarray:
        raise NotImplementedError

    def eval_ball(self, ball: RootedBall, bits: np.ndarray) -> int:
        """Rule value at the ball's centre; bits[i] is vertex i's label."""
        raise NotImplementedError

    def tree_density(self, d: int) -> float:
        """Probability of colour 1 at the root of the infinite d-regular tree."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def spec_string(self) -> str:
        ps = self.params()
        if not ps:
            return self.name
        body = ",".join(f"{k}={v}" for k, v in ps.items())
        return f"{self.name}:{body}"

    def project(self, g: RegularMultigraph, labels: LabelField,
                ) -> np.ndarray:
        if labels.n != g.n:
            raise ValueError("label count does not match graph")
        raw = np.asarray(self.raw_colours(g, labels))
        flags = tree_ball_flags(g, self.radius)
        return np.where(flags, raw, 0).astype(np.int8)


class BernoulliFactor(BlockFactor):
    """Radius-0 site percolation: colour 1 with probability p."""

    name = "bernoulli"
    radius = 0

    def __init__(self, p: float):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must be in [0,1], got {p}")
        self.p = p

    def params(self):
        return {"p": self.p}

    def raw_colours(self, g, labels):
        return labels.uniforms() < self.p

    def eval_ball(self, ball, bits):
        return int(bits_to_unit(np.asarray(bits[0], dtype=np.uint64)) < self.p)

    def tree_density(self, d):
        return self.p


class LocalMinFactor(BlockFactor):
    """Colour 1 iff the vertex label beats every neighbour label.

    Yields an independent set; density on the tree is 1/(d+1) by symmetry
    of the d+1 labels in a closed star.
    """

    name = "local_min"
    radius = 1

    def raw_colours(self, g, labels):
        nbr_min = labels.bits[g.head].reshape(g.n, g.d).min(axis=1)
        return labels.bits < nbr_min

    def eval_ball(self, ball, bits):
        own = int(bits[0])
        nbrs = [int(bits[i]) for i in range(len(ball.vertices))
                if ball.depth[i] == 1]
        return int(own < min(nbrs, default=_INF_BITS))

    def tree_density(self, d):
        return 1.0 / (d + 1)


class NibbleFactor(BlockFactor):
    """Multi-round independent-set growth.

    Each round every not-yet-joined vertex tosses a rate-coin to become a
    candidate; a candidate joins unless some neighbour is also a candidate
    this round or has already joined.  Joined vertices stay joined.  After
    r rounds the state at a vertex is a function of its labelled r-ball,
    so the factor radius is the round count.
    """

    name = "nibble"

    def __init__(self, rounds: int, rate: float):
        rounds = int(rounds)
        rate = float(rate)
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0.0 < rate < 1.0:
            raise ValueError(f"rate must be in (0,1), got {rate}")
        self.rounds = rounds
        self.rate = rate
        self.radius = rounds
        self._dens_cache: dict[int, float] = {}

    def params(self):
        return {"rounds": self.rounds, "rate": self.rate}

    def raw_colours(self, g, labels):
        n, d = g.n, g.d
        joined = np.zeros(n, dtype=bool)
        for t in range(1, self.rounds + 1):
            coin = labels.substream("nibble-round", t) < self.rate
            cand = coin & ~joined
            blocked = (cand | joined)[g.head].reshape(n, d).any(axis=1)
            joined |= cand & ~blocked
        return joined

    def eval_ball(self, ball, bits):
        k = len(ball.vertices)
        adj = [[] for _ in range(k)]
        for i in range(1, k):
            p = int(ball.parent[i])
            adj[i].append(p)
            adj[p].append(i)
        bits = np.ascontiguousarray(bits, dtype=np.uint64)
        joined = [False] * k
        for t in range(1, self.rounds + 1):
            u = _mixed_unit(bits, "nibble-round", t)
            cand = [u[i] < self.rate and not joined[i] for i in range(k)]
            # joins are decided against the frozen start-of-round state
            joins = [cand[i]
                     and not any(cand[j] or joined[j] for j in adj[i])
                     for i in range(k)]
            for i in range(k):
                if joins[i]:
                    joined[i] = True
        return int(joined[0])

    def tree_density(self, d):
        if d not in self._dens_cache:
            self._dens_cache[d] = self._density_mc(d)
        return self._dens_cache[d]

    def _density_mc(self, d: int, samples: int = 400_000,
                    seed: int = 20260818) -> float:
        parent, depth, adj = ideal_ball_structure(d, self.rounds)
        k = len(parent)
        if k > 5000:
            raise ValueError(
                "tree density estimate infeasible at this radius; "
                "pass an explicit density instead")
        rng = derive_rng(seed, "nibble-density")
        got = 0
        total = 0
        batch = max(1, min(samples, 8_000_000 // k))
        while total < samples:
            s = min(batch, samples - total)
            bits = rng.integers(0, 2**64, size=(s, k), dtype=np.uint64)
            joined = np.zeros((s, k), dtype=bool)
            for t in range(1, self.rounds + 1):
                u = _mixed_unit(bits, "nibble-round", t)
                cand = (u < self.rate) & ~joined
                busy = cand | joined
                blocked = np.zeros_like(cand)
                for i, nbrs in enumerate(adj):
                    blocked[:, i] = busy[:, nbrs].any(axis=1)
                joined |= cand & ~blocked
            got += int(joined[:, 0].sum())
            total += s
        return got / total


class InterpolationFactor(BlockFactor):
    """Correlation-tuned mixture of a base factor and fresh noise.

    Per vertex an independent choice coin keeps the base colour with
    probability p and otherwise substitutes an independent Bernoulli colour
    whose density is x times the base density, with
    x = (p/(1-p)) * (1/sqrt(1-c) - 1).  Two such mixtures built over the
    same base but with independent choice/noise coins have colour-1
    correlation exactly c at each tree vertex, for any base density.
    """

    name = "interpolate"

    def __init__(self, base: BlockFactor, corr: float, p: float,
                 is_density: float | None = None):
        corr = float(corr)
        p = float(p)
        if not 0.0 <= corr < 1.0:
            raise ValueError(f"corr must be in [0,1), got {corr}")
        if not 0.0 < p <= 1.0:
            raise ValueError(f"p must be in (0,1], got {p}")
        self.base = base
        self.corr = corr
        self.p = p
        self.x = interpolation_x(corr, p)
        self.radius = base.radius
        self._isd = None if is_density is None else float(is_density)

    def params(self):
        out = {"c": self.corr, "p": self.p, "base": self.base.spec_string()}
        if self._isd is not None:
            out["is_density"] = self._isd
        return out

    def spec_string(self):
        ps = self.params()
        base = ps.pop("base")
        if ":" in base:
            name, body = base.split(":", 1)
            base = f"{name}({body})"
        body = ",".join(f"{k}={v}" for k, v in ps.items())
        return f"{self.name}:{body},base={base}"

    def noise_density(self, d: int) -> float:
        dens = self._isd if self._isd is not None else self.base.tree_density(d)
        nd = self.x * dens
        if nd > 1.0:
            raise ValueError(
                f"noise density x*density = {nd:.6g} exceeds 1; "
                "lower the correlation target or the base density")
        return nd

    def raw_colours(self, g, labels):
        nd = self.noise_density(g.d)
        keep = labels.substream("mix-choice") < self.p
        noise = labels.substream("mix-noise") < nd
        base = np.asarray(self.base.raw_colours(g, labels), dtype=bool)
        return np.where(keep, base, noise)

    def eval_ball(self, ball, bits):
        if self.radius == 0:
            # a radius-0 base density cannot depend on the degree
            nd = self.x * (self._isd if self._isd is not None
                           else self.base.tree_density(0))
        else:
            nd = self.noise_density(int(np.count_nonzero(ball.depth == 1)))
        b0 = np.asarray([bits[0]], dtype=np.uint64)
        if _mixed_unit(b0, "mix-choice")[0] < self.p:
            return self.base.eval_ball(ball, bits)
        return int(_mixed_unit(b0, "mix-noise")[0] < nd)

    def tree_density(self, d):
        dens = self._isd if self._isd is not None else self.base.tree_density(d)
        return dens * (self.p + (1 - self.p) * self.x)


class MinDepthParityFactor(BlockFactor):
    """Colour 1 iff the smallest label in the 2-ball sits at even depth.

    Density on the tree is (1 + d(d-1)) / (1 + d + d(d-1)).  Useful as a
    radius-2 contrast case in concentration experiments.
    """

    name = "min_depth_parity"
    radius = 2

    def raw_colours(self, g, labels):
        n, d = g.n, g.d
        b = labels.bits
        hb = b[g.head].reshape(n, d)
        rows = np.arange(n)
        arg = hb.argmin(axis=1)
        m1 = hb[rows, arg]
        tmp = hb.copy()
        tmp[rows, arg] = _UMAX
        second = tmp.min(axis=1)
        # per half-edge h = (u -> w): min label among w's neighbours after
        # removing the edge back to u, i.e. the depth-2 minimum through h
        back_slot = (g.pairing % d).astype(np.int64)
        head = g.head
        thru = np.where(arg[head] == back_slot, second[head], m1[head])
        m2 = thru.reshape(n, d).min(axis=1)
        return np.minimum(b, m2) < m1

    def eval_ball(self, ball, bits):
        m0 = int(bits[0])
        m1 = _INF_BITS
        m2 = _INF_BITS
        for i in range(1, len(ball.vertices)):
            v = int(bits[i])
            if ball.depth[i] == 1:
                m1 = min(m1, v)
            else:
                m2 = min(m2, v)
        return int(min(m0, m2) < m1)

    def tree_density(self, d):
        return (1 + d * (d - 1)) / (1 + d + d * (d - 1))


def interpolation_x(corr: float, p: float) -> float:
    """Noise-density multiplier hitting colour correlation corr at keep
    probability p; derived from
    ((1-p)^2 x^2 + 2 p (1-p) x) / (p + (1-p) x)^2 = corr.
    p = 1 keeps the base outright."""
    if p == 1.0:
        return 0.0
    from .bounds import interpolation_params  # deferred: keep factors light
    return interpolation_params(corr, p)[0]


def ideal_ball_structure(d: int, r: int):
    """Parent/depth arrays and adjacency of the full d-regular tree ball."""
    parent = [-1]
    depth = [0]
    prev_level = [0]
    for lev in range(1, r + 1):
        level = []
        for v in prev_level:
            deg = d if lev == 1 else d - 1
            for _ in range(deg):
                parent.append(v)
                depth.append(lev)
                level.append(len(parent) - 1)
        prev_level = level
    k = len(parent)
    adj = [[] for _ in range(k)]
    for i in range(1, k):
        adj[i].append(parent[i])
        adj[parent[i]].append(i)
    return (np.array(parent, dtype=np.int32),
            np.array(depth, dtype=np.int32), adj)


def tuned_nibble(d: int) -> NibbleFactor:
    rounds = 3 if d <= 4 else 2
    return NibbleFactor(rounds=rounds, rate=1.0 / (d + 1))


def _split_top(text: str, sep: str) -> list[str]:
    out = []
    buf = []
    depth = 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    out.append("".join(buf))
    return [s for s in (t.strip() for t in out) if s]


def parse_factor_spec(spec: str) -> tuple[str, dict]:
    name, _, rest = spec.partition(":")
    params = {}
    for part in _split_top(rest, ","):
        k, eq, v = part.partition("=")
        if not eq:
            raise ValueError(f"bad factor parameter {part!r} in {spec!r}")
        params[k.strip()] = v.strip()
    return name.strip(), params


def make_factor(spec: str, d: int | None = None) -> BlockFactor:
    """Build a factor from a spec string like 'bernoulli:p=0.3' or
    'interpolate:c=0.5,p=0.9,base=nibble(rounds=2,rate=0.2)'."""
    name, params = parse_factor_spec(spec)
    if name == "bernoulli":
        fac = BernoulliFactor(p=float(params.pop("p")))
        _reject_extra(name, params)
        return fac
    if name == "local_min":
        _reject_extra(name, params)
        return LocalMinFactor()
    if name == "nibble":
        if params.pop("tuned", None):
            _reject_extra(name, params)
            if d is None:
                raise ValueError("tuned nibble needs the graph degree")
            return tuned_nibble(d)
        fac = NibbleFactor(rounds=int(params.pop("rounds")),
                           rate=float(params.pop("rate")))
        _reject_extra(name, params)
        return fac
    if name == "min_depth_parity":
        _reject_extra(name, params)
        return MinDepthParityFactor()
    if name == "interpolate":
        base_spec = params.pop("base", "local_min")
        if "(" in base_spec:
            base_spec = base_spec.replace("(", ":", 1).rstrip(")")
        base = make_factor(base_spec, d)
        isd = params.pop("is_density", None)
        fac = InterpolationFactor(
            base=base,
            corr=float(params.pop("c")),
            p=float(params.pop("p")),
            is_density=None if isd is None else float(isd))
        _reject_extra(name, params)
        return fac
    raise ValueError(f"unknown factor {name!r}")


def _reject_extra(name, params):
    if params:
        raise ValueError(f"unknown parameters for {name}: {sorted(params)}")
