"""Resampling couplings of a percolation process.

One base label field X0 and a Bernoulli-p vertex mask are drawn; copy i
replaces the masked labels with its own fresh field and projects.  All
copies share the mask, so conditioned on (X0, mask) they are iid, and the
whole tuple (Y0, Y1, ..., Yk) is exchangeable.  The stability Q(v) is the
conditional probability that v stays in the set after re-randomizing the
masked labels, estimated here with m fresh projections at fixed mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import RegularMultigraph
from .labels import LabelField
from .rng import derive_rng
from .stats import EdgeProfile, edge_profile

MAX_SUBSET_K = 12


def _fresh_field(n: int, seed: int, tag: str, index: int) -> LabelField:
    rng = derive_rng(seed, tag, index)
    return LabelField(seed=seed,
                      bits=rng.integers(0, 2**64, size=n, dtype=np.uint64))


def _merge(x0: LabelField, fresh: LabelField, mask: np.ndarray) -> LabelField:
    return LabelField(seed=x0.seed,
                      bits=np.where(mask, fresh.bits, x0.bits))


@dataclass
class CouplingEnsemble:
    g: RegularMultigraph
    factor_spec: str
    p: float
    k: int
    mask: np.ndarray            # bool, shape (n,)
    ys: np.ndarray              # int8, shape (k+1, n); row 0 is Y0
    x0: LabelField
    fresh: list[LabelField] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def d(self) -> int:
        return self.g.d

    def validate(self, factor=None) -> None:
        if self.ys.shape != (self.k + 1, self.n):
            raise ValueError("colouring matrix shape mismatch")
        if len(self.fresh) != self.k:
            raise ValueError("fresh field count disagrees with k")
        if factor is not None:
            # re-derive each copy from (x0, fresh, mask) and compare
            if not np.array_equal(self.ys[0], factor.project(self.g,
                                                             self.x0)):
                raise ValueError("copy 0 does not re-derive from x0")
            for i, f in enumerate(self.fresh, start=1):
                redo = factor.project(self.g, _merge(self.x0, f, self.mask))
                if not np.array_equal(self.ys[i], redo):
                    raise ValueError(f"copy {i} does not re-derive")


def sample_ensemble(factor, g: RegularMultigraph, p: float, k: int,
                    seed: int) -> CouplingEnsemble:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0,1], got {p}")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = g.n
    x0 = _fresh_field(n, seed, "ens-labels", 0)
    mask = derive_rng(seed, "ens-mask").random(n) < p
    ys = np.empty((k + 1, n), dtype=np.int8)
    ys[0] = factor.project(g, x0)
    fresh = []
    for i in range(1, k + 1):
        f = _fresh_field(n, seed, "ens-labels", i)
        fresh.append(f)
        ys[i] = factor.project(g, _merge(x0, f, mask))
    return CouplingEnsemble(g=g, factor_spec=factor.spec_string(), p=p, k=k,
                            mask=mask, ys=ys, x0=x0, fresh=fresh)


@dataclass
class IntersectionDensities:
    """alpha_i = (d / log d) P(Y1 = ... = Yi = 1), plus the raw values."""

    k: int
    d: int
    raw: np.ndarray      # raw intersection probabilities, length k
    alphas: np.ndarray   # normalized by d / log d

    def validate(self) -> None:
        if np.any(np.diff(self.raw) > 0):
            raise ValueError("intersection probabilities must be decreasing")
        if np.any(self.raw < 0):
            raise ValueError("negative intersection probability")


def intersection_densities(ens: CouplingEnsemble) -> IntersectionDensities:
    raw = np.empty(ens.k)
    running = np.ones(ens.n, dtype=bool)
    for i in range(1, ens.k + 1):
        running &= ens.ys[i] == 1
        raw[i - 1] = running.mean()
    scale = ens.d / math.log(ens.d)
    out = IntersectionDensities(k=ens.k, d=ens.d, raw=raw,
                                alphas=raw * scale)
    out.validate()
    return out


def word_profile(ens: CouplingEnsemble) -> EdgeProfile:
    """Edge profile of the coupled process over the alphabet {0,1}^k:
    the colour of v is the bitmask of copies 1..k containing v."""
    if ens.k > 8:
        raise ValueError("word profile limited to k <= 8")
    words = np.zeros(ens.n, dtype=np.int64)
    for i in range(1, ens.k + 1):
        words |= (ens.ys[i] == 1).astype(np.int64) << (i - 1)
    return edge_profile(words, ens.g, num_colours=2 ** ens.k)


@dataclass
class StabilityEstimate:
    p: float
    u_list: list[float]
    trials: int
    m: int
    ratio_est: dict
    ratio_se: dict
    cond_est: dict
    cond_se: dict
    failed: bool = False

    def to_dict(self) -> dict:
        def fmt(dd):
            return {str(u): dd[u] for u in sorted(dd)}
        return {"p": self.p, "trials": self.trials, "m": self.m,
                "failed": self.failed,
                "ratio": {"est": fmt(self.ratio_est),
                          "se": fmt(self.ratio_se)},
                "conditional": {"est": fmt(self.cond_est),
                                "se": fmt(self.cond_se)}}


def _cond_moment(successes: np.ndarray, m: int, u: float) -> float:
    """Mean estimate of Q^u from per-root fresh-success counts.

    Integer u uses the unbiased product-over-distinct-resamples statistic
    C(S, u)/C(m, u); fractional u falls back to the biased plug-in power.
    """
    if float(u).is_integer():
        u = int(u)
        if u == 0:
            return 1.0
        if u > m:
            raise ValueError(f"moment u={u} needs m >= u resamples")
        num = np.ones(len(successes))
        for j in range(u):
            num *= (successes - j) / (m - j)
        return float(np.clip(num, 0.0, None).mean())
    return float(((successes / m) ** u).mean())


def stability_moments(factor, g: RegularMultigraph, p: float, u_list,
                      trials: int, seed: int, m: int = 64,
                      ) -> StabilityEstimate:
    """Two estimators of E*[Q^u]: intersection-density ratios (integer u)
    and the conditional mean over Y0 roots (any u)."""
    u_list = list(u_list)
    int_us = [int(u) for u in u_list if float(u).is_integer()]
    kmax = max(int_us, default=0)
    if kmax >= m:
        raise ValueError("m must exceed the largest integer moment")
    per_ratio = {u: [] for u in int_us}
    per_cond = {u: [] for u in u_list}
    failed = False
    for t in range(trials):
        x0 = _fresh_field(g.n, seed, "stab-labels", t * (m + 1))
        mask = derive_rng(seed, "stab-mask", t).random(g.n) < p
        y0 = factor.project(g, x0) == 1
        roots = int(np.count_nonzero(y0))
        if roots == 0:
            failed = True
            continue
        successes = np.zeros(roots, dtype=np.int32)
        inter = y0.copy()
        inter_frac = []
        for j in range(1, m + 1):
            f = _fresh_field(g.n, seed, "stab-labels", t * (m + 1) + j)
            yj = factor.project(g, _merge(x0, f, mask)) == 1
            successes += yj[y0]
            if j <= kmax:
                inter &= yj
                inter_frac.append(inter.mean())
        base = y0.mean()
        for u in int_us:
            if u == 0:
                per_ratio[u].append(1.0)
            else:
                per_ratio[u].append(inter_frac[u - 1] / base)
        for u in u_list:
            per_cond[u].append(_cond_moment(successes, m, u))

    def agg(per):
        est, se = {}, {}
        for u, vals in per.items():
            if not vals:
                est[u], se[u] = float("nan"), float("nan")
                continue
            est[u] = float(np.mean(vals))
            se[u] = (float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
                     if len(vals) > 1 else float("nan"))
        return est, se

    ratio_est, ratio_se = agg(per_ratio)
    cond_est, cond_se = agg(per_cond)
    return StabilityEstimate(p=p, u_list=u_list, trials=trials, m=m,
                             ratio_est=ratio_est, ratio_se=ratio_se,
                             cond_est=cond_est, cond_se=cond_se,
                             failed=failed)


def tune_p(factor, g: RegularMultigraph, u: float, target: float,
           tolerance: float, seed: int, m: int = 48,
           max_iter: int = 40) -> float:
    """Find p with E*[Q^u] close to target by bisection.

    Evaluations share one label realization and a common mask-uniform
    field (the mask at p is uniforms < p), which makes the empirical map
    p -> E*[Q^u] nearly monotone; brackets are re-verified each step and
    a grid search takes over if they fail.
    """
    n = g.n
    x0 = _fresh_field(n, seed, "tune-labels", 0)
    mask_u = derive_rng(seed, "tune-mask").random(n)
    fresh = [_fresh_field(n, seed, "tune-labels", 1 + j) for j in range(m)]
    y0 = factor.project(g, x0) == 1
    if not y0.any():
        raise ValueError("empty base set; cannot condition")

    cache: dict[float, float] = {}

    def f(p: float) -> float:
        if p not in cache:
            mask = mask_u < p
            successes = np.zeros(int(y0.sum()), dtype=np.int32)
            for fj in fresh:
                yj = factor.project(g, _merge(x0, fj, mask)) == 1
                successes += yj[y0]
            cache[p] = _cond_moment(successes, m, u)
        return cache[p]

    f0, f1 = f(0.0), f(1.0)
    lo_v, hi_v = max(f0, f1), min(f0, f1)
    if not hi_v - tolerance <= target <= lo_v + tolerance:
        raise ValueError(
            f"target {target} outside attainable range [{hi_v}, {lo_v}]")
    lo, hi = 0.0, 1.0  # f decreasing: f(lo) >= target >= f(hi)
    if f0 < f1:
        raise ValueError("estimator increased from p=0 to p=1; "
                         "not a valid stability curve")
    for _ in range(max_iter):
        mid = (lo + hi) / 2.0
        fm = f(mid)
        if abs(fm - target) <= tolerance:
            return mid
        if not (f(hi) - tolerance <= fm <= f(lo) + tolerance):
            break  # non-monotone bracket; fall back to the grid
        if fm > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9:
            break
    grid = np.linspace(0.0, 1.0, 65)
    vals = [f(float(p)) for p in grid]
    best = int(np.argmin([abs(v - target) for v in vals]))
    if abs(vals[best] - target) <= tolerance:
        return float(grid[best])
    raise ValueError(
        f"no p within tolerance {tolerance} of target {target}; "
        f"closest {vals[best]} at p={grid[best]}")


def _subset_array(values, k: int) -> np.ndarray:
    """Normalize a subset-indexed mapping to an array over bitmasks."""
    if k > MAX_SUBSET_K:
        raise ValueError(f"subset transforms limited to k <= {MAX_SUBSET_K}")
    size = 1 << k
    if isinstance(values, dict):
        arr = np.zeros(size)
        for key, val in values.items():
            if isinstance(key, (int, np.integer)):
                mask = int(key)
            else:
                mask = 0
                for i in key:
                    mask |= 1 << (int(i) - 1)
            arr[mask] = val
        return arr
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (size,):
        raise ValueError(f"expected {size} subset entries, got {arr.shape}")
    return arr.copy()


def alpha_from_beta(beta, k: int) -> np.ndarray:
    """alpha(S) = sum of beta(T) over T containing S (bitmask-indexed)."""
    a = _subset_array(beta, k)
    for i in range(k):
        bit = 1 << i
        for s in range(1 << k):
            if not s & bit:
                a[s] += a[s | bit]
    return a


def beta_from_alpha(alpha, k: int) -> np.ndarray:
    """Moebius inversion: beta(S) = sum (-1)^{|T minus S|} alpha(T)."""
    a = _subset_array(alpha, k)
    for i in range(k):
        bit = 1 << i
        for s in range(1 << k):
            if not s & bit:
                a[s] -= a[s | bit]
    return a


def exchangeable_beta(by_size, k: int) -> np.ndarray:
    """Spread per-size values b_1..b_k over all subsets by popcount."""
    by_size = list(by_size)
    if len(by_size) != k:
        raise ValueError("need one value per subset size 1..k")
    arr = np.zeros(1 << k)
    for s in range(1, 1 << k):
        arr[s] = by_size[bin(s).count("1") - 1]
    return arr


def lemma_identity_check(beta, k: int) -> tuple[float, float]:
    """Both sides of the inclusion-exclusion identity
    sum_S beta(S) - (1/2) sum_{S cap T nonempty} beta(S) beta(T)
      = sum_i (-1)^(i-1) C(k,i) (alpha_i - alpha_i^2 / 2)
    for exchangeable beta.  Left side by exhaustive subset enumeration."""
    if k > 10:
        raise ValueError("identity check limited to k <= 10")
    b = _subset_array(beta, k)
    size = 1 << k
    sizes = np.array([bin(s).count("1") for s in range(size)])
    for c in range(1, k + 1):
        vals = b[sizes == c]
        if np.max(vals) - np.min(vals) > 1e-12:
            raise ValueError("beta is not exchangeable")
    b = b.copy()
    b[0] = 0.0
    masks = np.arange(size)
    inter = (masks[:, None] & masks[None, :]) != 0
    lhs = float(b.sum() - 0.5 * (np.outer(b, b) * inter).sum())
    a = alpha_from_beta(b, k)
    rhs = 0.0
    for i in range(1, k + 1):
        ai = a[(1 << i) - 1]
        rhs += (-1.0) ** (i - 1) * math.comb(k, i) * (ai - ai * ai / 2.0)
    return lhs, float(rhs)


def s_k(x, k: int):
    """1 + (1-x) + ... + (1-x)^(k-1); equals (1 - (1-x)^k)/x for x > 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("s_k is defined on [0, 1]")
    out = np.ones_like(x)
    term = np.ones_like(x)
    for _ in range(k - 1):
        term = term * (1.0 - x)
        out = out + term
    return out if out.ndim else float(out)


def qinq_functional(alpha1: float, q_sample, r_sample, k: int) -> float:
    """alpha_1 E[s_k(Q)] - (alpha_1^2 / 2) E[s_k(Q R)]."""
    q = np.asarray(q_sample, dtype=np.float64)
    r = np.asarray(r_sample, dtype=np.float64)
    return float(alpha1 * s_k(q, k).mean()
                 - (alpha1 ** 2 / 2.0) * s_k(q * r, k).mean())
