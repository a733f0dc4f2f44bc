"""Closed-form bounds and counting formulas.

Everything here is a pure function of its arguments: the density bound
and its quadratic, the Psi-ratio inequalities, the binary-profile and
multi-colour entropy upper bounds, and the exact expected count of
partitions with a prescribed edge profile.  Exact combinatorics run on
arbitrary-precision rationals; floats appear only in entropies and the
bound formulas themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .stats import EdgeProfile, entropy, entropy_functional, h


def psi(c: float) -> float:
    """1 - c + c log c, with psi(0) = 1; zero only at c = 1."""
    if c < 0:
        raise ValueError("psi is defined for c >= 0")
    if c == 0:
        return 1.0
    return 1.0 - c + c * math.log(c)


def corr_density_bound(c: float, d: int, eps: float = 0.0) -> float:
    """Density upper bound (2/(psi(c) d)) (log d - log log d + 1
    + log psi(c) + eps) for percolations with correlation ratio <= c."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 1:
        raise ValueError("c = 1 rejected: psi(c) vanishes")
    if d < 3:
        raise ValueError("d too small: the bound needs d >= 3")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    pc = psi(c)
    bracket = math.log(d) - math.log(math.log(d)) + 1.0 + math.log(pc) + eps
    return (2.0 / (pc * d)) * bracket


def q_coefficients(rho: float, c: float, d: int,
                   ) -> tuple[float, float, float]:
    """Coefficients (a, b, const) of q(x) = a x^2 + b x + const."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if psi(c) <= 0:
        raise ValueError("psi(c) must be positive (c = 1 rejected)")
    if d < 3:
        raise ValueError("d too small")
    ld = math.log(d)
    a = (2.0 * rho + 1.0) * ld / (2.0 * d)
    b = -psi(rho) / 2.0
    const = 1.0 + (1.0 + math.log(psi(c)) - math.log(ld)) / ld
    return a, b, const


def q_eval(rho: float, c: float, d: int, x: float) -> float:
    a, b, const = q_coefficients(rho, c, d)
    return a * x * x + b * x + const


def q_roots(rho: float, c: float, d: int) -> tuple[float, ...]:
    """Real roots of the density quadratic, sorted; empty if none."""
    a, b, const = q_coefficients(rho, c, d)
    disc = b * b - 4.0 * a * const
    if disc < 0:
        return ()
    s = math.sqrt(disc)
    # b <= 0 here, so -b + s is a stable sum; get the other root by Vieta
    big = (-b + s) / (2.0 * a)
    small = const / (a * big) if big != 0 else (-b - s) / (2.0 * a)
    lo, hi = sorted((small, big))
    return (lo, hi)


def larger_root_floor(rho: float, c: float, d: int) -> float:
    """Lower bound (d/((2 rho + 1) log d)) psi(rho)/2 for the larger root."""
    return (d / ((2.0 * rho + 1.0) * math.log(d))) * psi(rho) / 2.0


def psi_ratio_bounds(rho: float, c: float) -> dict:
    """Case-checked lower bounds for psi(rho) and psi(rho)/(2 rho + 1)."""
    below = rho <= c < 1
    above = rho >= c > 1
    if not (below or above):
        raise ValueError(
            "hypotheses need rho <= c < 1 or rho >= c > 1, "
            f"got rho={rho}, c={c}")
    pr, pc = psi(rho), psi(c)
    ratio = pr / (2.0 * rho + 1.0)
    floor = pc / 3.0 if below else pc / (3.0 * c)
    if pr < pc - 1e-12 or ratio < floor - 1e-12:
        raise AssertionError("psi ratio bound violated; check inputs")
    return {"psi_rho": pr, "psi_c": pc, "ratio": ratio,
            "psi_floor": pc, "ratio_floor": floor}


def binary_profile(alpha: float, rho: float) -> EdgeProfile:
    """Two-colour profile with density alpha and correlation ratio rho."""
    p11 = rho * alpha * alpha
    p01 = alpha - p11
    p00 = 1.0 - 2.0 * alpha + p11
    if min(p11, p01, p00) < 0:
        raise ValueError(
            f"invalid binary profile: alpha={alpha}, rho={rho}")
    prof = EdgeProfile(P=np.array([[p00, p01], [p01, p11]]),
                       pi=np.array([1.0 - alpha, alpha]))
    prof.validate(atol=1e-12)
    return prof


def h_upper_bound(alpha: float, rho: float, d: int) -> float:
    """Upper bound for the entropy functional of a binary profile:
    -(d/2) psi(rho) alpha^2 + alpha + h(alpha) + ((2 rho + 1) d / 2) alpha^3."""
    binary_profile(alpha, rho)  # rejects invalid (alpha, rho)
    return (-(d / 2.0) * psi(rho) * alpha * alpha
            + alpha + h(alpha)
            + ((2.0 * rho + 1.0) * d / 2.0) * alpha ** 3)


@dataclass
class MaxEntropyInput:
    """Profile with a marked symmetric pair set and its cap constants.

    lam is a set of colour pairs avoiding colour 0 on which P is small
    (at most cap_k); cap_j caps pi off colour 0.
    """

    profile: EdgeProfile
    lam: frozenset
    cap_k: float
    cap_j: float

    def __post_init__(self):
        self.lam = frozenset((int(i), int(j)) for i, j in self.lam)

    @property
    def q(self) -> int:
        return self.profile.num_colours - 1

    def validate(self) -> None:
        P, pi = self.profile.P, self.profile.pi
        for (i, j) in self.lam:
            if (j, i) not in self.lam:
                raise ValueError(f"pair set not symmetric: ({i},{j})")
            if i == 0 or j == 0:
                raise ValueError(f"pair set touches colour 0: ({i},{j})")
            if P[i, j] > self.cap_k:
                raise ValueError(
                    f"P({i},{j})={P[i, j]} exceeds the cap K={self.cap_k}")
        if np.any(pi[1:] > self.cap_j):
            raise ValueError(f"pi exceeds the cap J={self.cap_j} off colour 0")
        if self.cap_k > 1.0 / (math.e * self.q):
            raise ValueError(
                f"K={self.cap_k} exceeds 1/(e q) = {1.0 / (math.e * self.q)}")

    def pair_mass(self) -> float:
        """pi^2(lam) = sum of pi(i) pi(j) over pairs in the set."""
        pi = self.profile.pi
        return float(sum(pi[i] * pi[j] for (i, j) in self.lam))


def max_entropy_bound(inp: MaxEntropyInput, d: int) -> float:
    """H(pi) - (d/2) pi^2(lam) + q^2 (dK + dK log(J^2/K))."""
    inp.validate()
    q, K, J = inp.q, inp.cap_k, inp.cap_j
    tail = q * q * (d * K + d * K * math.log(J * J / K))
    return entropy(inp.profile.pi) - (d / 2.0) * inp.pair_mass() + tail


def _dfact(m: int) -> int:
    """Double factorial of odd m >= -1, with (-1)!! = 1."""
    if m < -1 or m % 2 == 0:
        raise ValueError(f"odd m >= -1 required, got {m}")
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def _multinom(total: int, parts) -> int:
    out = math.factorial(total)
    for p in parts:
        out //= math.factorial(p)
    return out


def _integer_counts(P, pi, n: int, d: int):
    """Exact integer pair/vertex counts of a rational profile, validated."""
    P = np.asarray(P, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    nd = n * d
    counts = np.rint(P * nd).astype(np.int64)
    vcounts = np.rint(pi * n).astype(np.int64)
    if np.max(np.abs(counts - P * nd)) > 1e-6:
        raise ValueError("profile entries are not integer multiples of 1/nd")
    if np.max(np.abs(vcounts - pi * n)) > 1e-6:
        raise ValueError("pi entries are not integer multiples of 1/n")
    if not np.array_equal(counts, counts.T):
        raise ValueError("pair counts not symmetric")
    if int(counts.sum()) != nd or int(vcounts.sum()) != n:
        raise ValueError("profile masses do not total 1")
    if not np.array_equal(counts.sum(axis=1), d * vcounts):
        raise ValueError("row marginals disagree with d pi")
    if np.any(np.diag(counts) % 2):
        raise ValueError("diagonal pair counts must be even")
    return counts, vcounts


def expected_partition_count_exact(P, pi, n: int, d: int) -> Fraction:
    """Expected number of ordered colourings with exactly this profile on
    a uniform pairing of n d half-edges, as an exact rational."""
    counts, vcounts = _integer_counts(P, pi, n, d)
    q1 = len(vcounts)
    value = Fraction(_multinom(n, vcounts))
    for i in range(q1):
        value *= _multinom(int(d * vcounts[i]), counts[i])
    for i in range(q1):
        for j in range(i + 1, q1):
            value *= math.factorial(int(counts[i, j]))
        value *= _dfact(int(counts[i, i]) - 1)
    return value / _dfact(n * d - 1)


def log_fraction(f: Fraction) -> float:
    """log of a positive rational, safe for huge numerators."""
    if f <= 0:
        raise ValueError("log of nonpositive rational")
    return math.log(f.numerator) - math.log(f.denominator)


def partition_count_log_bound(P, pi, n: int, d: int) -> float:
    """n times the entropy functional; log E[Z] exceeds it by at most a
    logarithmic-in-n term along profile-preserving sequences."""
    prof = EdgeProfile(P=np.asarray(P, dtype=np.float64),
                       pi=np.asarray(pi, dtype=np.float64))
    prof.validate(atol=1e-9)
    return n * entropy_functional(prof, d)


def interpolation_params(c: float, p: float) -> tuple[float, float]:
    """Noise multiplier x = (p/(1-p)) (1/sqrt(1-c) - 1) and density
    factor p/sqrt(1-c) of the correlation-c interpolation."""
    if not 0.0 <= c < 1.0:
        raise ValueError(f"c must be in [0,1), got {c}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    root = 1.0 / math.sqrt(1.0 - c)
    return (p / (1.0 - p)) * (root - 1.0), p * root


@dataclass
class BoundReport:
    """Audit record for one density-bound evaluation."""

    c: float
    d: int
    eps: float
    rho: float
    psi_c: float
    psi_rho: float
    quad: tuple[float, float, float]
    discriminant: float
    roots: tuple[float, ...]
    bracket: float
    density_bound: float
    beta: float  # bound in units of log d / d

    def to_dict(self) -> dict:
        return {
            "c": self.c, "d": self.d, "eps": self.eps, "rho": self.rho,
            "psi_c": self.psi_c, "psi_rho": self.psi_rho,
            "quad": list(self.quad), "discriminant": self.discriminant,
            "roots": list(self.roots), "bracket": self.bracket,
            "density_bound": self.density_bound, "beta": self.beta,
        }


def bound_report(c: float, d: int, eps: float = 0.0,
                 rho: float | None = None) -> BoundReport:
    if rho is None:
        rho = c
    a, b, const = q_coefficients(rho, c, d)
    disc = b * b - 4.0 * a * const
    roots = q_roots(rho, c, d)
    pc = psi(c)
    bracket = math.log(d) - math.log(math.log(d)) + 1.0 + math.log(pc) + eps
    bound = corr_density_bound(c, d, eps)
    return BoundReport(c=c, d=d, eps=eps, rho=rho, psi_c=pc, psi_rho=psi(rho),
                       quad=(a, b, const), discriminant=disc, roots=roots,
                       bracket=bracket, density_bound=bound,
                       beta=bound * d / math.log(d))
