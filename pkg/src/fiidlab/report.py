"""Reproducible experiment runs with machine-readable reports.

Every run is described by a RunConfig and produces a Report whose JSON
serialization is byte-identical across repeats of the same config: keys
are sorted, floats use shortest round-trip repr, and wall-clock timing
is only included when explicitly requested.  Aggregates (mean, min, max,
stderr) are always recomputable from the per-trial records in the same
file.  Trials may run in parallel (FIIDLAB_WORKERS); each trial derives
its own streams from (seed, tag, index), so the record list does not
depend on the worker count.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import Pool

import numpy as np

from . import bounds as bnd
from . import coupling as cpl
from . import orient as ori
from . import stats as st
from .factors import make_factor
from .graphs import enumerate_pairings_array, sample_configuration_model
from .labels import sample_labels
from .rng import derive_rng

SCHEMA = "fiid-lab/1"


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def echo(self) -> dict:
        out = {"subcommand": self.subcommand}
        out.update(self.params)
        return out


@dataclass
class Report:
    config: RunConfig
    records: list
    aggregates: dict
    checks: list
    timing: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        return [c["name"] for c in self.checks if not c["passed"]]

    @property
    def exit_code(self) -> int:
        return 0 if not self.failures else 1

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "config": self.config.echo(),
            "records": self.records,
            "aggregates": self.aggregates,
            "checks": self.checks,
            "failures": self.failures,
            "timing": self.timing,
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def _plain(obj):
    """Recursively convert numpy scalars/arrays so json can emit them."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        v = float(obj)
        if math.isnan(v):
            return None
        return v
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def aggregate_records(records: list[dict], skip=("trial",)) -> dict:
    """Per-field mean/min/max/stderr over the numeric record columns."""
    out: dict = {}
    if not records:
        return out
    keys = sorted(set().union(*(r.keys() for r in records)))
    for key in keys:
        if key in skip:
            continue
        vals = []
        for r in records:
            v = r.get(key)
            if isinstance(v, bool) or not isinstance(
                    v, (int, float, np.integer, np.floating)):
                break
            if v is None or (isinstance(v, float) and math.isnan(v)):
                break
            vals.append(float(v))
        else:
            if vals:
                arr = np.asarray(vals)
                stderr = (float(arr.std(ddof=1) / math.sqrt(len(arr)))
                          if len(arr) > 1 else None)
                out[key] = {"mean": float(arr.mean()),
                            "min": float(arr.min()),
                            "max": float(arr.max()),
                            "stderr": stderr}
    return out


def worker_count() -> int:
    raw = os.environ.get("FIIDLAB_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_trials(fn, args_list):
    w = worker_count()
    if w <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with Pool(w) as pool:
        return pool.map(fn, args_list)


# ---------------------------------------------------------------- trials

def _sim_trial(args) -> dict:
    spec, n, d, seed, t = args
    factor = make_factor(spec, d=d)
    g = sample_configuration_model(n, d, rng=derive_rng(seed, "graph", t))
    labels = sample_labels(n, seed, index=t)
    colours = factor.project(g, labels)
    ps = st.percolation_stats(colours, g)
    rec = {"trial": t, "density": ps.density, "corr": ps.corr,
           "avdeg": ps.avdeg, "ones": ps.ones}
    if ps.component_sizes:
        rec["max_component"] = max(ps.component_sizes)
    deg = st.component_degree_check(colours, g)
    rec["global_avg_inset_degree"] = deg.global_average
    rec["all_components_trees"] = bool(np.all(deg.is_tree))
    return rec


def _profile_trial(args) -> dict:
    spec, n, d, seed, t = args
    factor = make_factor(spec, d=d)
    g = sample_configuration_model(n, d, rng=derive_rng(seed, "graph", t))
    labels = sample_labels(n, seed, index=t)
    colours = factor.project(g, labels)
    prof = st.edge_profile(colours, g, num_colours=factor.num_colours)
    return {"trial": t,
            "counts": prof.counts.tolist(),
            "vertex_counts": prof.vertex_counts.tolist(),
            "functional": st.entropy_functional(prof, d)}


def _interp_trial(args) -> dict:
    spec, n, d, seed, t = args
    factor = make_factor(spec, d=d)
    base = factor.base
    g = sample_configuration_model(n, d, rng=derive_rng(seed, "graph", t))
    labels = sample_labels(n, seed, index=t)
    mixed = st.percolation_stats(factor.project(g, labels), g)
    plain = st.percolation_stats(base.project(g, labels), g)
    ratio = mixed.density / plain.density if plain.density else math.nan
    return {"trial": t, "density": mixed.density, "corr": mixed.corr,
            "base_density": plain.density, "density_factor": ratio}


def _orient_trial(args) -> dict:
    n, d, seed, t = args
    g = sample_configuration_model(n, d, rng=derive_rng(seed, "graph", t))
    run_seed = int(derive_rng(seed, "orient-run", t).integers(2**62))
    try:
        o = ori.orient_no_source_sink(g, run_seed)
    except ori.PeelFailure as e:
        return {"trial": t, "peeled": False, "failed_layer": e.layer}
    cert = o.certify()
    return {"trial": t, "peeled": True,
            "sources": len(cert["sources"]), "sinks": len(cert["sinks"]),
            "restarts": o.peel.restarts, "cycles": len(o.peel.cycles)}


# ---------------------------------------------------------------- runners

def _need(cfg: RunConfig, *names):
    for name in names:
        if cfg.get(name) is None:
            raise UsageError(name, "required for this subcommand")


class UsageError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"--{fieldname.replace('_', '-')}: {message}")
        self.fieldname = fieldname


def _make_factor(cfg: RunConfig):
    try:
        return make_factor(cfg.get("factor"), d=cfg.get("d"))
    except ValueError as e:
        raise UsageError("factor", str(e)) from e


def _need_even_nd(cfg: RunConfig):
    n, d = cfg.get("n"), cfg.get("d")
    if n * d % 2:
        raise UsageError("n", f"no {d}-regular pairing on {n} vertices, "
                              "n*d must be even")


def run_gen_graph(cfg: RunConfig) -> Report:
    _need(cfg, "n", "d", "seed")
    _need_even_nd(cfg)
    n, d, seed = cfg.get("n"), cfg.get("d"), cfg.get("seed")
    trials = cfg.get("trials", 1)
    records = []
    texts = []
    for t in range(trials):
        g = sample_configuration_model(n, d,
                                       rng=derive_rng(seed, "graph", t))
        rec = {"trial": t, "loops": g.loop_count()}
        records.append(rec)
        texts.append(g.to_text())
    extra = {}
    if n * d * trials <= 200_000:
        extra["graphs"] = texts
    return Report(cfg, records, aggregate_records(records), [], extra=extra)


def run_simulate(cfg: RunConfig) -> Report:
    _need(cfg, "factor", "n", "d", "seed")
    _need_even_nd(cfg)
    _make_factor(cfg)  # validate the spec before spawning workers
    trials = cfg.get("trials", 1)
    args = [(cfg.get("factor"), cfg.get("n"), cfg.get("d"),
             cfg.get("seed"), t) for t in range(trials)]
    records = _map_trials(_sim_trial, args)
    return Report(cfg, records, aggregate_records(records), [])


def run_profile(cfg: RunConfig) -> Report:
    _need(cfg, "factor", "n", "d", "seed")
    _need_even_nd(cfg)
    factor = _make_factor(cfg)
    trials = cfg.get("trials", 1)
    args = [(cfg.get("factor"), cfg.get("n"), cfg.get("d"),
             cfg.get("seed"), t) for t in range(trials)]
    records = _map_trials(_profile_trial, args)
    pooled = np.sum([r["counts"] for r in records], axis=0)
    pooled_v = np.sum([r["vertex_counts"] for r in records], axis=0)
    prof = st.EdgeProfile.from_counts(pooled, pooled_v,
                                      n=cfg.get("n") * trials,
                                      d=cfg.get("d"))
    extra = {"pooled_profile": {"P": prof.P.tolist(),
                                "pi": prof.pi.tolist(),
                                "csv": prof.to_csv()},
             "factor": factor.spec_string()}
    return Report(cfg, records, aggregate_records(records), [], extra=extra)


def run_entropy_check(cfg: RunConfig) -> Report:
    _need(cfg, "factor", "n", "d", "seed")
    _need_even_nd(cfg)
    factor = _make_factor(cfg)
    trials = cfg.get("trials", 1)
    tol = cfg.get("tol", 0.01)
    res = st.entropy_check(factor, cfg.get("d"), cfg.get("n"),
                           trials, cfg.get("seed"))
    records = [{"trial": t, "functional": v}
               for t, v in enumerate(res.values)]
    checks = [{"name": "entropy-functional-min",
               "passed": bool(res.min_value >= -tol),
               "detail": {"min": res.min_value, "tolerance": tol}}]
    return Report(cfg, records, aggregate_records(records), checks)


def run_bound(cfg: RunConfig) -> Report:
    _need(cfg, "c", "d")
    if cfg.get("d") < 3:
        raise UsageError("d", "density bound needs d >= 3")
    if cfg.get("eps", 0.0) < 0:
        raise UsageError("eps", "slack must be nonnegative")
    try:
        rep = bnd.bound_report(cfg.get("c"), cfg.get("d"),
                               eps=cfg.get("eps", 0.0),
                               rho=cfg.get("rho"))
    except ValueError as e:
        raise UsageError("c", str(e)) from e
    records = [rep.to_dict()]
    return Report(cfg, records, {}, [])


def run_interpolate(cfg: RunConfig) -> Report:
    _need(cfg, "c", "p")
    c, p = cfg.get("c"), cfg.get("p")
    try:
        x, factor_target = bnd.interpolation_params(c, p)
    except ValueError as e:
        raise UsageError("c", str(e)) from e
    extra = {"x": x, "density_factor_target": factor_target,
             "corr_target": c}
    if cfg.get("n") is None:
        return Report(cfg, [], {}, [], extra=extra)
    _need(cfg, "factor", "d", "seed")
    _need_even_nd(cfg)
    base_spec = cfg.get("factor")
    if ":" in base_spec:
        bname, bbody = base_spec.split(":", 1)
        base_spec = f"{bname}({bbody})"
    spec = f"interpolate:c={c},p={p},base={base_spec}"
    try:
        make_factor(spec, d=cfg.get("d"))
    except ValueError as e:
        raise UsageError("factor", str(e)) from e
    trials = cfg.get("trials", 1)
    args = [(spec, cfg.get("n"), cfg.get("d"), cfg.get("seed"), t)
            for t in range(trials)]
    records = _map_trials(_interp_trial, args)
    aggs = aggregate_records(records)
    dens_tol = cfg.get("density_tol", 0.1)
    corr_tol = cfg.get("corr_tol", 0.05)
    mean_factor = aggs["density_factor"]["mean"]
    mean_corr = aggs["corr"]["mean"]
    checks = [
        {"name": "density-factor",
         "passed": bool(abs(mean_factor - factor_target) <= dens_tol),
         "detail": {"measured": mean_factor, "target": factor_target,
                    "tolerance": dens_tol}},
        {"name": "correlation-ratio",
         "passed": bool(abs(mean_corr - c) <= corr_tol),
         "detail": {"measured": mean_corr, "target": c,
                    "tolerance": corr_tol}},
    ]
    return Report(cfg, records, aggs, checks, extra=extra)


def run_couple(cfg: RunConfig) -> Report:
    _need(cfg, "factor", "n", "d", "seed", "p", "k")
    _need_even_nd(cfg)
    factor = _make_factor(cfg)
    n, d, seed = cfg.get("n"), cfg.get("d"), cfg.get("seed")
    p, k = cfg.get("p"), cfg.get("k")
    if not 0.0 <= p <= 1.0:
        raise UsageError("p", "resampling density must lie in [0, 1]")
    if not 1 <= k <= 8:
        raise UsageError("k", "copy count must lie in 1..8")
    g = sample_configuration_model(n, d, rng=derive_rng(seed, "graph", 0))
    ens = cpl.sample_ensemble(factor, g, p, k, seed)
    inter = cpl.intersection_densities(ens)
    wp = cpl.word_profile(ens)
    beta_by_size = _popcount_means(wp.pi, k)
    beta = cpl.exchangeable_beta(beta_by_size[1:], k)
    lhs, rhs = cpl.lemma_identity_check(beta, k)
    u_list = cfg.get("u_list") or [1, 2, 3]
    stab = cpl.stability_moments(factor, g, p, u_list,
                                 trials=cfg.get("trials", 6),
                                 seed=seed, m=cfg.get("m", 48))
    checks = [
        {"name": "alpha-monotone",
         "passed": bool(np.all(np.diff(inter.raw) <= 1e-12)),
         "detail": {"alpha_raw": inter.raw.tolist()}},
        {"name": "inclusion-exclusion-identity",
         "passed": bool(abs(lhs - rhs) <= 1e-10),
         "detail": {"lhs": lhs, "rhs": rhs}},
    ]
    record = {"p": p, "k": k,
              "alpha_raw": inter.raw.tolist(),
              "alpha_scaled": inter.alphas.tolist(),
              "stability": stab.to_dict(),
              "identity_check": {"lhs": lhs, "rhs": rhs}}
    return Report(cfg, [record], {}, checks)


def _popcount_means(pi: np.ndarray, k: int) -> list[float]:
    """Mean word-marginal mass within each popcount class, sizes 0..k."""
    by_size = [[] for _ in range(k + 1)]
    for word in range(2 ** k):
        by_size[bin(word).count("1")].append(pi[word])
    return [float(np.mean(v)) for v in by_size]


def run_orient(cfg: RunConfig) -> Report:
    _need(cfg, "n", "d", "seed")
    _need_even_nd(cfg)
    if cfg.get("d") < 3:
        raise UsageError("d", "orientation needs d >= 3")
    trials = cfg.get("trials", 1)
    args = [(cfg.get("n"), cfg.get("d"), cfg.get("seed"), t)
            for t in range(trials)]
    records = _map_trials(_orient_trial, args)
    ok = [r for r in records if r["peeled"]]
    certified = all(r["sources"] == 0 and r["sinks"] == 0 for r in ok)
    checks = [{"name": "no-sources-or-sinks",
               "passed": bool(certified),
               "detail": {"certified_runs": len(ok),
                          "total_runs": trials}}]
    min_rate = cfg.get("min_success")
    if min_rate is not None:
        rate = len(ok) / trials
        checks.append({"name": "peel-success-rate",
                       "passed": bool(rate >= min_rate),
                       "detail": {"rate": rate, "threshold": min_rate}})
    return Report(cfg, records, aggregate_records(records), checks)


def orientation_text(cfg: RunConfig) -> str:
    """Edge list 'u v' (one per line, loops as 'v v') for trial 0."""
    n, d, seed = cfg.get("n"), cfg.get("d"), cfg.get("seed")
    g = sample_configuration_model(n, d, rng=derive_rng(seed, "graph", 0))
    run_seed = int(derive_rng(seed, "orient-run", 0).integers(2**62))
    return ori.orient_no_source_sink(g, run_seed).to_text()


MAX_ORACLE_HALF_EDGES = 12


def run_oracle(cfg: RunConfig) -> Report:
    _need(cfg, "n", "d")
    n, d = cfg.get("n"), cfg.get("d")
    q = cfg.get("colours", 2)
    if n * d % 2:
        raise UsageError("n", f"no {d}-regular pairing on {n} vertices, "
                              "n*d must be even")
    if n * d > MAX_ORACLE_HALF_EDGES:
        raise UsageError(
            "n", f"oracle enumerates all pairings and colourings; "
            f"guarded to n*d <= {MAX_ORACLE_HALF_EDGES}")
    if q < 1 or q > 4:
        raise UsageError("colours", "oracle supports 1..4 colours")
    table = enumerate_pairings_array(n * d)
    pairings = [_pairing_pairs(row) for row in table]
    records = []
    all_agree = True
    for vcounts, counts in enumerate_integer_profiles(n, d, q):
        P = counts / (n * d)
        pi = vcounts / n
        exact = bnd.expected_partition_count_exact(P, pi, n, d)
        brute = brute_force_expected_count(counts, vcounts, n, d, table)
        agree = exact == brute
        all_agree = all_agree and agree
        records.append({
            "vertex_counts": vcounts.tolist(),
            "counts": counts.tolist(),
            "expected_formula": exact,
            "expected_brute_force": brute,
            "agree": agree,
        })
    checks = [{"name": "oracle-agreement", "passed": bool(all_agree),
               "detail": {"profiles": len(records),
                          "pairings": len(pairings)}}]
    extra = {"pairings": pairings, "num_pairings": len(pairings)}
    return Report(cfg, records, {}, checks, extra=extra)


def _pairing_pairs(row: np.ndarray) -> list[list[int]]:
    return [[int(h), int(row[h])] for h in range(len(row))
            if h < int(row[h])]


def enumerate_integer_profiles(n: int, d: int, q: int):
    """Yield every (vertex_counts, counts) with integer entries: symmetric
    q x q counts, row i summing to d*vertex_counts[i], even diagonal."""
    for vcounts in _compositions(n, q):
        vc = np.array(vcounts, dtype=np.int64)
        rows = vc * d
        tri = [(i, j) for i in range(q) for j in range(i, q)]

        def fill(idx, mat):
            if idx == len(tri):
                if all(mat[i].sum() == rows[i] for i in range(q)):
                    yield mat.copy()
                return
            i, j = tri[idx]
            # the diagonal entry already counts both directions, so each
            # row marginal is a plain row sum
            cap = rows[i] - mat[i].sum()
            if cap < 0:
                return
            if i == j:
                for v in range(cap // 2 + 1):
                    mat[i, i] = 2 * v
                    yield from fill(idx + 1, mat)
                mat[i, i] = 0
            else:
                top = min(cap, rows[j] - mat[j].sum())
                for v in range(top + 1):
                    mat[i, j] = mat[j, i] = v
                    yield from fill(idx + 1, mat)
                mat[i, j] = mat[j, i] = 0

        for mat in fill(0, np.zeros((q, q), dtype=np.int64)):
            yield vc, mat


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def brute_force_expected_count(counts: np.ndarray, vcounts: np.ndarray,
                               n: int, d: int,
                               table: np.ndarray) -> Fraction:
    """Average over all pairings of the number of colourings whose edge
    counts match exactly; direct enumeration, no closed form."""
    q = len(vcounts)
    hits = 0
    colourings = [np.array(c, dtype=np.int64)
                  for c in itertools.product(range(q), repeat=n)]
    colourings = [c for c in colourings
                  if np.array_equal(np.bincount(c, minlength=q), vcounts)]
    for row in table:
        head = row.astype(np.int64) // d
        for col in colourings:
            tail_col = np.repeat(col, d)
            mat = np.zeros((q, q), dtype=np.int64)
            np.add.at(mat, (tail_col, col[head]), 1)
            if np.array_equal(mat, counts):
                hits += 1
    return Fraction(hits, len(table))


RUNNERS = {
    "gen-graph": run_gen_graph,
    "simulate": run_simulate,
    "profile": run_profile,
    "entropy-check": run_entropy_check,
    "bound": run_bound,
    "interpolate": run_interpolate,
    "couple": run_couple,
    "orient": run_orient,
    "oracle": run_oracle,
}


def run(config: RunConfig) -> Report:
    if config.subcommand not in RUNNERS:
        raise UsageError("subcommand",
                         f"unknown subcommand {config.subcommand!r}")
    want_timing = bool(config.get("timing"))
    t0 = time.perf_counter()
    report = RUNNERS[config.subcommand](config)
    if want_timing:
        report.timing = {"wall_seconds": time.perf_counter() - t0,
                         "workers": worker_count()}
    return report


def records_csv(report: Report) -> str:
    """Flat records as CSV; list-valued fields are JSON-encoded."""
    records = report.records
    if not records:
        return ""
    keys = sorted(set().union(*(r.keys() for r in records)))
    lines = [",".join(keys)]
    for r in records:
        cells = []
        for key in keys:
            v = _plain(r.get(key))
            if isinstance(v, (list, dict)):
                cells.append('"' + json.dumps(v).replace('"', '""') + '"')
            else:
                cells.append("" if v is None else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
