"""Timing comparison of the compiled kernels against the pure fallback.

Run as a script:

    python3 benchmarks/bench_kernels.py --n 100000 --d 3 --repeat 5

Both backends are imported directly (ignoring FIIDLAB_PURE) so one
process can time them side by side and confirm agreement.
"""

import argparse
import time

import numpy as np

from fiidlab import _fallback
from fiidlab.factors import make_factor
from fiidlab.graphs import sample_configuration_model
from fiidlab.labels import sample_labels

try:
    from fiidlab import _speedups
except ImportError:
    _speedups = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    g = sample_configuration_model(args.n, args.d, seed=args.seed)
    labels = sample_labels(args.n, args.seed)
    in_set = make_factor("bernoulli:p=0.3").project(g, labels) == 1

    jobs = [
        ("tree_ball_flags r=1",
         lambda impl: impl.tree_ball_flags(g.head, g.n, g.d, 1)),
        ("tree_ball_flags r=2",
         lambda impl: impl.tree_ball_flags(g.head, g.n, g.d, 2)),
        ("cycle_counts lmax=4",
         lambda impl: impl.cycle_counts(g.head, g.pairing, g.n, g.d, 4)),
        ("inset_components",
         lambda impl: impl.inset_components(g.head, in_set, g.n, g.d)),
    ]

    print(f"n={args.n} d={args.d} repeat={args.repeat} "
          f"(best-of timings, seconds)")
    header = f"{'kernel':<24} {'pure':>10} {'compiled':>10} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, job in jobs:
        pure_out = job(_fallback)
        t_pure = best_of(lambda: job(_fallback), args.repeat)
        if _speedups is None:
            print(f"{name:<24} {t_pure:>10.4f} {'n/a':>10} {'n/a':>9}")
            continue
        fast_out = job(_speedups)
        if not np.array_equal(np.asarray(pure_out), np.asarray(fast_out)):
            raise SystemExit(f"backend disagreement in {name}")
        t_fast = best_of(lambda: job(_speedups), args.repeat)
        print(f"{name:<24} {t_pure:>10.4f} {t_fast:>10.4f} "
              f"{t_pure / t_fast:>8.1f}x")
    if _speedups is None:
        print("compiled backend not importable; showing fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
