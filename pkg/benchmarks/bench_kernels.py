"""Timing comparison of the compiled kernel extension against the
pure-numpy fallback, across the routines that dominate a guided run.

Usage: python benchmarks/bench_kernels.py [--size 256] [--atoms 64] [--repeat 200]
"""

import argparse
import time

import numpy as np

from ttpo._kernels import pure

try:
    from ttpo._kernels import _core as compiled
except ImportError:
    compiled = None


def timeit(fn, repeat):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--atoms", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.size
    delta = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x_spec = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w = rng.uniform(0, 1, (n, n))
    field = rng.standard_normal((n, n))

    k, dim = args.atoms, n * n
    x_flat = rng.standard_normal(dim)
    centers = rng.standard_normal((k, dim))
    logit_const = rng.standard_normal(k)
    inv2var = rng.uniform(0.1, 2.0, k)
    base = rng.standard_normal((k, dim))
    gain = rng.uniform(0, 1, k)

    cases = [
        ("masked_l1", lambda impl: impl.masked_l1(delta, w)),
        ("masked_sq", lambda impl: impl.masked_sq(delta, w)),
        ("masked_dot", lambda impl: impl.masked_dot(x_spec, delta, w)),
        ("posterior_mix", lambda impl: impl.posterior_mix(
            x_flat, centers, logit_const, inv2var, base, gain)),
        ("tv_sum", lambda impl: impl.tv_sum(field)),
    ]

    print(f"grid {n}x{n}, {k} mixture components, {args.repeat} repeats")
    header = f"{'kernel':<15}{'pure (ms)':>12}{'compiled (ms)':>15}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_pure = timeit(lambda: call(pure), args.repeat) * 1e3
        if compiled is None:
            print(f"{name:<15}{t_pure:>12.3f}{'n/a':>15}{'n/a':>10}")
            continue
        t_comp = timeit(lambda: call(compiled), args.repeat) * 1e3
        print(f"{name:<15}{t_pure:>12.3f}{t_comp:>15.3f}{t_pure / t_comp:>9.1f}x")
    if compiled is None:
        print("\ncompiled extension not built; showing the fallback only")


if __name__ == "__main__":
    main()
