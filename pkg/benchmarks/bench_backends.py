#!/usr/bin/env python3
"""Benchmark the numba kernel build against the pure-numpy fallback.

Times the individual step kernels across dimensions and one end-to-end
momentum-adaptive run on a concave quadratic, per backend.  Run after
installing the package:

    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --dims 16,1024 --repeats 3
"""

import argparse
import time

import numpy as np

from advopt import backend
from advopt.core import FeasibleBox, GeometricMomentum, HyperParams, InvSqrtStep
from advopt.optimizers import make_method, run_attack
from advopt.oracles import ConcaveQuadratic


def time_call(fn, inner, repeats):
    """Best-of-repeats wall time of `inner` calls to fn, in seconds."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, time.perf_counter() - start)
    return best


def kernel_cases(kernels, dim, rng):
    x = rng.uniform(0.2, 0.8, dim)
    g = rng.standard_normal(dim)
    grad = rng.standard_normal(dim)
    v = rng.uniform(0.0, 1.0, dim)
    lo = np.full(dim, 0.0)
    hi = np.full(dim, 1.0)
    out = np.empty(dim)
    return {
        "clamp": lambda: kernels.clamp(x, lo, hi),
        "sign_step": lambda: kernels.sign_step(x, g, 1e-6, lo, hi),
        "adaptive_step": lambda: kernels.adaptive_step(x, g, v, 1e-6, 1e-20, lo, hi),
        "ema_square": lambda: kernels.ema_square(v, g, 0.9),
        "momentum": lambda: kernels.momentum(g, grad, 0.9, 0.05),
        "sign_ratio": lambda: kernels.sign_ratio(g, 1e-20, out),
        "l1_norm": lambda: kernels.l1_norm(g),
    }


def bench_kernels(dims, inner, repeats):
    names = backend.available_backends()
    print(f"\nkernel micro-benchmarks ({inner} calls, best of {repeats}; microseconds/call)")
    header = f"{'kernel':<14}{'dim':>7}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for dim in dims:
        rng = np.random.default_rng(0)
        cases = {n: kernel_cases(backend.get_kernels(n), dim, rng) for n in names}
        for kernel in cases[names[0]]:
            cases[names[0]][kernel]()  # trigger any jit compile outside the timing
            times = {n: time_call(cases[n][kernel], inner, repeats) / inner * 1e6
                     for n in names}
            ratio = times.get("numpy", float("nan")) / times.get("numba", float("nan")) \
                if len(names) > 1 else float("nan")
            cols = "".join(f"{times[n]:>12.3f}" for n in names)
            print(f"{kernel:<14}{dim:>7}{cols}{ratio:>9.1f}x")


def bench_run(dims, steps, repeats):
    names = backend.available_backends()
    print(f"\nend-to-end momentum-adaptive run on a concave quadratic "
          f"({steps} steps, best of {repeats}; milliseconds/run)")
    header = f"{'dim':>7}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    active = backend.backend_name()
    try:
        for dim in dims:
            rng = np.random.default_rng(1)
            oracle = ConcaveQuadratic.random(rng, dim)
            box = FeasibleBox(np.zeros(dim), 1.0, -1.5, 1.5)
            hyper = HyperParams(step=InvSqrtStep(0.5),
                                momentum=GeometricMomentum(1.0, 0.999),
                                beta=0.9, delta=1e-20, steps=steps)
            times = {}
            for name in names:
                backend.use(name)
                method = make_method("adami", hyper)
                runner = lambda: run_attack(method, oracle, box, steps,  # noqa: E731
                                            np.random.default_rng(0), record_loss=False)
                runner()  # warm up (jit compile, caches)
                times[name] = time_call(runner, 1, repeats) * 1e3
            ratio = times.get("numpy", float("nan")) / times.get("numba", float("nan")) \
                if len(names) > 1 else float("nan")
            cols = "".join(f"{times[n]:>12.2f}" for n in names)
            print(f"{dim:>7}{cols}{ratio:>9.1f}x")
    finally:
        backend.use(active)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", default="16,128,1024,8192",
                        help="comma-separated vector dimensions")
    parser.add_argument("--inner", type=int, default=20000, help="kernel calls per timing")
    parser.add_argument("--steps", type=int, default=2000, help="steps of the end-to-end run")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    dims = [int(v) for v in args.dims.split(",")]
    print(f"backends available: {', '.join(backend.available_backends())}")
    bench_kernels(dims, args.inner, args.repeats)
    bench_run(dims, args.steps, args.repeats)


if __name__ == "__main__":
    main()
