"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both flavours are imported directly, so the backend environment variable does
not matter here. The first numba call (compilation or cache load) is excluded.
"""

import argparse
import timeit

import numpy as np

from distill_equiv import kernels


def cases(rng):
    for K in (10, 1000):
        z_t, z_s = rng.normal(size=K), rng.normal(size=K)
        yield f"kd_grad K={K}", lambda f, a=z_t, b=z_s: f(a, b, 4.0), kernels.kd_grad_numba, kernels.kd_grad_numpy
    Zt, Zs = rng.normal(size=(64, 10)), rng.normal(size=(64, 10))
    yield "kd_grad_rows 64x10", lambda f: f(Zt, Zs, 4.0), kernels.kd_grad_rows_numba, kernels.kd_grad_rows_numpy
    z0, target = rng.uniform(-5, 5, 10), rng.uniform(-5, 5, 10)
    for name, kind in (("kd", kernels.FIELD_KD), ("lm", kernels.FIELD_LM)):
        yield (
            f"descend {name} K=10 x 1e4 steps",
            lambda f, k=kind: f(z0, k, target, 4.0, 10_000, 0.1, 1e12),
            kernels.descend_numba,
            kernels.descend_numpy,
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for label, call, fast, slow in cases(rng):
        call(fast)
        np.testing.assert_allclose(np.asarray(call(fast)[0]), np.asarray(call(slow)[0]), rtol=1e-10, atol=1e-12)
        timer_fast = timeit.Timer(lambda: call(fast))
        timer_slow = timeit.Timer(lambda: call(slow))
        n_fast, _ = timer_fast.autorange()
        n_slow, _ = timer_slow.autorange()
        t_fast = min(timer_fast.repeat(args.repeat, n_fast)) / n_fast
        t_slow = min(timer_slow.repeat(args.repeat, n_slow)) / n_slow
        print(f"{label:<32}{t_fast * 1e6:>10.1f}us{t_slow * 1e6:>10.1f}us{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
