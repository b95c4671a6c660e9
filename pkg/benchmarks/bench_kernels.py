"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py
The simulation's per-iteration cost is dominated by the batched affine
oracle; the table shows both backends regardless of BYZVI_BACKEND.
"""

import time

import numpy as np

from byzvi.kernels import (_affine_batch_mean_np, _build_numba, _krum_scores_np,
                           _weiszfeld_np)


def timeit(fn, *args, repeat=2000):
    fn(*args)  # warm-up / jit compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6  # us/call


def main():
    rng = np.random.default_rng(0)
    s, d, batch, n_workers = 1000, 50, 10, 20
    A = rng.normal(size=(s, d, d))
    b = rng.normal(size=(s, d))
    x = rng.normal(size=d)
    idx = rng.integers(0, s, size=batch)
    vs = rng.normal(size=(n_workers, d))

    try:
        nb_affine, nb_weiszfeld, nb_krum = _build_numba()
    except ImportError:
        print("numba not installed; nothing to compare")
        return

    cases = [
        ("affine_batch_mean (s=1000, d=50, b=10)",
         lambda: nb_affine(A, b, idx, x), lambda: _affine_batch_mean_np(A, b, idx, x)),
        ("weiszfeld (20 x 50, 10 iters)",
         lambda: nb_weiszfeld(vs, 10, 0.1), lambda: _weiszfeld_np(vs, 10, 0.1)),
        ("krum_scores (20 x 50, q=4)",
         lambda: nb_krum(vs, 4), lambda: _krum_scores_np(vs, 4)),
    ]

    print(f"{'kernel':45s} {'numba us':>10s} {'numpy us':>10s} {'speedup':>8s}")
    for name, fast, slow in cases:
        t_nb = timeit(fast)
        t_np = timeit(slow)
        print(f"{name:45s} {t_nb:10.2f} {t_np:10.2f} {t_np / t_nb:7.2f}x")


if __name__ == "__main__":
    main()
