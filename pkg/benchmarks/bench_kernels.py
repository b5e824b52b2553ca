"""Compare the numpy and numba kernel bodies on solver-shaped workloads.

Each kernel is timed on both bodies in one process (the module keeps the
``_np`` and ``_nb`` functions around regardless of the active binding), so
the numbers are directly comparable and the run doubles as a consistency
check between the two implementations.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--seed S]
"""

import argparse
import time

import numpy as np

from idvoi import _kernels as kernels

CASES = [
    ("pair_sum_reduce", (65536, 4)),
    ("pair_sum_reduce", (16384, 32)),
    ("pair_max_reduce", (65536, 4)),
    ("pair_max_reduce", (16384, 32)),
    ("pair_divide", (1 << 20,)),
]


def make_args(rng, name, shape):
    if name == "pair_divide":
        n = shape[0]
        phi_den = rng.random(n) + 0.1
        return (rng.random(n), rng.random(n), phi_den, rng.random(n))
    k, r = shape
    return (
        np.ascontiguousarray(rng.random((k, r))),
        np.ascontiguousarray(rng.random((k, r))),
    )


def best_time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def check_agreement(out_np, out_nb):
    for a, b in zip(out_np, out_nb):
        if isinstance(a, np.ndarray):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
        else:
            assert abs(float(a) - float(b)) <= 1e-12


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"numba available: {kernels._HAVE_NUMBA}; active binding: "
          f"{'numba' if kernels.USE_NUMBA else 'numpy'} (IDVOI_NUMBA)")
    header = f"{'kernel':<18} {'shape':<14} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, shape in CASES:
        call_args = make_args(rng, name, shape)
        np_fn = getattr(kernels, f"{name}_np")
        t_np = best_time(np_fn, call_args, args.repeats)
        if kernels._HAVE_NUMBA:
            nb_fn = getattr(kernels, f"{name}_nb")
            out_nb = nb_fn(*call_args)  # first call compiles
            check_agreement(np_fn(*call_args), out_nb)
            t_nb = best_time(nb_fn, call_args, args.repeats)
            ratio = f"{t_np / t_nb:7.2f}x"
            nb_ms = f"{t_nb * 1e3:10.3f}"
        else:
            nb_ms = f"{'n/a':>10}"
            ratio = f"{'n/a':>8}"
        print(f"{name:<18} {str(shape):<14} {t_np * 1e3:10.3f} {nb_ms} {ratio}")


if __name__ == "__main__":
    main()
