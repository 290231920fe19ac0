"""Compare the compiled and NumPy kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per kernel and backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from rqmc_sqn import _kernels_py

try:
    from rqmc_sqn import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def workloads(rng):
    dirs = rng.integers(0, 2**32, size=(20, 32), dtype=np.uint64).astype(np.uint32)
    shift = rng.integers(0, 2**32, size=20, dtype=np.uint64).astype(np.uint32)
    cols = rng.integers(0, 2**32, size=(20, 32), dtype=np.uint64).astype(np.uint32)
    u = rng.uniform(size=(1024, 20))
    return {
        "sobol_block 128x20": lambda k: k.sobol_block(dirs, shift, 0, 128),
        "sobol_block 8192x20": lambda k: k.sobol_block(dirs, shift, 0, 8192),
        "lms_scramble 20 dims": lambda k: k.lms_scramble(dirs, cols),
        "inv_normal_cdf 1024x20": lambda k: k.inv_normal_cdf(u),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the NumPy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>10}")
    for name, fn in workloads(rng).items():
        def best(mod):
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            return min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number * 1e3

        py = best(_kernels_py)
        if _compiled is None:
            print(f"{name:<26}{py:>12.4f}{'-':>13}{'-':>10}")
        else:
            cy = best(_compiled)
            print(f"{name:<26}{py:>12.4f}{cy:>13.4f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
