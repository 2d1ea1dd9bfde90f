"""Benchmark the JIT kernels against the pure-numpy fallback.

Runs the two hot paths -- the exhaustive grid scans and the projected
gradient ascent -- through both kernel sets in one process and reports
wall-clock times side by side.  The numbers justify keeping the compiled
path as the default while the fallback guards portability.

Usage::

    python benchmarks/bench_kernels.py [--resolution 400] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from meanlcb import _kernels
from meanlcb.lattice import enumerate_sample_space, normalize_support
from meanlcb.likelihood import build_subset_likelihood


def _problem():
    """A mid-size three-value instance: upper half of the mean order."""
    space = enumerate_sample_space(normalize_support([0, 1, 3]), 5)
    means = space.sample_means()
    ids = [int(i) for i in np.argsort(means)[space.size // 2:]]
    poly = build_subset_likelihood(space, ids)
    s = space.support.as_array()
    return poly, s


def _time(fn, repeat: int) -> float:
    fn()  # warm-up: triggers JIT compilation on the numba path
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resolution", type=int, default=400,
                        help="grid resolution for the scan benchmarks")
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions (best is reported)")
    args = parser.parse_args()

    poly, s = _problem()
    kargs = poly.kernel_args()
    p0 = np.array([0.4, 0.35, 0.25])
    kernel_sets = [_kernels.numpy_kernels]
    if _kernels.HAS_NUMBA:
        kernel_sets.append(_kernels.numba_kernels)
    else:
        print("numba is not importable; benchmarking the fallback only")

    cases = {
        "grid_min_mean": lambda ks: ks.grid_min_mean(
            args.resolution, *kargs, s, 0.35),
        "grid_max_lik": lambda ks: ks.grid_max_lik(
            args.resolution, *kargs, s, 1.2),
        "ascend": lambda ks: ks.ascend(
            p0.copy(), *kargs, s, 1.2, np.inf, 10_000),
    }

    d = args.resolution
    print(f"resolution d={d} "
          f"({(d + 1) * (d + 2) // 2} grid cells), best of {args.repeat}")
    header = f"{'kernel':<22}" + "".join(f"{ks.name:>12}" for ks in kernel_sets)
    if len(kernel_sets) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, call in cases.items():
        times = [_time(lambda ks=ks: call(ks), args.repeat) for ks in kernel_sets]
        row = f"{label:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
