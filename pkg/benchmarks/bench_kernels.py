"""Time the compiled kernels against the numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from sumtest import _kernels_py

try:
    from sumtest import _kernels
except ImportError:  # extension not built
    _kernels = None


def workload(rows=400, k=4, cells=40, seed=0):
    rng = np.random.default_rng(seed)
    occ = np.sort(rng.integers(0, cells, size=(rows, k)), axis=1)
    w = rng.random(rows)
    return occ, w / w.sum(), rng.random(cells), rng.standard_normal(k + 1)


def cases(mod, occ, w, r, v):
    maxmult = np.array([(occ == c).sum(axis=1).max() for c in range(r.size)])
    return {
        "pb_pmf": lambda: mod.pb_pmf(r[:20]),
        "mixture_pb_pmf": lambda: mod.mixture_pb_pmf(occ, w, r),
        "mixture_pb_grad": lambda: mod.mixture_pb_grad(occ, w, r, v),
        "coordinate_sweep": lambda: mod.coordinate_sweep(occ, w, r.copy(), maxmult, 33, 8),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    data = workload()
    py = cases(_kernels_py, *data)
    cy = cases(_kernels, *data) if _kernels else {}
    print(f"{'kernel':<18}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in py.items():
        t_py = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        if name in cy:
            t_cy = min(timeit.repeat(cy[name], number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<18}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>10.1f}")
        else:
            print(f"{name:<18}{t_py:>12.3f}{'n/a':>12}{'':>10}")


if __name__ == "__main__":
    main()
