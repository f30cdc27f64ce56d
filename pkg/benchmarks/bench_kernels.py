"""Compare the compiled and pure-Python kernels on LSAP and canonical factorization.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the numbers do not depend on
ALIGNKIT_PURE_PYTHON.
"""
import argparse
import timeit

import numpy as np

from alignkit import _kernels_py

try:
    from alignkit import _kernels as _compiled
except ImportError:
    _compiled = None


def lsap_cases(rng, size, count):
    return [np.ascontiguousarray(-np.log(rng.dirichlet(np.ones(size), size=size) + 1e-9)) for _ in range(count)]


def alignment_cases(rng, size, count):
    cases = []
    for _ in range(count):
        A = (rng.random((size, size)) < 2.0 / size).astype(np.uint8)
        A[A.sum(axis=1) == 0, rng.integers(size)] = 1
        cases.append(A)
    return cases


def best_time(fn, cases, repeat):
    return min(timeit.repeat(lambda: [fn(c) for c in cases], number=1, repeat=repeat)) / len(cases)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 64, 128])
    args = parser.parse_args()

    backends = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled else [])
    if _compiled is None:
        print("compiled extension not built; timing the pure-Python kernels only")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<18}{'L':>5}" + "".join(f"{name + ' us':>14}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kernel, make in (("lsap", lsap_cases), ("canonical_factors", alignment_cases)):
        for size in args.sizes:
            cases = make(rng, size, args.count)
            times = [best_time(getattr(mod, kernel), cases, args.repeat) * 1e6 for _, mod in backends]
            row = f"{kernel:<18}{size:>5}" + "".join(f"{t:>14.1f}" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
