"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Prints one row per kernel with the best-of-``repeat`` wall time of each
backend, the speedup and the largest relative difference between outputs.
"""
import argparse
import time

import numpy as np

from laguerre import _kernels, _pykernels


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _first(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def cases(scale):
    n = max(1, int(scale * 2000))
    z = np.linspace(0.0, 30.0, max(1, int(scale * 20000)))
    b0 = np.array([[1.0, 0.0], [0.0, 0.7], [0.0, 0.0]], dtype=complex)
    return {
        "counter_normals": lambda k: k.counter_normals(1, 0, np.arange(50 * n, dtype=np.uint64), 3, 1, 4),
        "pfq_series 1F1": lambda k: k.pfq_series([0.7], [1.9], z),
        "bessel_i_series": lambda k: k.bessel_i_series(1.5, z),
        "struve_l_series": lambda k: k.struve_l_series(0.5, z),
        "eigen_paths m=3": lambda k: k.eigen_paths(np.array([3.0, 2.0, 1.0]), 3.0, 1.0, 200, 1, 0, 0, n),
        "gram_paths n=3 m=2": lambda k: k.gram_paths(b0, 0.01, 100, 1, 0, 0, n),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies every problem size")
    args = ap.parse_args()
    if _kernels.compiled_backend is None:
        raise SystemExit("compiled extension not available; build it with pip install -e .")
    print(f"{'kernel':<22}{'compiled s':>12}{'python s':>12}{'speedup':>10}{'max rel diff':>14}")
    for name, fn in cases(args.scale).items():
        tc, oc = _best(lambda: fn(_kernels.compiled_backend), args.repeat)
        tp, op = _best(lambda: fn(_pykernels), args.repeat)
        a, b = _first(oc), _first(op)
        diff = float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{diff:>14.3g}")


if __name__ == "__main__":
    main()
