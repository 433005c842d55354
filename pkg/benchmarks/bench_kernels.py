"""Compare the compiled and numpy geometry kernels.

Times each kernel on the point counts the simulator uses, then times
check_insertion end to end under both backends (in subprocesses, since the
backend is chosen at import).

    python3 benchmarks/bench_kernels.py [--repeat 200]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tactile_insertion import _kernels_py

try:
    from tactile_insertion import _kernels
except ImportError:
    _kernels = None

END_TO_END = """
import time, numpy as np
from tactile_insertion import kernels
from tactile_insertion.geometry import EnvironmentSpec, EnvKind, PoseError, check_insertion
from tactile_insertion.objects import make_object
rng = np.random.default_rng(0)
objs = [make_object(n) for n in ("cylinder", "hexagon", "ellipse", "cuboid")]
cases = [(o, PoseError(*rng.uniform(-6, 6, 2), rng.uniform(-10, 10))) for o in objs for _ in range({n})]
t = time.perf_counter()
for o, p in cases:
    check_insertion(o.shape, p, EnvironmentSpec(EnvKind.HOLE, o.shape, 3.0))
print(kernels.BACKEND, (time.perf_counter() - t) / len(cases))
"""


def kernel_cases(rng):
    square = np.array([[-17.5, -17.5], [17.5, -17.5], [17.5, 17.5], [-17.5, 17.5]])
    hexagon = 18.0 * np.c_[np.cos(np.arange(6) * np.pi / 3), np.sin(np.arange(6) * np.pi / 3)]
    for n in (256, 4096):
        pts = rng.uniform(-25, 25, (n, 2))
        yield f"polygon 4 verts, {n} pts", "polygon_signed_distance", (pts, square)
        yield f"polygon 6 verts, {n} pts", "polygon_signed_distance", (pts, hexagon)
        yield f"ellipse 21x13, {n} pts", "ellipse_signed_distance", (pts, 21.0, 13.0)


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=repeat, repeat=3)) / repeat


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--cases", type=int, default=250, help="end-to-end poses per object")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy us':>10s} {'cython us':>10s} {'speedup':>8s}")
    for label, name, kargs in kernel_cases(rng):
        t_py = bench(getattr(_kernels_py, name), kargs, args.repeat)
        if _kernels is None:
            print(f"{label:32s} {1e6 * t_py:10.1f} {'n/a':>10s}")
            continue
        t_cy = bench(getattr(_kernels, name), kargs, args.repeat)
        print(f"{label:32s} {1e6 * t_py:10.1f} {1e6 * t_cy:10.1f} {t_py / t_cy:7.1f}x")

    print()
    for pure in ("1", "0"):
        env = dict(os.environ, TACTILE_INSERTION_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(n=args.cases)], env=env, capture_output=True, text=True, check=True)
        backend, per_call = out.stdout.split()
        print(f"check_insertion ({backend}): {1e6 * float(per_call):.1f} us per call")


if __name__ == "__main__":
    main()
