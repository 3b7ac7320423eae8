"""Time the compiled kernels against their pure-Python fallbacks.

Leaf kernels are timed in-process through ``kernel.py_func``.  The Rips
reduction calls other kernels, so its fallback is timed in a subprocess with
TWISTY_DISABLE_NUMBA=1.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--rips-points 60]
"""
import argparse
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from twisty import _accel, geometry as geo, persistence as ph, slidingwindow as sw

RIPS_SNIPPET = """
import json, sys, time, numpy as np
from twisty import _accel, persistence as ph
X = np.random.default_rng(0).normal(size=({n}, 4))
D = ph.pairwise_distances(X)
ph.rips_persistence(D[:8, :8], 2, 2)  # warm up (compilation when numba is on)
t = time.perf_counter()
for _ in range({repeat}):
    r = ph.rips_persistence(D, 2, 2)
print(json.dumps({{"backend": _accel.backend_name(), "seconds": (time.perf_counter() - t) / {repeat},
                  "pairs": sum(len(d.pairs) for d in r.diagrams)}}))
"""


def best_of(fn, repeat):
    fn()  # warm up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def rips_subprocess(n, repeat, disable):
    env = dict(os.environ)
    env.pop("TWISTY_DISABLE_NUMBA", None)
    if disable:
        env["TWISTY_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", RIPS_SNIPPET.format(n=n, repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rips-points", type=int, default=60)
    args = ap.parse_args(argv)
    if not _accel.USE_NUMBA:
        print("numba is disabled or missing; both columns would time the same code")
        return 1

    rng = np.random.default_rng(1)
    X = rng.normal(size=(600, 30))
    start = np.array([0.1, 0.05])
    step = 0.05 * np.array([1.0, math.sqrt(3) / 2])
    walk = (start, step, 20_000, geo.OCTAGON_NORMALS, geo.OCTAGON_APOTHEM)
    rows = []
    for name, kernel, call_args in [
        ("pairwise distances (600 x 30)", ph._pairwise_kernel, (X,)),
        ("maxmin landmarks (600 -> 100)", sw._maxmin_kernel, (X, 100, 0)),
        ("octagon walk (20000 steps)", geo._octagon_walk, walk),
        ("Klein field RK4 (5000 samples)", geo._klein_rk4_path,
         (np.array([0.0, 0.1]), 5000, 4, 0.0125, 1.0, 0.01, 0.3)),
    ]:
        fast = best_of(lambda: kernel(*call_args), args.repeat)
        slow = best_of(lambda: kernel.py_func(*call_args), 1)
        rows.append((name, fast, slow))
    fast = rips_subprocess(args.rips_points, args.repeat, False)
    slow = rips_subprocess(args.rips_points, 1, True)
    assert fast["pairs"] == slow["pairs"]
    rows.append((f"Rips persistence to H2 ({args.rips_points} points, Z/2)", fast["seconds"], slow["seconds"]))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numba s':>10}  {'python s':>10}  {'speedup':>8}")
    for name, f, s in rows:
        print(f"{name:<{width}}  {f:>10.4f}  {s:>10.4f}  {s / f:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
