"""Compare the compiled and pure-Python geodesic kernels.

Run with ``python3 benchmarks/bench_kernels.py [--k 32] [--steps 2000]``.
Prints wall time per backend, the speed-up and the largest coordinate
difference between the two backends at ``t = 1``.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from frao import geometry, kernels
from frao.families.spec import FamilySpec

CASES = [
    ("truncated-normal[-2,2]", FamilySpec.truncated_normal(-2.0, 2.0), (0.0, 1.0), 0.5),
    ("truncated-lognormal[0.2,5]", FamilySpec.truncated_lognormal(0.2, 5.0), (0.0, 1.0), 0.5),
    ("gumbel", FamilySpec.gumbel(), (0.0, 1.0), 0.5),
    ("truncated-gumbel[0,3000]", FamilySpec.truncated_gumbel(0.0, 3000.0), (1013.0, 558.0), 0.5),
    ("normal", FamilySpec.normal(), (0.0, 1.0), 1.0),
]


def _run(spec, theta, delta, K, steps, method, backend):
    pt = spec.point(*theta)
    _, vel = geometry.sphere_directions(spec, pt, delta, K)
    th0 = np.repeat(pt.as_array()[None], K, axis=0)
    t0 = time.perf_counter()
    res = kernels.integrate(spec, th0, vel, steps, method, record=[steps], backend=backend)
    return time.perf_counter() - t0, res["pos"][:, 0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--method", choices=["euler", "rk4"], default="euler")
    args = ap.parse_args(argv)
    if not kernels.HAVE_COMPILED:
        print("compiled core not built; only the python backend is available")
    print(f"K={args.k} steps={args.steps} method={args.method}")
    print(f"{'family':30s} {'python s':>10s} {'compiled s':>11s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, spec, theta, delta in CASES:
        tp, pp = _run(spec, theta, delta, args.k, args.steps, args.method, "python")
        if kernels.HAVE_COMPILED and kernels.compiled_covers(spec):
            tc, pc = _run(spec, theta, delta, args.k, args.steps, args.method, "compiled")
            diff = np.nanmax(np.abs(pp - pc))
            print(f"{name:30s} {tp:10.3f} {tc:11.3f} {tp / tc:9.1f} {diff:11.2e}")
        else:
            print(f"{name:30s} {tp:10.3f} {'-':>11s} {'-':>9s} {'-':>11s}")


if __name__ == "__main__":
    main()
