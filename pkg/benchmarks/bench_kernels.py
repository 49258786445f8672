"""Compare the compiled kernels against the pure-Python fallback.

Both backends implement identical semantics, so every timing pair first
checks bitwise agreement on its workload, then reports per-call wall time
and the speedup.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import math
import time

import numpy as np

from navvlm import _purepy

try:
    from navvlm import _kernels
except ImportError:
    _kernels = None


def bench(fn, *args, repeats: int) -> float:
    """Best-of-N wall time of fn(*args) in seconds."""
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def fmm_workload(size: int, seed: int):
    rng = np.random.default_rng(seed)
    traversable = (rng.random((size, size)) >= 0.2).astype(np.uint8)
    ys, xs = np.nonzero(traversable)
    seeds = np.array([[int(xs[0]), int(ys[0])]], dtype=np.int64)
    return traversable, seeds, 0.05


def raycast_workload(size: int, seed: int, n_rays: int):
    rng = np.random.default_rng(seed)
    obstacles = (rng.random((size, size)) < 0.2).astype(np.uint8)
    cx = cy = size * 0.05 / 2
    obstacles[int(cy / 0.05), int(cx / 0.05)] = 0
    bearings = np.radians(np.linspace(-45.0, 45.0, n_rays))
    return (obstacles, cx, cy, np.cos(bearings), np.sin(bearings), 5.0, 0.05)


def integrate_workload(size: int, seed: int, n_rays: int):
    obstacles, cx, cy, dx, dy, max_range, h = raycast_workload(size, seed, n_rays)
    ranges, hits = _purepy.raycast(obstacles, cx, cy, dx, dy, max_range, h)
    cells = np.zeros((size, size), dtype=np.uint8)
    return cells, cx, cy, dx, dy, ranges, hits, h, 1, 2


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats; best is reported")
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not built; showing pure-Python times only")

    rows = []

    def compare(name, pure_args, compiled_args, check):
        pure_s = bench(getattr(_purepy, name.split()[0]), *pure_args,
                       repeats=args.repeats)
        if _kernels is None:
            rows.append((name, pure_s, None))
            return
        compiled_s = bench(getattr(_kernels, name.split()[0]), *compiled_args,
                           repeats=args.repeats)
        check(pure_args, compiled_args)
        rows.append((name, pure_s, compiled_s))

    def check_fmm(pure_args, compiled_args):
        a = _purepy.fmm(*pure_args)
        b = _kernels.fmm(*compiled_args)
        assert np.array_equal(a, b), "fmm backends disagree"

    def check_raycast(pure_args, compiled_args):
        ra, ha = _purepy.raycast(*pure_args)
        rb, hb = _kernels.raycast(*compiled_args)
        assert np.array_equal(ra, rb) and np.array_equal(ha, hb), \
            "raycast backends disagree"

    def check_integrate(pure_args, compiled_args):
        a = np.array(pure_args[0], copy=True)
        b = np.array(compiled_args[0], copy=True)
        _purepy.integrate(a, *pure_args[1:])
        _kernels.integrate(b, *compiled_args[1:])
        assert np.array_equal(a, b), "integrate backends disagree"

    for size in (64, 128, 256):
        w = fmm_workload(size, seed=7)
        compare(f"fmm {size}x{size}", w, w, check_fmm)
    for n_rays in (120, 480):
        w = raycast_workload(128, seed=7, n_rays=n_rays)
        compare(f"raycast 128x128 {n_rays} rays", w, w, check_raycast)
    w = integrate_workload(128, seed=7, n_rays=120)
    compare("integrate 128x128 120 rays", w, w, check_integrate)

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'pure (ms)':>10}  {'compiled (ms)':>13}  {'speedup':>8}")
    for name, pure_s, compiled_s in rows:
        if compiled_s is None:
            print(f"{name:<{width}}  {pure_s * 1e3:>10.3f}  {'-':>13}  {'-':>8}")
        else:
            print(f"{name:<{width}}  {pure_s * 1e3:>10.3f}  "
                  f"{compiled_s * 1e3:>13.3f}  {pure_s / compiled_s:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
