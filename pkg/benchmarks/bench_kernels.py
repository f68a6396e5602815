"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

The first numba call of each kernel is timed separately (JIT compile).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from pseudotile import kernels
from pseudotile.generators import chair_window


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng):
    mask = rng.random((1024, 1024)) < 0.01
    pts = rng.uniform(0, 10, size=(1_000_000, 2))
    A = np.array([[0.5, 0.0], [0.0, 0.5]])
    b = np.array([0.25, 0.25])
    lo = rng.uniform(0, 60, size=(20_000, 2))
    hi = lo + rng.uniform(0.1, 1.0, size=lo.shape)
    w = chair_window(6)
    blo, bhi, owner = w.patch.flat_boxes
    index = kernels.BoxIndex(blo, bhi, owner, w.metrics[0])
    probe = w.center + rng.uniform(-w.radius, w.radius, size=(500_000, 2)) * 0.7

    def edt(be):
        return lambda: kernels.edt(mask, backend=be)

    def scatter(be):
        def run():
            out = np.zeros((1024, 1024), dtype=np.int32)
            kernels.scatter_affine(pts, A, b, np.zeros(2), 10 / 1024, out, backend=be)
        return run

    def cover(be):
        def run():
            counts = np.zeros((1024, 1024), dtype=np.int32)
            kernels.box_cover_count(lo, hi, np.zeros(2), 62 / 1024, counts, backend=be)
        return run

    def locate(be):
        return lambda: index.locate(probe, backend=be)

    return {"edt 1024^2": edt, "scatter_affine 1e6 pts": scatter,
            "box_cover_count 2e4 boxes": cover, "locate_points 5e5 pts": locate}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"{'kernel':28s} {'backend':8s} {'first (s)':>10s} {'best (s)':>10s}")
    for name, make in cases(rng).items():
        for be in backends:
            fn = make(be)
            t0 = time.perf_counter()
            fn()
            first = time.perf_counter() - t0
            best = _time(fn, a.repeat)
            print(f"{name:28s} {be:8s} {first:10.4f} {best:10.4f}")


if __name__ == "__main__":
    main()
