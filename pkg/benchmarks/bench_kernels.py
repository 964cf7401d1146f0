"""Benchmark the compiled kernels against the numpy fallbacks.

Run with: python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from roadcalib import kernels


def _time(fn, repeat: int = 5) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_render(n_points: int = 200_000, height: int = 480, width: int = 640) -> None:
    rng = np.random.default_rng(0)
    us = rng.integers(0, width, n_points)
    vs = rng.integers(0, height, n_points)
    depth = rng.uniform(0.5, 60.0, n_points)
    inten = rng.uniform(0.0, 255.0, n_points)

    results = {}
    for backend in ("numpy", kernels.BACKEND):
        t = _time(lambda b=backend: kernels.render_zbuffer(
            us, vs, depth, inten, height, width, 1, backend=b))
        results[backend] = t
    _report("render_zbuffer", n_points, results)

    img_np, z_np, v_np = kernels.render_zbuffer(us, vs, depth, inten, height, width, 1,
                                                backend="numpy")
    img_c, z_c, v_c = kernels.render_zbuffer(us, vs, depth, inten, height, width, 1)
    assert np.array_equal(img_np, img_c) and np.array_equal(v_np, v_c)
    assert np.array_equal(z_np, z_c)


def bench_votes(n_segments: int = 500, width: int = 160, height: int = 60) -> None:
    rng = np.random.default_rng(1)
    centers = rng.uniform(0.0, 640.0, (n_segments, 2))
    angles = rng.uniform(0.0, np.pi, n_segments)
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    results = {}
    for backend in ("numpy", kernels.BACKEND):
        t = _time(lambda b=backend: kernels.accumulate_votes(
            centers, directions, 240.0, 210.0, width, height, 3.0, 10.0, backend=b))
        results[backend] = t
    _report("accumulate_votes", n_segments, results)

    acc_np = kernels.accumulate_votes(centers, directions, 240.0, 210.0,
                                      width, height, 3.0, 10.0, backend="numpy")
    acc_c = kernels.accumulate_votes(centers, directions, 240.0, 210.0,
                                     width, height, 3.0, 10.0)
    assert np.array_equal(acc_np, acc_c)


def _report(name: str, size: int, results: dict[str, float]) -> None:
    print(f"\n{name} (n={size})")
    for backend, t in results.items():
        print(f"  {backend:>9}: {t * 1e3:8.2f} ms")
    if "numpy" in results and kernels.BACKEND == "compiled":
        speedup = results["numpy"] / results["compiled"]
        print(f"  speedup: {speedup:.1f}x (outputs bitwise identical)")


if __name__ == "__main__":
    print(f"active backend: {kernels.BACKEND}")
    bench_render()
    bench_votes()
