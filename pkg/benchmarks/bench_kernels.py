"""Benchmark the compiled response kernels against the numpy fallback.

Runs each hot kernel on a representative workload under both backends and
prints per-kernel timings, the speedup, and the maximum absolute difference
between the two results (zero for the integer-hash kernels, within a few
ULPs for the transcendental-heavy ones).

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from d2cip.kernels import _fallback

try:
    from d2cip.kernels import _core
except ImportError:
    _core = None


def _best_time(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    result = fn(*args)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, np.asarray(result)


def _workloads():
    rng = np.random.default_rng(7)
    n = 100
    centers_x = rng.integers(30, 130, n)
    centers_y = rng.integers(30, 90, n)
    peaks = (np.array([60.0, 90.0, 40.0]), np.array([50.0, 70.0, 80.0]),
             np.array([1.0, 0.8, 0.5]), np.array([6.0, 3.0, 9.0]))
    yield ("gauss_response_maps", "gauss_response_maps",
           (centers_x, centers_y, *peaks, 0.02, 11, 3, 10))

    yield ("render_intensity", "render_intensity",
           (160, 120, *peaks, 0.02, 11, 3))

    yield ("cell_noise", "cell_noise",
           (11, 3, *np.meshgrid(np.arange(256), np.arange(256))))

    frame = _fallback.render_intensity(160, 120, *peaks, 0.02, 11, 3)
    patch = _fallback.extract_patch(frame, 60, 50, 22.0, 22.0, 24, 24)
    yield ("ncc_response_maps", "ncc_response_maps",
           (frame, patch, centers_x[:20], centers_y[:20], 8, 22.0, 22.0))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions per kernel (best-of)")
    args = parser.parse_args()

    if _core is None:
        print("compiled extension not available; nothing to compare")
        return 1

    header = f"{'kernel':<22} {'python':>10} {'cython':>10} {'speedup':>8} {'max|diff|':>10}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in _workloads():
        t_py, r_py = _best_time(getattr(_fallback, name), call_args, args.repeat)
        t_cy, r_cy = _best_time(getattr(_core, name), call_args, args.repeat)
        diff = float(np.max(np.abs(r_py - r_cy)))
        print(f"{label:<22} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
              f"{t_py / t_cy:>7.1f}x {diff:>10.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
