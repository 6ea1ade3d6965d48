"""Benchmark the compiled kernels against the numpy fallback.

Builds workloads shaped like a real sweep run (96x96 grid, 4 channels,
a few senders) and times the three hot kernels under both backends.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from bevshare._kernels import numpy_impl

try:
    from bevshare._kernels import _cykernels
except ImportError:
    _cykernels = None

ROWS, COLS, CHANNELS = 96, 96, 4
N_CELLS = ROWS * COLS


def _build_fuse_workload(rng: np.random.Generator):
    # roughly the pipeline's shape: most cells ego-only, a band of
    # cells with 2..4 tokens where senders overlap
    counts = np.ones(N_CELLS, dtype=np.int64)
    hot = rng.choice(N_CELLS, size=N_CELLS // 6, replace=False)
    counts[hot] += rng.integers(1, 4, size=hot.size)
    offsets = np.zeros(N_CELLS + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    tokens = rng.standard_normal((int(offsets[-1]), CHANNELS))
    return tokens, offsets


def _build_visibility_workload(rng: np.random.Generator):
    xs = (np.arange(ROWS) + 0.5) * 0.5 - 24.0
    ys = (np.arange(COLS) + 0.5) * 0.5 - 24.0
    centers = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    quads = []
    for _ in range(10):
        cx, cy = rng.uniform(-9, 9, size=2)
        l, w = rng.uniform(3.6, 4.8), rng.uniform(1.6, 2.1)
        t = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(t), math.sin(t)
        local = np.array([[-l, w], [-l, -w], [l, -w], [l, w]]) / 2.0
        quads.append(local @ np.array([[c, s], [-s, c]]) + [cx, cy])
    origin = np.array([0.0, 0.0])
    return centers, np.stack(quads), origin


def _build_iou_workload(rng: np.random.Generator, n_pairs: int = 500):
    def quad():
        cx, cy = rng.uniform(-3, 3, size=2)
        l, w = rng.uniform(2, 5), rng.uniform(1, 3)
        t = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(t), math.sin(t)
        local = np.array([[-l, w], [-l, -w], [l, -w], [l, w]]) / 2.0
        return local @ np.array([[c, s], [-s, c]]) + [cx, cy]

    return [(quad(), quad()) for _ in range(n_pairs)]


def _time(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    tokens, offsets = _build_fuse_workload(rng)
    centers, quads, origin = _build_visibility_workload(rng)
    pairs = _build_iou_workload(rng)

    cases = [
        ("fuse_cells (9216 cells)", lambda impl: impl.fuse_cells(tokens, offsets)),
        (
            "visibility (9216 centers, 10 quads)",
            lambda impl: impl.visibility(centers, quads, origin),
        ),
        (
            "quad_iou (500 pairs)",
            lambda impl: [impl.quad_iou(a, b) for a, b in pairs],
        ),
    ]

    print(f"{'kernel':<38}{'numpy':>12}{'cython':>12}{'speedup':>10}")
    for name, call in cases:
        t_np = _time(lambda: call(numpy_impl), args.repeats)
        if _cykernels is None:
            print(f"{name:<38}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}")
            continue
        out_np = call(numpy_impl)
        out_cy = call(_cykernels)
        if name.startswith("quad_iou"):
            err = max(abs(a - b) for a, b in zip(out_np, out_cy))
        else:
            err = float(np.max(np.abs(np.asarray(out_np, dtype=np.float64)
                                      - np.asarray(out_cy, dtype=np.float64))))
        if err > 1e-9:
            raise SystemExit(f"backend mismatch on {name}: max |diff| = {err:g}")
        t_cy = _time(lambda: call(_cykernels), args.repeats)
        print(
            f"{name:<38}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms"
            f"{t_np / t_cy:>9.1f}x"
        )
    if _cykernels is None:
        print("compiled extension not available; numpy timings only")


if __name__ == "__main__":
    main()
