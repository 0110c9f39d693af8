"""Timing comparison of the compiled kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Each workload runs in both backends (same arrays, same call sequence) by
invoking the backend modules directly, so one process measures both.
"""

import time

import numpy as np

from spectranet.kernels import BACKEND, python_ref
from spectranet.kernels.python_ref import gauss_taps

try:
    from spectranet.kernels import _native
except ImportError:
    _native = None


def timeit(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    g = np.random.default_rng(0)
    img_small = g.integers(0, 256, (256, 384, 3), np.uint8)
    img_large = g.integers(0, 256, (1080, 1920, 3), np.uint8)
    score_maps = g.standard_normal((64, 49, 49)).astype(np.float32)
    k7 = g.standard_normal((7, 7)).astype(np.float32)
    dout = g.standard_normal((64, 49, 49)).astype(np.float32)
    taps = gauss_taps(2.5)

    workloads = [
        ("resize 256x384 -> 448x448", "resize_bilinear_u8", (img_small, 448, 448)),
        ("resize 1080p -> 448x448", "resize_bilinear_u8", (img_large, 448, 448)),
        ("blur sigma=2.5 on 256x384", "gaussian_blur_u8", (img_small, taps)),
        ("conv 7x7 on 64 score maps", "depthwise_conv2d", (score_maps, k7)),
        ("conv backward, same shapes", "depthwise_conv2d_backward", (score_maps, k7, dout)),
    ]

    print(f"default backend at import time: {BACKEND}")
    if _native is None:
        print("compiled extension unavailable; showing fallback only\n")
    header = f"{'workload':<30} {'python (ms)':>12} {'native (ms)':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, fn_name, args in workloads:
        t_py, out_py = timeit(getattr(python_ref, fn_name), *args)
        if _native is not None:
            t_nat, out_nat = timeit(getattr(_native, fn_name), *args)
            if isinstance(out_py, tuple):
                same = all(np.allclose(a, b, rtol=1e-6, atol=1e-7)
                           for a, b in zip(out_py, out_nat))
            else:
                same = np.array_equal(out_py, out_nat)
            mark = "" if same else "  [MISMATCH]"
            print(f"{label:<30} {1e3 * t_py:>12.2f} {1e3 * t_nat:>12.2f} "
                  f"{t_py / t_nat:>7.1f}x{mark}")
        else:
            print(f"{label:<30} {1e3 * t_py:>12.2f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
