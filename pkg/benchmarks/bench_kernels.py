"""Compiled vs pure-NumPy kernels.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints the best
time per call for each backend and the speed-up; the two backends are also
checked to agree before timing.
"""
import argparse
import timeit

import numpy as np

from moyal_dirac import _kernels_py as pure

try:
    from moyal_dirac import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    c = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    fs, hs = c(4, 128, 256), c(4, 128, 256)
    yield "twist_accumulate (4x128x256)", lambda k: k.twist_accumulate(np.zeros_like(fs), fs, hs, 5)

    n = 16
    idx = np.array([(i, j) for i in range(n) for j in range(n)], dtype=np.int64)
    freq = np.fft.fftfreq(n, 1 / n)
    kv = np.stack([freq[idx[:, 0]], freq[idx[:, 1]]], axis=1) * 0.5
    th = np.array([[0.0, 1.0], [-1.0, 0.0]])
    f, h = c(2, n * n), c(2, n * n)
    dims = np.array([n, n])
    yield "twisted_convolution (16x16 direct)", lambda k: k.twisted_convolution(f, h, kv, idx, dims, th)

    mats, vec = c(4096, 4, 4), c(8, 4, 4096)
    yield "apply_mode_matrices (4096 modes, batch 8)", lambda k: k.apply_mode_matrices(mats, vec)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':44s} {'python ms':>10s} {'compiled ms':>12s} {'speed-up':>9s}")
    for name, call in cases(rng):
        tp = min(timeit.repeat(lambda: call(pure), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:44s} {tp:10.3f} {'-':>12s} {'-':>9s}")
            continue
        a, b = call(pure), call(compiled)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max()), name
        tc = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:44s} {tp:10.3f} {tc:12.3f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
