"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import timeit
from array import array

from offloadkit import _pykernels

try:
    from offloadkit import _ckernels
except ImportError:
    _ckernels = None


def cases(n):
    rng = random.Random(0)
    ts = array("q", sorted(rng.randrange(0, 600_000_000) for _ in range(n)))
    a = array("d", (rng.random() for _ in range(6000)))
    b = array("d", (rng.random() for _ in range(6000)))
    calls = array("q", sorted(rng.randrange(0, 600_000_000) for _ in range(n // 10)))
    return {
        "gap_usage": lambda k: k.gap_usage(ts, 700_000_000, 5_000_000, 17_000_000),
        "bin_counts": lambda k: k.bin_counts(ts, 0, 100_000, 6000),
        "xcorr_max": lambda k: k.xcorr_max(a, b, 2),
        "nearest_calls": lambda k: k.nearest_calls(calls, ts),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<15}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(args.size).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<15}{py:>12.2f}{'-':>12}{'-':>10}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<15}{py:>12.2f}{cy:>12.3f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
