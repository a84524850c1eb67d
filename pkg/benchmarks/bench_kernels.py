"""Compare the compiled kernels against the NumPy/SciPy fallback.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 200,500,1000 --dim 128

Reports wall time per call (best of `--repeats`) for the distance matrix
and k-NN mean kernels, plus the resulting speedup.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from reidflow import _kernels
from reidflow._kernels import _fallback


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes", default="100,300,1000",
        help="comma-separated set sizes (default 100,300,1000)",
    )
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not _kernels.HAVE_EXT:
        print(
            "compiled extension not available; only the fallback backend "
            "can be timed"
        )
        ext = None
    else:
        from reidflow._kernels import _core as ext

    sizes = [int(tok) for tok in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)

    header = f"{'kernel':<26} {'n':>6} {'python':>10} {'ext':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        x = rng.normal(size=(n, args.dim))
        y = rng.normal(size=(n, args.dim))
        cases = [
            ("pairwise euclidean", lambda b: b.pairwise_distances(x, y, "euclidean")),
            ("pairwise cosine", lambda b: b.pairwise_distances(x, y, "cosine")),
        ]
        sq = _fallback.pairwise_distances(x, x, "euclidean")
        k = min(5, n - 1)
        cases.append(("knn mean (k=5)", lambda b: b.knn_mean_from_matrix(sq, k)))
        for name, call in cases:
            t_py = _best_of(lambda: call(_fallback), args.repeats)
            if ext is None:
                print(f"{name:<26} {n:>6} {t_py * 1e3:>8.2f}ms {'-':>10} {'-':>8}")
                continue
            t_ext = _best_of(lambda: call(ext), args.repeats)
            ratio = t_py / t_ext if t_ext > 0 else float("inf")
            print(
                f"{name:<26} {n:>6} {t_py * 1e3:>8.2f}ms "
                f"{t_ext * 1e3:>8.2f}ms {ratio:>7.2f}x"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
