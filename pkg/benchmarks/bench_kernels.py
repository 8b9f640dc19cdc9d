"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the fused-lasso solver, a Lloyd run, and one gap-statistic call
(which is dominated by Lloyd runs) under each backend, and checks that
both backends return the same answers.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from dtclust import _fallback

try:
    from dtclust import _kernels
except ImportError:  # extension not built
    _kernels = None


def _cases(rng):
    y_short = rng.standard_normal(20)
    y_long = np.repeat(rng.standard_normal(50), 200) + 0.3 * rng.standard_normal(10_000)
    centers = np.array([[1, -1], [1, 1], [-1, 1], [-1, -1]], dtype=float)
    X = np.repeat(centers, 50, axis=0) * 0.1 + 0.02 * rng.standard_normal((200, 2))
    init = X[rng.choice(200, 4, replace=False)].copy()
    return {
        "tv1d d=20": lambda m: m.tv1d(y_short, 0.2),
        "tv1d d=10000": lambda m: m.tv1d(y_long, 1.0),
        "lloyd n=200 K=4": lambda m: m.lloyd(X, init, 100),
    }, X


def _gap_seconds(X, backend_module, repeat):
    from dtclust import _backend
    from dtclust.cluster import gap_statistic

    saved = _backend.tv1d, _backend.lloyd
    _backend.tv1d, _backend.lloyd = backend_module.tv1d, backend_module.lloyd
    try:
        return min(timeit.repeat(lambda: gap_statistic(X, 8, 50, seed=0), number=1, repeat=repeat))
    finally:
        _backend.tv1d, _backend.lloyd = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases, X = _cases(rng)
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])

    print(f"{'kernel':<18}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases.items():
        times = []
        for _, mod in backends:
            timer = timeit.Timer(lambda: fn(mod))
            n, _ = timer.autorange()
            times.append(min(timer.repeat(repeat=args.repeat, number=n)) / n)
        if _kernels:
            a, b = fn(_fallback), fn(_kernels)
            for x, y in zip(np.atleast_1d(a) if label.startswith("tv") else a[:2],
                            np.atleast_1d(b) if label.startswith("tv") else b[:2]):
                assert np.allclose(x, y, atol=1e-10), f"backends disagree on {label}"
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{label:<18}" + "".join(f"{t * 1e6:>12.1f}us" for t in times) + speed)

    gap_times = [_gap_seconds(X, mod, max(1, args.repeat // 2)) for _, mod in backends]
    speed = f"{gap_times[0] / gap_times[-1]:>9.1f}x" if len(gap_times) > 1 else ""
    print(f"{'gap K_max=8 B=50':<18}" + "".join(f"{t:>13.2f}s" for t in gap_times) + speed)


if __name__ == "__main__":
    main()
