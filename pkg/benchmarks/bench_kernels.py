#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Two parts:

1. Kernel microbenchmarks: both backend modules are imported side by side
   and timed on the shapes the simulator actually hits (single-example
   online steps and batch-64 retrain steps).
2. An end-to-end desk-scale competition, re-executed in a subprocess per
   backend via PREDMARKET_BACKEND, since a backend is fixed at import time.

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --skip-end-to-end
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from predmarket import _kernels_numba as knb
from predmarket import _kernels_numpy as knp


def _time(fn, args, repeat: int, number: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def _workloads():
    rng = np.random.default_rng(0)
    for batch in (1, 64):
        X = rng.standard_normal((batch, 16))
        y = rng.integers(0, 5, size=batch)
        W = rng.standard_normal((16, 5)) * 0.05
        b = np.zeros(5)
        yield f"logistic_forward B={batch}", "logistic_forward", (X, W, b)
        yield f"logistic_grad    B={batch}", "logistic_grad", (X, y, W, b)
        W1 = rng.standard_normal((16, 32)) * 0.05
        b1 = np.zeros(32)
        W2 = rng.standard_normal((32, 5)) * 0.05
        b2 = np.zeros(5)
        yield f"mlp_forward      B={batch}", "mlp_forward", (X, W1, b1, W2, b2)
        yield f"mlp_grad         B={batch}", "mlp_grad", (X, y, W1, b1, W2, b2)
    p = rng.standard_normal(16 * 5)
    g = rng.standard_normal(16 * 5)
    yield "adam_update 80 params", "adam_update", (
        p, g, np.zeros_like(p), np.zeros_like(p), 3, 1e-3, 0.9, 0.999, 1e-8,
    )


def bench_kernels(number: int = 2000, repeat: int = 5) -> None:
    print(f"{'kernel':26s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for label, name, args in _workloads():
        fn_np = getattr(knp, name)
        fn_nb = getattr(knb, name)
        fn_nb(*[np.copy(a) if isinstance(a, np.ndarray) else a for a in args])  # JIT warmup
        args_np = [np.copy(a) if isinstance(a, np.ndarray) else a for a in args]
        args_nb = [np.copy(a) if isinstance(a, np.ndarray) else a for a in args]
        t_np = _time(fn_np, args_np, repeat, number)
        t_nb = _time(fn_nb, args_nb, repeat, number)
        print(f"{label:26s} {t_np * 1e6:10.2f}us {t_nb * 1e6:10.2f}us "
              f"{t_np / t_nb:8.1f}x")


def end_to_end() -> None:
    from predmarket.backend import active_backend
    from predmarket.dataset import NoiseConfig, UserStream, inject_label_noise, split, synth_gaussian_mixture
    from predmarket.environment import CompetitionConfig, PredictorConfig, run_competition
    from predmarket.models import ModelSpec, TrainConfig
    from predmarket.strategy import BuyingStrategy

    means = [[-0.5, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0]]
    raw = synth_gaussian_mixture(2, 4, means, 1.0, 5000, seed=1)
    noisy = inject_label_noise(raw, NoiseConfig(0.3, 7))
    pair = split(noisy, 1000, seed=3)
    predictors = tuple(
        PredictorConfig(
            n_seed=50, budget=100, model_spec=ModelSpec("logistic", 4, 2),
            strategy=BuyingStrategy(0.3), train_cfg=TrainConfig(init_seed=100 + i),
            seed_data_seed=200 + i,
        )
        for i in range(6)
    )
    cfg = CompetitionConfig(predictors, alpha=4.0, market_seed=11)
    stream = UserStream(pair.competition, 13)
    run_competition(cfg, stream, 100)  # warmup (JIT, caches)
    t0 = time.perf_counter()
    run_competition(cfg, stream, 2000)
    dt = time.perf_counter() - t0
    print(f"  backend={active_backend():5s}  M=6 T=2000 competition: {dt:6.2f}s")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--skip-end-to-end", action="store_true")
    parser.add_argument("--end-to-end-only", action="store_true",
                        help="internal: run one end-to-end timing and exit")
    args = parser.parse_args()

    if args.end_to_end_only:
        end_to_end()
        return 0

    print("== kernel microbenchmarks (both backends in-process) ==")
    bench_kernels()
    if not args.skip_end_to_end:
        print("\n== end-to-end competition per backend ==")
        for backend in ("numpy", "numba"):
            env = dict(os.environ, PREDMARKET_BACKEND=backend)
            subprocess.run(
                [sys.executable, os.path.abspath(__file__), "--end-to-end-only"],
                env=env, check=True,
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
