"""Throughput comparison of the compiled and pure-Python simulation kernels.

Runs the same training and evaluation workload through each available
backend and reports per-sample wall time plus the speedup. The workload is
the default architecture driven by random Poisson input at a realistic rate,
so the numbers reflect what an experiment actually does.

Usage:
    python3 benchmarks/bench_backends.py [--samples N] [--hidden H] [--steps T]
"""

import argparse
import time

import numpy as np

from spikecl import backend
from spikecl.config import load_config, network_config, resolve_mode
from spikecl.network import build_network, end_of_sample, run_sample


def make_workload(hidden: int, steps: int, samples: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    images = rng.random((samples, 784)) * (rng.random((samples, 784)) < 0.15)
    rasters = (rng.random((samples, steps, 784)) < images[:, None, :] * 0.25).astype(np.uint8)
    labels = np.zeros((samples, steps, 2), dtype=np.uint8)
    labels[:, :, 0] = rng.random((samples, steps)) < 0.2
    return rasters, labels


def bench_one(name: str, hidden: int, steps: int, samples: int):
    backend.set_backend(name)
    cfg = resolve_mode(load_config(None, [f"model.hidden=[{hidden}]"]))
    model = build_network(network_config(cfg, 784, 2))
    rasters, labels = make_workload(hidden, steps, samples)

    # warmup to exclude one-time costs
    run_sample(model, rasters[0], labels[0], learning=True)
    end_of_sample(model, float(steps))

    t0 = time.perf_counter()
    for i in range(samples):
        run_sample(model, rasters[i], labels[i], learning=True)
        end_of_sample(model, float(steps))
    train_ms = (time.perf_counter() - t0) / samples * 1e3

    counts = np.zeros(2, dtype=np.int64)
    t0 = time.perf_counter()
    for i in range(samples):
        run_sample(model, rasters[i], None, learning=False, out_counts=counts)
    eval_ms = (time.perf_counter() - t0) / samples * 1e3
    return train_ms, eval_ms


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=40, help="samples per measurement")
    parser.add_argument("--hidden", type=int, default=200, help="hidden layer size")
    parser.add_argument("--steps", type=int, default=100, help="time steps per sample")
    args = parser.parse_args()

    names = backend.available_backends()
    print(f"backends available: {', '.join(names)}")
    print(f"workload: 784-{args.hidden}-2, {args.steps} steps, {args.samples} samples\n")

    results = {}
    for name in names:
        train_ms, eval_ms = bench_one(name, args.hidden, args.steps, args.samples)
        results[name] = (train_ms, eval_ms)
        print(f"{name:>9}: train {train_ms:8.2f} ms/sample   eval {eval_ms:8.2f} ms/sample")

    if "compiled" in results and "python" in results:
        t_speed = results["python"][0] / results["compiled"][0]
        e_speed = results["python"][1] / results["compiled"][1]
        print(f"\ncompiled speedup: {t_speed:.1f}x train, {e_speed:.1f}x eval")


if __name__ == "__main__":
    main()
