#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the numpy fallback.

Covers the three hot calls (affine forward, affine backward, momentum
update) at desk-scale and reference-scale layer shapes, plus one full
autoencoder training step.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from emogan import kernels, nn
from emogan.training import step1_autoencoder
from emogan import models


SHAPES = [
    ("toy layer", 64, 64, 40),
    ("toy wide", 64, 40, 20),
    ("reference in", 64, 1582, 1000),
    ("reference mid", 64, 1000, 500),
]


def time_call(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(backend, repeat):
    kernels.set_backend(backend)
    rng = np.random.default_rng(0)
    rows = []
    for name, m, k, n in SHAPES:
        x = rng.normal(size=(m, k))
        w = rng.normal(size=(k, n)) * 0.1
        b = rng.normal(size=n)
        out = kernels.affine_forward(x, w, b, 1)
        dout = rng.normal(size=out.shape)
        fwd = time_call(lambda: kernels.affine_forward(x, w, b, 1), repeat)
        bwd = time_call(lambda: kernels.affine_backward(dout, x, w, out, 1), repeat)
        rows.append((name, f"{m}x{k}->{n}", fwd, bwd))
    p = rng.normal(size=500_000)
    v = np.zeros_like(p)
    g = rng.normal(size=500_000)
    upd = time_call(lambda: kernels.sgd_update(p, v, g, 0.01, 0.9), repeat)

    model = models.build("m1", 64, scale="auto", seed=0)
    batch = rng.normal(size=(64, 64))
    cfg = nn.SgdConfig(1e-4, 0.9)
    step = time_call(lambda: step1_autoencoder(model, batch, cfg), repeat)
    return rows, upd, step


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    available = kernels.available_backends()
    print(f"backends built: {', '.join(available)}")
    results = {}
    for backend in available:
        results[backend] = bench_backend(backend, args.repeat)

    header = f"{'shape':<16} {'dims':<16}" + "".join(
        f"{b + ' fwd':>14}{b + ' bwd':>14}" for b in available
    )
    print(header)
    print("-" * len(header))
    for i, (name, dims, *_rest) in enumerate(results[available[0]][0]):
        line = f"{name:<16} {dims:<16}"
        for backend in available:
            fwd, bwd = results[backend][0][i][2], results[backend][0][i][3]
            line += f"{fwd * 1e6:>12.1f}us{bwd * 1e6:>12.1f}us"
        print(line)
    for backend in available:
        _, upd, step = results[backend]
        print(
            f"{backend}: momentum update (500k params) {upd * 1e6:.1f}us, "
            f"full autoencoder step (64x64 batch) {step * 1e6:.1f}us"
        )
    if len(available) == 2:
        ratio = results["numpy"][2] / results["ext"][2]
        print(f"autoencoder step speedup ext vs numpy: {ratio:.2f}x")
    kernels.set_backend("auto")


if __name__ == "__main__":
    main()
