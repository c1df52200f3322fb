"""Timing tables for the decomposition and the forecasting network.

Numbers are informational; nothing here asserts on wall-clock time.
"""
from __future__ import annotations

import csv
import time

import numpy as np
import torch
import torch.nn.functional as F

from ..graph import RoadGraph
from ..data import ring_distances
from ..model import DTYPE, ModelConfig, StModel, basis_tensor, conv_output_size, spatial_attention
from ..spectral import TimeSeries
from ..vmd import VmdConfig, decompose

BENCH_HEADER = ["benchmark", "K", "L", "N", "stride", "iterations", "seconds",
                "seconds_per_iteration", "ratio_vs_previous", "expected", "observed"]


def _best_of(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return float(best)


def _signal(L: int, seed: int) -> TimeSeries:
    rng = np.random.default_rng(seed)
    t = np.arange(L)
    x = np.cos(2 * np.pi * 0.01 * t) + 0.5 * np.cos(2 * np.pi * 0.13 * t)
    return TimeSeries(x + 0.05 * rng.standard_normal(L))


def bench_vmd(Ks=(2, 4, 8), Ls=(512, 1024, 2048), max_iter: int = 200, repeats: int = 1):
    """Per-node decomposition cost against ``K`` and ``L``.

    ``epsilon`` is set tiny so every run does exactly ``max_iter`` sweeps
    and the per-iteration cost is comparable across settings.
    """
    rows = []
    for K in Ks:
        prev = None
        for L in Ls:
            cfg = VmdConfig(num_modes=K, epsilon=1e-300, max_iter=max_iter)
            s = _signal(L, 0)
            holder = {}
            secs = _best_of(lambda: holder.__setitem__("ms", decompose(s, cfg)), repeats)
            it = holder["ms"].iterations_used
            per = secs / it
            rows.append({"benchmark": "vmd", "K": K, "L": L, "iterations": it, "seconds": secs,
                         "seconds_per_iteration": per,
                         "ratio_vs_previous": "" if prev is None else per / prev,
                         "expected": "~linear in K*L*log(L) per iteration"})
            prev = per
    return rows


def _attention_inputs(N: int, d: int, T: int, seed: int = 0):
    g = torch.Generator().manual_seed(seed)
    r = lambda *s: torch.rand(*s, generator=g, dtype=DTYPE) - 0.5  # noqa: E731
    return r(1, N, d, T), (r(T), r(d, T), r(d), r(N, N), r(N, N))


def bench_spatial_attention(Ns=(64, 128, 256, 512), d: int = 8, T: int = 12, repeats: int = 3):
    rows, prev = [], None
    for N in Ns:
        X, w = _attention_inputs(N, d, T)
        with torch.no_grad():
            secs = _best_of(lambda: spatial_attention(X, *w), repeats)
        rows.append({"benchmark": "spatial_attention", "N": N, "seconds": secs,
                     "ratio_vs_previous": "" if prev is None else secs / prev,
                     "expected": ">=4x per doubling of N (superlinear)"})
        prev = secs
    return rows


def bench_forward(Ns=(16, 32, 64, 128), d: int = 7, repeats: int = 3):
    rows, prev = [], None
    for N in Ns:
        cfg = ModelConfig(num_nodes=N, in_channels=d)
        model = StModel(cfg).eval()
        basis = basis_tensor(RoadGraph.build([str(i) for i in range(N)],
                                             ring_distances(N)).spectral_ops(cfg.cheb_order))
        X = torch.rand(8, N, d, cfg.window, generator=torch.Generator().manual_seed(0), dtype=DTYPE)
        with torch.no_grad():
            secs = _best_of(lambda: model(X, basis), repeats)
        rows.append({"benchmark": "forward", "N": N, "seconds": secs,
                     "ratio_vs_previous": "" if prev is None else secs / prev,
                     "expected": "superlinear in N"})
        prev = secs
    return rows


def check_conv_sizes(cases=((12, 3, 1), (12, 3, 2), (12, 5, 3), (7, 2, 2)), N: int = 6):
    """Unpadded 2D convolution shapes against the closed-form output size."""
    rows = []
    for T, k, s in cases:
        x = torch.zeros(1, 1, N, T, dtype=DTYPE)
        w = torch.zeros(1, 1, min(k, N), k, dtype=DTYPE)
        out = F.conv2d(x, w, stride=(s, s))
        want = (conv_output_size(N, min(k, N), s), conv_output_size(T, k, s))
        rows.append({"benchmark": "conv_output_size", "N": N, "L": T, "K": k,
                     "stride": s, "expected": f"{want[0]}x{want[1]}",
                     "observed": f"{out.shape[2]}x{out.shape[3]}"})
    return rows


def run_bench(quick: bool = False) -> list[dict]:
    if quick:
        return (bench_vmd(Ks=(2, 4), Ls=(256, 512), max_iter=20)
                + bench_spatial_attention(Ns=(32, 64), repeats=1)
                + bench_forward(Ns=(8, 16), repeats=1)
                + check_conv_sizes())
    return bench_vmd() + bench_spatial_attention() + bench_forward() + check_conv_sizes()


def write_bench_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_HEADER)
        for row in rows:
            w.writerow([row.get(c, "") for c in BENCH_HEADER])
