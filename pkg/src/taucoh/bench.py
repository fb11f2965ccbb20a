"""Throughput comparison of the kernel backends.

Measures the per-frame analytics hot path (distance-matrix update plus
centered accumulator update) on a synthetic stream, once per available
backend, and reports frames per second. The python backend is always last
in the result rows so callers can use it as the speedup baseline.
"""

from __future__ import annotations

import time

import numpy as np

from . import _backend
from .tda import StreamingTda


def _time_backend(name: str, n_buses: int, n_frames: int, repeat: int) -> float:
    kernels = _backend.load(name)
    rng = np.random.default_rng(7)
    frames = rng.normal(0.0, 1e-2, (n_frames, n_buses))
    best = float("inf")
    for _ in range(repeat):
        tda = StreamingTda(n_buses, backend=kernels)
        start = time.perf_counter()
        for row in frames:
            tda.push(row)
        elapsed = time.perf_counter() - start
        best = min(best, elapsed)
    return n_frames / best


def run_benchmark(n_buses: int = 120, n_frames: int = 1500, repeat: int = 3):
    """Return a list of {backend, frames_per_s} rows, python last."""
    names = sorted(_backend.available_backends(), key=lambda n: n == "python")
    return [
        {
            "backend": name,
            "frames_per_s": _time_backend(name, n_buses, n_frames, repeat),
        }
        for name in names
    ]
