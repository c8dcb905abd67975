import gc
import statistics
import time
from typing import Any, Callable

import numpy as np
import psutil

from frontlab.heat import heat_step_cn, heat_step_exact
from frontlab.kpp1d import Solver1DConfig, sample_initial, step_1d
from frontlab.kpp2d import Solver2DConfig, step_2d
from frontlab.numerics import Field1D, Field2D, Frame, Grid1D, Grid2D, set_threads


def format_time(seconds: float) -> str:
    """Formats time in readable units"""
    if seconds >= 1.0:
        return f"{seconds:.3f}s"
    if seconds >= 0.001:
        return f"{seconds * 1000:.3f}ms"
    return f"{seconds * 1000000:.3f}us"


def format_rate(cells_per_second: float) -> str:
    """Formats grid-cell updates per second"""
    if cells_per_second >= 1e9:
        return f"{cells_per_second / 1e9:.2f} Gcell/s"
    if cells_per_second >= 1e6:
        return f"{cells_per_second / 1e6:.2f} Mcell/s"
    return f"{cells_per_second / 1e3:.2f} kcell/s"


def rss_mb() -> float:
    return psutil.Process().memory_info().rss / 1024**2


class AccurateBenchmark:
    def __init__(self, warmup_duration: float = 1.0, target_duration: float = 2.0):
        self.warmup_duration = warmup_duration
        self.target_duration = target_duration
        self.min_iterations = 3
        self.max_iterations = 100_000

    def warmup(self, func: Callable, *args) -> float:
        """Runs ``func`` for the warmup duration (numba compiles here); returns the mean call time"""
        start = time.perf_counter()
        iterations = 0
        while (time.perf_counter() - start) < self.warmup_duration or iterations == 0:
            func(*args)
            iterations += 1
        return (time.perf_counter() - start) / iterations

    def measure(self, func: Callable, avg: float, *args) -> list[float]:
        iterations = min(self.max_iterations, max(self.min_iterations, int(self.target_duration / avg)))
        times = []
        gc.disable()
        try:
            for _ in range(iterations):
                start = time.perf_counter()
                func(*args)
                times.append(time.perf_counter() - start)
        finally:
            gc.enable()
        return times

    @staticmethod
    def statistics(times: list[float]) -> dict[str, float]:
        """Mean, spread and percentiles of the call times"""
        p50, p95, p99 = np.percentile(times, [50, 95, 99])
        return {
            "count": len(times),
            "mean": statistics.mean(times),
            "stddev": statistics.stdev(times) if len(times) > 1 else 0.0,
            "min": min(times),
            "max": max(times),
            "p50": float(p50),
            "p95": float(p95),
            "p99": float(p99),
        }

    def run(self, name: str, cells: int, func: Callable, *args) -> dict[str, Any]:
        print(f"  {name}")
        before = rss_mb()
        avg = self.warmup(func, *args)
        stats = self.statistics(self.measure(func, avg, *args))
        rate = cells / stats["mean"]
        print(
            f"    {format_time(stats['mean']):>10} ± {format_time(stats['stddev']):>9}"
            f"  p95 {format_time(stats['p95']):>10}  {format_rate(rate):>14}"
            f"  rss {rss_mb():.0f} MB (+{rss_mb() - before:.0f})"
        )
        return {"name": name, "cells": cells, "stats": stats, "rate": rate}


def heaviside(x):
    return (x <= 0).astype(np.float64)


def kernels() -> list[tuple[str, int, Callable, tuple]]:
    """(name, cells per call, function, args) for every measured kernel"""
    gx = Grid1D.from_spacing(-60.0, 260.0, 0.05)
    gy = Grid1D.from_spacing(0.0, 80.0, 0.25)
    grid = Grid2D(gx, gy)

    cfg1 = Solver1DConfig(gx)
    u1 = sample_initial(heaviside, gx, Frame.MOVING, cfg1.t0)
    cfg2 = Solver2DConfig(grid)
    u2 = Field2D(grid, heaviside(np.broadcast_to(gx.points(), grid.shape) + 10.0))

    gh = Grid1D.from_spacing(-100.0, 100.0, 0.05)
    a = Field1D(gh, np.where(np.abs(gh.points()) <= 5.0, 2.0, 1.0))
    return [
        ("1D Strang step", gx.size, step_1d, (u1, 10.0, cfg1)),
        ("2D ADI step", gx.size * gy.size, step_2d, (u2, 10.0, cfg2)),
        ("heat CN step", gh.size, heat_step_cn, (a, 0.01)),
        ("heat exact step", gh.size, heat_step_exact, (a, 0.01)),
    ]


def run_accurate_benchmarks(thread_counts: tuple[int, ...] = (1, 2, 4)) -> list[dict[str, Any]]:
    print("SOLVER KERNEL BENCHMARKS")
    print("=" * 70)
    print("Methodology: warmup 1s (includes JIT) -> calibration -> measurement 2s each")

    benchmark = AccurateBenchmark()
    results = []
    for requested in thread_counts:
        threads = set_threads(requested)
        print(f"\nthreads = {threads}")
        print("-" * 70)
        for name, cells, func, args in kernels():
            result = benchmark.run(name, cells, func, *args)
            result["threads"] = threads
            results.append(result)

    print(f"\n{'=' * 70}")
    print("SPEEDUP OVER ONE THREAD")
    serial = {r["name"]: r["stats"]["mean"] for r in results if r["threads"] == 1}
    for r in results:
        if r["threads"] > 1 and r["name"] in serial:
            print(f"  {r['name']:<18} x{r['threads']}: {serial[r['name']] / r['stats']['mean']:.2f}")
    return results


if __name__ == "__main__":
    run_accurate_benchmarks()
    print("\nCompleted")
