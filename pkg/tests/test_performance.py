import os
import sys
import time

import psutil
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.ztselect import Params, eigen_triple, selection_report
from src.ztselect.checks import CheckOptions, run_checks


# ----------------------------
# Configurable thresholds (ms)
# ----------------------------
EIGEN_THRESHOLDS_MS = {
    "infinite_temperature": 1_000,  # < 1s
    "moderate": 5_000,
    "large": 10_000,
}

CHECK_THRESHOLDS_MS = {
    "cross_oracle": 60_000,  # operator solves on the whole oracle grid
    "residual_contract": 60_000,
}

SWEEP_THRESHOLD_MS = 60_000


class PerformanceBenchmark:
    """Stopwatch + RSS memory sampler using psutil."""

    def __init__(self):
        self.start_time = None
        self.start_memory = None

    def start(self):
        self.start_time = time.perf_counter()
        self.start_memory = psutil.Process().memory_info().rss

    def stop(self):
        end_time = time.perf_counter()
        end_memory = psutil.Process().memory_info().rss
        return {
            "duration_ms": (end_time - self.start_time) * 1000,
            "memory_delta_mb": (end_memory - self.start_memory) / (1024 * 1024),
            "rss_mb": end_memory / (1024 * 1024),
        }


@pytest.mark.performance
@pytest.mark.parametrize(
    "size,beta",
    [("infinite_temperature", 0.0), ("moderate", 20.0), ("large", 60.0)],
    ids=["beta0", "beta20", "beta60"],
)
def test_eigen_triple_performance(size, beta):
    benchmark = PerformanceBenchmark()
    benchmark.start()
    triple = eigen_triple(Params(2.0, 3.0, beta))
    metrics = benchmark.stop()

    print(
        f"eigen triple beta={beta:g} (depth {triple.depth}): "
        f"{metrics['duration_ms']:.1f}ms, "
        f"{metrics['memory_delta_mb']:.1f}MB delta, "
        f"RSS {metrics['rss_mb']:.1f}MB"
    )
    assert (
        metrics["duration_ms"] < EIGEN_THRESHOLDS_MS[size]
    ), f"Eigen solve too slow at beta={beta:g}: {metrics['duration_ms']:.1f}ms"


@pytest.mark.performance
@pytest.mark.parametrize("name", list(CHECK_THRESHOLDS_MS))
def test_check_performance(name):
    benchmark = PerformanceBenchmark()
    benchmark.start()
    (result,) = run_checks(CheckOptions(), only=(name,))
    metrics = benchmark.stop()

    print(f"{name}: {metrics['duration_ms']:.1f}ms ({result.detail})")
    assert result.passed, result.detail
    assert metrics["duration_ms"] < CHECK_THRESHOLDS_MS[name]


@pytest.mark.performance
def test_sweep_performance():
    benchmark = PerformanceBenchmark()
    benchmark.start()
    records = selection_report((0.5, 1.0, 2.0), (10.0, 20.0, 40.0))
    metrics = benchmark.stop()

    print(f"3x3 sweep: {metrics['duration_ms']:.1f}ms, RSS {metrics['rss_mb']:.1f}MB")
    assert len(records) == 9
    assert metrics["duration_ms"] < SWEEP_THRESHOLD_MS


@pytest.mark.performance
def test_full_verification_passes():
    benchmark = PerformanceBenchmark()
    benchmark.start()
    results = run_checks()
    metrics = benchmark.stop()

    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    print(f"{len(results)} checks: {metrics['duration_ms']:.1f}ms")
    assert not failed, "\n".join(failed)
