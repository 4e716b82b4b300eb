#!/usr/bin/env python3
"""
Times the main ztselect workloads (single eigen solve, a selection sweep,
the verification suite) and reports duration and memory usage.
Usage: python benchmark.py [results.json] [label]
"""

import argparse
import json
import time
import psutil

from src.ztselect import Params, eigen_triple, selection_report
from src.ztselect.checks import run_checks


def _measure(fn) -> dict:
    start = time.perf_counter()
    start_mem = psutil.Process().memory_info().rss
    outcome = fn()
    return {
        "duration_ms": (time.perf_counter() - start) * 1000,
        "memory_mb": (psutil.Process().memory_info().rss - start_mem) / (1024 * 1024),
        "outcome": outcome,
    }


def run_benchmark(beta: float, threads: int | None) -> dict:
    """Run every workload once."""
    results = {}

    # 1. One eigen triple at moderate and large beta
    for label, b in (("eig_small_beta", 2.0), ("eig_large_beta", beta)):
        results[label] = _measure(
            lambda b=b: {"P": eigen_triple(Params(2.0, 3.0, b)).P, "beta": b}
        )

    # 2. Default 3x3 sweep
    results["sweep"] = _measure(
        lambda: {
            "records": len(
                selection_report((0.5, 1.0, 2.0), (10.0, 20.0, 40.0), threads=threads)
            )
        }
    )

    # 3. Verification suite
    def verify():
        checks = run_checks()
        return {"passed": sum(r.passed for r in checks), "total": len(checks)}

    results["verify"] = _measure(verify)
    return results


def main():
    parser = argparse.ArgumentParser(description="Benchmark ztselect workloads.")
    parser.add_argument(
        "output",
        nargs="?",
        default=None,
        help="Optional JSON file to save results (if omitted, results are printed)",
    )
    parser.add_argument(
        "label",
        nargs="?",
        default="benchmark",
        help="Optional label for this run (default: 'benchmark')",
    )
    parser.add_argument("--beta", type=float, default=60.0, help="Large-beta point")
    parser.add_argument("--threads", type=int, default=None, help="Sweep thread cap")
    args = parser.parse_args()

    print("Running ztselect benchmark...")
    results = run_benchmark(args.beta, args.threads)
    results["run_info"] = {
        "label": args.label,
        "cpu_count": psutil.cpu_count(),
        "rss_mb": psutil.Process().memory_info().rss / (1024 * 1024),
    }

    if args.output:
        with open(args.output, "w") as f:
            json.dump(results, f, indent=2)
        print(f"Results saved to {args.output}")
    else:
        print(json.dumps(results, indent=2))


if __name__ == "__main__":
    main()
