"""Figures and delimited output for benchmark reports."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchResult, Workload  # noqa: E402


def write_checks_csv(result: BenchResult, workload: Workload, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "bp", "consent", "expected", "verdict", "latency_ns"])
        for k, ((b, c), exp, v, ns) in enumerate(
            zip(workload.pairs, workload.expected, result.verdicts, result.latencies_ns)
        ):
            w.writerow([k, b, c, int(exp), int(v), ns])
    return path


def plot_latency(result: BenchResult, path: str | Path) -> Path:
    """Histogram and empirical CDF of per-check latency, side by side."""
    path = Path(path)
    us = sorted(ns / 1000 for ns in result.latencies_ns)
    fig, (hist, cdf) = plt.subplots(1, 2, figsize=(9, 3.4), constrained_layout=True)
    cap = us[int(0.999 * (len(us) - 1))]
    hist.hist([u for u in us if u <= cap], bins=60, color="#4878a8")
    hist.axvline(result.median_us, color="k", lw=1, ls="--", label=f"median {result.median_us:.1f} µs")
    hist.axvline(result.p99_us, color="#c44e52", lw=1, ls=":", label=f"p99 {result.p99_us:.1f} µs")
    hist.set_xlabel("latency per check (µs)")
    hist.set_ylabel("checks")
    hist.legend(frameon=False, fontsize=8)
    n = len(us)
    cdf.plot(us, [(i + 1) / n for i in range(n)], color="#4878a8")
    cdf.set_xscale("log")
    cdf.set_xlabel("latency per check (µs, log)")
    cdf.set_ylabel("fraction of checks")
    cdf.grid(alpha=0.3)
    fig.suptitle(f"{result.profile}: {result.checks} checks, {result.checks_per_sec:,.0f} checks/s", fontsize=10)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
