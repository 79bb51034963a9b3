"""Latency benchmark harness.

Runs a query workload through the retrieval pipeline and reports p50/p95
and interquartile range per stage, as JSON and as a human table. Timings
are measured inside the engine (server-side), so client and network
costs never pollute the numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .context import token_estimate
from .engine import Engine
from .search import Query


@dataclass
class StageStats:
    p50_ms: float
    p95_ms: float
    iqr_ms: float
    mean_ms: float

    def to_json(self) -> dict[str, float]:
        return {
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "iqr_ms": self.iqr_ms,
            "mean_ms": self.mean_ms,
        }


STAGES = ("search_ms", "rerank_ms", "construct_ms", "total_ms")


def summarize(samples: Sequence[float]) -> StageStats:
    arr = np.asarray(samples, dtype=np.float64)
    q25, q50, q75, q95 = np.percentile(arr, [25, 50, 75, 95])
    return StageStats(
        p50_ms=float(q50),
        p95_ms=float(q95),
        iqr_ms=float(q75 - q25),
        mean_ms=float(arr.mean()),
    )


def run_bench(
    engine: Engine,
    queries: Sequence[str],
    repeat: int = 1,
    limit: int = 20,
    warmup: int = 3,
) -> dict:
    """Execute the workload; returns {stages: {...}, queries, runs,
    max_context_tokens}."""
    workload = [q for q in queries if q.strip()]
    if not workload:
        raise ValueError("no queries to run")
    for q in workload[:warmup]:
        engine.retrieve(Query(text=q, limit=limit))

    samples: dict[str, list[float]] = {stage: [] for stage in STAGES}
    max_tokens = 0
    for _ in range(repeat):
        for q in workload:
            result = engine.retrieve(Query(text=q, limit=limit))
            for stage in STAGES:
                samples[stage].append(result.timings[stage])
            max_tokens = max(max_tokens, token_estimate(result.context))
    return {
        "queries": len(workload),
        "runs": len(workload) * repeat,
        "limit": limit,
        "max_context_tokens": max_tokens,
        "stages": {stage: summarize(samples[stage]).to_json() for stage in STAGES},
    }


def format_table(report: dict) -> str:
    lines = [
        f"queries: {report['queries']}   runs: {report['runs']}   "
        f"limit: {report['limit']}   max context tokens: {report['max_context_tokens']}",
        f"{'stage':<14}{'p50 ms':>10}{'p95 ms':>10}{'IQR ms':>10}{'mean ms':>10}",
    ]
    for stage in STAGES:
        stats = report["stages"][stage]
        lines.append(
            f"{stage[:-3]:<14}{stats['p50_ms']:>10.2f}{stats['p95_ms']:>10.2f}"
            f"{stats['iqr_ms']:>10.2f}{stats['mean_ms']:>10.2f}"
        )
    return "\n".join(lines)
