"""Set-based retrieval metrics and latency summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    true_pos: int
    false_pos: int
    false_neg: int


@dataclass
class LatencyReport:
    p50: float  # milliseconds
    p90: float
    p99: float
    mean: float
    per_stage_means: dict[str, float] = field(default_factory=dict)
    sample_count: int = 0

    def to_dict(self) -> dict:
        return {
            "p50_ms": self.p50,
            "p90_ms": self.p90,
            "p99_ms": self.p99,
            "mean_ms": self.mean,
            "per_stage_means_ms": dict(self.per_stage_means),
            "sample_count": self.sample_count,
        }


def precision_recall(predicted: set, truth: set) -> Metrics:
    """Exact set precision/recall.

    The 0/0 cases resolve to 1.0 only when both sides are empty (an empty
    prediction of an empty truth is perfect); an empty prediction against a
    nonempty truth scores 0 on both, and symmetrically for recall.
    """
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if not truth else 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if not predicted else 0.0
    return Metrics(
        precision=precision, recall=recall, true_pos=tp, false_pos=fp, false_neg=fn
    )


def nearest_rank_percentile(samples: list[float], p: float) -> float:
    """Smallest sample at or above the target rank: rank = ceil(p/100 * n)."""
    if not samples:
        raise ValueError("no samples")
    if not 0 < p <= 100:
        raise ValueError("percentile must be in (0, 100]")
    ordered = sorted(samples)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[rank - 1]


def latency_report(
    samples_ms: list[float], per_stage_totals_us: dict[str, int]
) -> LatencyReport:
    n = len(samples_ms)
    if n == 0:
        raise ValueError("latency report needs at least one sample")
    per_stage_means = {
        stage: (total / n) / 1000.0 for stage, total in per_stage_totals_us.items()
    }
    return LatencyReport(
        p50=nearest_rank_percentile(samples_ms, 50),
        p90=nearest_rank_percentile(samples_ms, 90),
        p99=nearest_rank_percentile(samples_ms, 99),
        mean=sum(samples_ms) / n,
        per_stage_means=per_stage_means,
        sample_count=n,
    )
