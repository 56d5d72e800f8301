"""Continuous protocol: a greedy consumer with hyperbolically decaying
patience.

The consumer submits the next batch the moment the previous prediction
returns, so adaptation overhead accumulates directly into waiting time.
Each batch's worth decays with the delay beyond the latency target: at one
threshold past the target, responsiveness has fallen to one half.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

from .trace import MethodTrace


@dataclass(frozen=True)
class ContinuousConfig:
    """Latency target and the delay threshold of the decay."""

    threshold_ns: int
    lambda_ns: int

    def __post_init__(self) -> None:
        if self.lambda_ns <= 0:
            raise ValueError("lambda_ns must be positive")
        if self.threshold_ns <= self.lambda_ns:
            raise ValueError(
                "threshold_ns must exceed lambda_ns; the decay scale is "
                "their difference"
            )


class BatchTiming(NamedTuple):
    """Wait, excess delay and responsiveness of one batch."""

    wait_ns: int
    delay_ns: int
    responsiveness: float


def wait_times(trace: MethodTrace) -> list[tuple[int, int]]:
    """Per-batch (wait, inherited overhead) under the greedy consumer.

    The consumer submits batch i the instant prediction i-1 returns, so
    batch i waits through the adaptation overhead of batch i-1 and then its
    own compute cost.  Overheads never pile up beyond one batch because
    nothing is submitted while the previous response is outstanding.
    """
    out = []
    prev_ell = 0
    for rec in trace.records:
        out.append((prev_ell + rec.e_ns, prev_ell))
        prev_ell = rec.ell_ns
    return out


def decay(delay_ns: int, cfg: ContinuousConfig) -> float:
    """Hyperbolic responsiveness of a batch delayed ``delay_ns`` past the
    target; 1 at no delay, 1/2 at one threshold width."""
    if delay_ns < 0:
        raise ValueError("delay_ns must be >= 0")
    scale = cfg.threshold_ns - cfg.lambda_ns
    return 1.0 / (1.0 + delay_ns / scale)


@dataclass(frozen=True)
class ContinuousReport:
    """Utility with its accuracy / responsiveness decomposition.

    ``utility`` is the mean of per-batch accuracy times responsiveness,
    which equals ``mean_accuracy * mean_responsiveness + covariance``
    (population covariance).  ``alignment`` is the ratio of the utility to
    the product of the two means; 1 means timing and accuracy are
    uncorrelated across the stream.
    """

    mean_accuracy: float
    mean_responsiveness: float
    covariance: float
    alignment: float | None
    utility: float
    timings: tuple[BatchTiming, ...]


def continuous_utility(
    trace: MethodTrace,
    cfg: ContinuousConfig | None = None,
    threshold_ns: int | None = None,
    lambda_override_ns: int | None = None,
) -> ContinuousReport:
    """Evaluate the continuous protocol over a trace.

    The latency target is read from the trace header; passing a full
    ``cfg`` (or ``lambda_override_ns``) with a different target is allowed
    but warns, since mixing targets across sources is usually a mistake.
    """
    if cfg is None:
        if threshold_ns is None:
            raise ValueError("pass either cfg or threshold_ns")
        cfg = ContinuousConfig(
            threshold_ns=threshold_ns,
            lambda_ns=(
                lambda_override_ns
                if lambda_override_ns is not None
                else trace.lambda_ns
            ),
        )
    if cfg.lambda_ns != trace.lambda_ns:
        warnings.warn(
            f"lambda override {cfg.lambda_ns} ns differs from the trace "
            f"header value {trace.lambda_ns} ns",
            stacklevel=2,
        )

    timings = []
    for rec, (wait, _backlog) in zip(trace.records, wait_times(trace)):
        d = max(0, wait - cfg.lambda_ns)
        timings.append(BatchTiming(wait, d, decay(d, cfg)))

    n = trace.n
    accs = [rec.accuracy for rec in trace.records]
    kappas = [t.responsiveness for t in timings]
    utility = sum(a * k for a, k in zip(accs, kappas)) / n
    mean_a = sum(accs) / n
    mean_k = sum(kappas) / n
    cov = sum((a - mean_a) * (k - mean_k) for a, k in zip(accs, kappas)) / n
    denom = mean_a * mean_k
    alignment = utility / denom if denom > 0 else None
    return ContinuousReport(
        mean_accuracy=mean_a,
        mean_responsiveness=mean_k,
        covariance=cov,
        alignment=alignment,
        utility=utility,
        timings=tuple(timings),
    )
