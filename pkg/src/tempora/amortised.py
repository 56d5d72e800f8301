"""Amortised protocol: a finite overhead budget spent greedily from the
front of the stream.

Each batch's overhead cost is its service time beyond the latency target.
Adaptation runs until the accumulated cost would exceed the budget, then
the model is frozen for the rest of the stream.  Utility blends the
accuracy of the adapted prefix with the accuracy the frozen model achieves
on the tail.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .trace import TraceBundle, WEIGHTING_PER_BATCH, accuracy_mean


class AmortisedError(ValueError):
    """Amortised evaluation could not be completed."""


@dataclass(frozen=True)
class AmortisedConfig:
    """Overhead budget and the latency target costs are measured against."""

    budget_ns: int
    lambda_ns: int

    def __post_init__(self) -> None:
        if self.budget_ns < 0:
            raise ValueError("budget_ns must be >= 0")
        if self.lambda_ns <= 0:
            raise ValueError("lambda_ns must be positive")


def overheads(
    deltas_ns: Sequence[int], lambda_ns: int, clamp: bool = True
) -> list[int]:
    """Per-batch overhead cost: service time beyond the target.

    Batches faster than the target cost nothing by default.  ``clamp=False``
    keeps negative costs, letting fast batches refund budget; that variant
    exists for sensitivity checks and is not used by the protocol.
    """
    if clamp:
        return [max(0, d - lambda_ns) for d in deltas_ns]
    return [d - lambda_ns for d in deltas_ns]


def cutoff(costs_ns: Sequence[int], budget_ns: int) -> int:
    """Largest batch index whose prefix cost the budget still covers (0 if
    even the first batch does not fit).

    Costs are spent strictly in stream order.  The scan runs the whole
    sequence rather than stopping at the first overflow so that raw
    (unclamped) costs, which may be negative, are still handled per the
    max-prefix definition.
    """
    total = 0
    m = 0
    for j, c in enumerate(costs_ns, start=1):
        total += c
        if total <= budget_ns:
            m = j
    return m


@dataclass(frozen=True)
class AmortisedReport:
    """Utility with its adapted / frozen decomposition."""

    cutoff_m: int
    n: int
    adapt_fraction: float
    adapt_accuracy: float | None
    frozen_accuracy: float | None
    frozen_source: str
    utility: float
    budget_ns: int
    budget_spent_ns: int


def amortised_utility(
    bundle: TraceBundle,
    cfg: AmortisedConfig,
    frozen_constant: float | None = None,
    weighting: str = WEIGHTING_PER_BATCH,
) -> AmortisedReport:
    """Evaluate the amortised protocol over a trace bundle.

    The frozen-phase accuracy comes from, in order of preference: a frozen
    run recorded at exactly the computed cutoff; the nearest frozen run
    with an earlier cutoff (with a warning, since the model state is then
    slightly staler than the protocol implies); the ``frozen_constant``
    fallback.  If none is available the evaluation fails rather than
    guessing.
    """
    trace = bundle.trace
    costs = overheads(trace.deltas_ns(), cfg.lambda_ns)
    m = cutoff(costs, cfg.budget_ns)
    n = trace.n
    beta = m / n
    spent = sum(costs[:m])

    adapt_acc = (
        accuracy_mean(trace.records[:m], weighting) if m > 0 else None
    )

    if m == n:
        frozen_acc = None
        frozen_source = "none"
        utility = adapt_acc if adapt_acc is not None else 0.0
    else:
        run = bundle.run_for_cutoff(m)
        if run is not None:
            if run.cutoff_m != m:
                warnings.warn(
                    f"no frozen run at cutoff {m}; using the nearest "
                    f"earlier one (cutoff {run.cutoff_m})",
                    stacklevel=2,
                )
            tail = [run.record_for(i) for i in range(m + 1, n + 1)]
            frozen_acc = accuracy_mean(tail, weighting)
            frozen_source = "frozen_run"
        elif frozen_constant is not None:
            if not 0.0 <= frozen_constant <= 1.0:
                raise AmortisedError(
                    f"frozen_constant {frozen_constant} outside [0, 1]"
                )
            frozen_acc = frozen_constant
            frozen_source = "constant"
        else:
            raise AmortisedError(
                f"no frozen accuracy available for cutoff {m}: the bundle "
                "has no usable frozen run and no frozen_constant was given"
            )
        adapted_term = adapt_acc if adapt_acc is not None else 0.0
        utility = beta * adapted_term + (1.0 - beta) * frozen_acc

    return AmortisedReport(
        cutoff_m=m,
        n=n,
        adapt_fraction=beta,
        adapt_accuracy=adapt_acc,
        frozen_accuracy=frozen_acc,
        frozen_source=frozen_source,
        utility=utility,
        budget_ns=cfg.budget_ns,
        budget_spent_ns=spent,
    )


@dataclass(frozen=True)
class ParetoPoint:
    budget_ns: int
    utility: float
    method: str


def pareto_frontier(
    points: Sequence[tuple[int, float, str] | ParetoPoint],
) -> list[ParetoPoint]:
    """Non-dominated subset of (budget, utility) points.

    A point is dominated when another point spends no more budget and
    achieves no less utility, with at least one strict.  Exact duplicates
    survive together.  Output sorted by budget, then utility, then label.
    """
    pts = [p if isinstance(p, ParetoPoint) else ParetoPoint(*p) for p in points]
    if not pts:
        raise ValueError("no points")
    keep = []
    for p in pts:
        dominated = any(
            q.budget_ns <= p.budget_ns
            and q.utility >= p.utility
            and (q.budget_ns < p.budget_ns or q.utility > p.utility)
            for q in pts
        )
        if not dominated:
            keep.append(p)
    return sorted(keep, key=lambda p: (p.budget_ns, p.utility, p.method))


def _ns_to_s_text(ns: int) -> str:
    whole, frac = divmod(ns, 10**9)
    if frac == 0:
        return str(whole)
    return f"{whole}.{f'{frac:09d}'.rstrip('0')}"


def frontier_to_csv(
    points: Sequence[ParetoPoint], frontier: Sequence[ParetoPoint],
    path: str | Path,
) -> None:
    """Plot-ready dump of all points with an on_frontier flag."""
    on = {(p.budget_ns, p.utility, p.method) for p in frontier}
    lines = ["budget_s,utility,method,on_frontier"]
    for p in sorted(points, key=lambda p: (p.budget_ns, p.method)):
        flag = int((p.budget_ns, p.utility, p.method) in on)
        lines.append(
            f"{_ns_to_s_text(p.budget_ns)},{p.utility!r},{p.method},{flag}"
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
