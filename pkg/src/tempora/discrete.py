"""Discrete protocol: asynchronous arrivals with hard replacement.

Batches arrive on a fixed period ``gamma``; a single-slot buffer holds the
most recent arrival and each new arrival evicts the previous occupant.  A
batch evicted before the pipeline picked it up is served by fallback
predictions and counts as missed.  The final batch is never evicted: once
arrivals stop there is nothing to replace it, so the pipeline drains it late
rather than dropping it.

The ``strict`` variant removes the buffer: a batch is served only if the
pipeline is ready at its arrival instant.  Both variants share the drain
semantics that the pipeline runs to completion after arrivals cease; only
the buffered variant can pick the final batch up late, because only it has
a slot to hold that batch in.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .trace import MethodTrace, accuracy_mean, ns_to_ms_text

VARIANT_BUFFERED = "buffered"
VARIANT_STRICT = "strict"
_VARIANTS = (VARIANT_BUFFERED, VARIANT_STRICT)


@dataclass(frozen=True)
class DiscreteConfig:
    """Arrival period and buffering discipline."""

    gamma_ns: int
    variant: str = VARIANT_BUFFERED
    lambda_ns: int | None = None

    def __post_init__(self) -> None:
        if self.gamma_ns <= 0:
            raise ValueError("gamma_ns must be positive")
        if self.variant not in _VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; expected one of {_VARIANTS}"
            )
        if self.lambda_ns is not None and self.lambda_ns <= 0:
            raise ValueError("lambda_ns must be positive")

    @property
    def utilisation(self) -> float | None:
        """Pressure ratio lambda/gamma when the target latency is known."""
        if self.lambda_ns is None:
            return None
        return self.lambda_ns / self.gamma_ns


def utilisation_to_gamma(lambda_ns: int, rho: float) -> int:
    """Arrival period that realises pressure ``rho`` for a latency target."""
    if lambda_ns <= 0:
        raise ValueError("lambda_ns must be positive")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must be in (0, 1]")
    return round(lambda_ns / rho)


class ScheduleEvent(NamedTuple):
    """One served batch: index, pickup time, finish time."""

    index: int
    start_ns: int
    finish_ns: int


@dataclass(frozen=True)
class Schedule:
    """Served subsequence of a stream under the discrete protocol."""

    n: int
    gamma_ns: int
    variant: str
    events: tuple[ScheduleEvent, ...]

    @property
    def served(self) -> tuple[int, ...]:
        return tuple(ev.index for ev in self.events)

    @property
    def availability(self) -> float:
        return len(self.events) / self.n

    def to_csv(self, path: str | Path) -> None:
        lines = ["index,start_ms,finish_ms"]
        for ev in self.events:
            lines.append(
                f"{ev.index},{ns_to_ms_text(ev.start_ns)},"
                f"{ns_to_ms_text(ev.finish_ns)}"
            )
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")


def simulate(trace: MethodTrace, cfg: DiscreteConfig) -> Schedule:
    """Run the arrival / eviction / pickup recurrence over a trace.

    The first batch arrives at time zero and is always served.  Afterwards
    the pipeline repeatedly frees and picks the freshest batch it can get;
    everything that arrived in between was evicted and counts as missed.

    Buffered: the slot holds the latest arrival, so the pickup lands on the
    last batch that arrived at or before the finish instant; the final batch
    has no successor to evict it and is drained late if needed.  Strict: a
    batch is admitted only at its exact arrival instant, so the pickup waits
    for the next arrival after the finish instant and the run ends when no
    arrival remains.
    """
    gamma = cfg.gamma_ns
    deltas = trace.deltas_ns()
    n = trace.n
    events = [ScheduleEvent(1, 0, deltas[0])]
    prev = 1
    finish = deltas[0]
    while prev < n:
        if cfg.variant == VARIANT_BUFFERED:
            arrival_term = min(finish // gamma + 1, n)
        else:
            arrival_term = -(-finish // gamma) + 1
        cand = max(prev + 1, arrival_term)
        if cand > n:
            break
        start = max(finish, (cand - 1) * gamma)
        finish = start + deltas[cand - 1]
        events.append(ScheduleEvent(cand, start, finish))
        prev = cand
    return Schedule(
        n=n, gamma_ns=cfg.gamma_ns, variant=cfg.variant, events=tuple(events)
    )


@dataclass(frozen=True)
class DiscreteReport:
    """Availability and accuracy-over-served decomposition."""

    availability: float
    served_count: int
    n: int
    served_accuracy: float
    utility: float
    gamma_ns: int
    variant: str


def discrete_utility(
    trace: MethodTrace,
    cfg: DiscreteConfig,
    weighting: str = "per-batch",
    schedule: Schedule | None = None,
) -> DiscreteReport:
    """Utility = availability times mean accuracy over served batches.

    Missed batches fall back to uninformed predictions, modelled as zero
    accuracy, so only the served fraction contributes.
    """
    if schedule is None:
        schedule = simulate(trace, cfg)
    if schedule.n != trace.n:
        raise ValueError(
            f"schedule covers {schedule.n} batches, trace has {trace.n}"
        )
    served = [trace.records[i - 1] for i in schedule.served]
    acc = accuracy_mean(served, weighting)
    availability = schedule.availability
    return DiscreteReport(
        availability=availability,
        served_count=len(served),
        n=trace.n,
        served_accuracy=acc,
        utility=availability * acc,
        gamma_ns=cfg.gamma_ns,
        variant=cfg.variant,
    )
