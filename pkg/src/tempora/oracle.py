"""Brute-force re-implementations used only to cross-check the engine.

Nothing here shares code with the closed-form scheduler or the budget
cutoff: the scheduler oracle walks wall-clock time as an explicit
arrival / eviction / pickup state machine, and the cutoff oracle scans
every prefix.  Tests assert the fast paths agree with these exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .discrete import DiscreteConfig, Schedule, ScheduleEvent, VARIANT_BUFFERED
from .trace import MethodTrace


@dataclass(frozen=True)
class OracleConfig:
    """Simulation grid resolution.

    Every duration fed to the walker must be a whole number of ticks;
    otherwise event instants would fall between grid points and the walk
    could not be exact.
    """

    tick_ns: int = 1

    def __post_init__(self) -> None:
        if self.tick_ns <= 0:
            raise ValueError("tick_ns must be positive")


def oracle_discrete(
    trace: MethodTrace, cfg: DiscreteConfig, ocfg: OracleConfig | None = None
) -> Schedule:
    """Time-stepped schedule walker.

    Maintains the pipeline-busy horizon, the single buffer slot and the
    next-arrival pointer, advancing the clock in whole ticks.  Stretches
    with no event are skipped in one multi-tick jump, which is exact
    because every event instant lies on the tick grid (checked on entry
    and re-asserted at every jump).
    """
    ocfg = ocfg or OracleConfig()
    tick = ocfg.tick_ns
    gamma = cfg.gamma_ns
    if gamma % tick:
        raise ValueError(f"gamma {gamma} ns is not a multiple of tick {tick} ns")
    deltas = trace.deltas_ns()
    for i, d in enumerate(deltas, start=1):
        if d % tick:
            raise ValueError(
                f"delta of batch {i} ({d} ns) is not a multiple of tick {tick} ns"
            )

    n = trace.n
    buffered = cfg.variant == VARIANT_BUFFERED
    tau = 0
    free_at = 0
    slot: int | None = None
    slot_arrived = 0
    next_arr = 1
    events: list[ScheduleEvent] = []

    while True:
        candidates = []
        if next_arr <= n:
            candidates.append((next_arr - 1) * gamma)
        if slot is not None:
            candidates.append(max(free_at, tau))
        if not candidates:
            break
        target = min(candidates)
        if target > tau:
            jump = target - tau
            assert jump % tick == 0, "event instant off the tick grid"
            tau = target
            if not buffered and slot is not None and slot_arrived < tau:
                # Strict mode: an unclaimed batch is gone one tick after
                # its arrival instant.
                slot = None
                continue
        if next_arr <= n and (next_arr - 1) * gamma == tau:
            # Arrival: lands in the slot, evicting any occupant.
            slot = next_arr
            slot_arrived = tau
            next_arr += 1
        if slot is not None and free_at <= tau:
            if buffered or slot_arrived == tau:
                start = tau
                finish = start + deltas[slot - 1]
                events.append(ScheduleEvent(slot, start, finish))
                free_at = finish
                slot = None

    return Schedule(
        n=n, gamma_ns=gamma, variant=cfg.variant, events=tuple(events)
    )


def oracle_cutoff(costs_ns: Sequence[int], budget_ns: int) -> int:
    """Largest prefix whose cost sum fits the budget, by scanning every
    prefix with no early exit."""
    best = 0
    for j in range(1, len(costs_ns) + 1):
        total = 0
        for c in costs_ns[:j]:
            total += c
        if total <= budget_ns:
            best = j
    return best
