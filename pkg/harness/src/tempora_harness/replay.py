"""Echo mode: replay a recorded fixture over the protocol.

Reads the engine's JSONL trace format directly (a header object with
method / lambda_ms / corruption / n, then one record object per line;
frozen tails additionally carry ``cutoff_m``).  Millisecond fields are
kept as exact decimals end to end: echoing a fixture must put the very
same quantities back on the wire, and a detour through binary floats
would corrupt them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from .protocol import BatchReply, CallbackError


class FixtureError(ValueError):
    """Malformed or inconsistent fixture file."""


@dataclass(frozen=True)
class FixtureRecord:
    index: int
    e_ms: Decimal
    ell_ms: Decimal
    batch_size: int
    correct: int

    def reply(self) -> BatchReply:
        return (self.e_ms, self.ell_ms, self.batch_size, self.correct)


@dataclass(frozen=True)
class Fixture:
    """A recorded stream: one record per batch, indices 1..n."""

    method: str
    lambda_ms: Decimal
    corruption: str | None
    records: tuple[FixtureRecord, ...]

    @property
    def n(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class FrozenTail:
    """Re-recorded batches cutoff_m+1..last with adaptation disabled."""

    cutoff_m: int
    method: str | None
    corruption: str | None
    records: tuple[FixtureRecord, ...]

    @property
    def last_index(self) -> int:
        return self.records[-1].index

    def record_for(self, index: int) -> FixtureRecord:
        return self.records[index - self.cutoff_m - 1]


def _parse_line(line: str, where: str) -> dict:
    try:
        obj = json.loads(line, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{where}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FixtureError(f"{where}: expected a JSON object")
    return obj


def _field(obj: dict, key: str, where: str):
    if key not in obj:
        raise FixtureError(f"{where}: missing field '{key}'")
    return obj[key]


def _int_field(obj: dict, key: str, where: str) -> int:
    value = _field(obj, key, where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise FixtureError(f"{where}: field '{key}' must be an integer")
    return value


def _ms_field(obj: dict, key: str, where: str) -> Decimal:
    value = _field(obj, key, where)
    # json parsed with parse_float=Decimal: numeric fields arrive as int or
    # Decimal, never float.
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        raise FixtureError(f"{where}: field '{key}' must be a decimal number")
    return Decimal(value)


def _read_lines(path: Path) -> tuple[dict, list[FixtureRecord]]:
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise FixtureError(f"{path}: cannot read: {exc}") from exc
    if not lines:
        raise FixtureError(f"{path}: empty file")
    header = _parse_line(lines[0], f"{path}: header")
    records = []
    for row, ln in enumerate(lines[1:], start=1):
        where = f"{path}: row {row}"
        obj = _parse_line(ln, where)
        records.append(FixtureRecord(
            index=_int_field(obj, "index", where),
            e_ms=_ms_field(obj, "e_ms", where),
            ell_ms=_ms_field(obj, "ell_ms", where),
            batch_size=_int_field(obj, "batch_size", where),
            correct=_int_field(obj, "correct", where),
        ))
    return header, records


def _check_contiguous(records: list[FixtureRecord], first: int, where: str) -> None:
    if not records:
        raise FixtureError(f"{where}: no records")
    for offset, rec in enumerate(records):
        if rec.index != first + offset:
            raise FixtureError(
                f"{where}: record {offset + 1} has index {rec.index}, "
                f"expected {first + offset}"
            )


def _corruption(header: dict, where: str) -> str | None:
    value = header.get("corruption")
    if value is not None and not isinstance(value, str):
        raise FixtureError(f"{where}: field 'corruption' must be a string or null")
    return value


def load_fixture(path: str | Path) -> Fixture:
    path = Path(path)
    header, records = _read_lines(path)
    where = f"{path}: header"
    if "cutoff_m" in header:
        raise FixtureError(
            f"{path}: file is a frozen tail (has cutoff_m), not a trace"
        )
    method = _field(header, "method", where)
    if not isinstance(method, str):
        raise FixtureError(f"{where}: field 'method' must be a string")
    _check_contiguous(records, 1, str(path))
    declared = header.get("n")
    if declared is not None and declared != len(records):
        raise FixtureError(
            f"{path}: header declares n={declared} but file has "
            f"{len(records)} records"
        )
    return Fixture(
        method=method,
        lambda_ms=_ms_field(header, "lambda_ms", where),
        corruption=_corruption(header, where),
        records=tuple(records),
    )


def load_frozen_tail(path: str | Path) -> FrozenTail:
    path = Path(path)
    header, records = _read_lines(path)
    where = f"{path}: header"
    cutoff_m = _int_field(header, "cutoff_m", where)
    if cutoff_m < 0:
        raise FixtureError(f"{where}: cutoff_m must be >= 0")
    _check_contiguous(records, cutoff_m + 1, str(path))
    method = header.get("method") or None
    if method is not None and not isinstance(method, str):
        raise FixtureError(f"{where}: field 'method' must be a string")
    return FrozenTail(
        cutoff_m=cutoff_m,
        method=method,
        corruption=_corruption(header, where),
        records=tuple(records),
    )


class EchoCallbacks:
    """Replays a fixture; state mirrors the engine's own file-replay source.

    Adapt requests read straight from the trace.  The first frozen request
    fixes the cutoff: a frozen request for a batch that was already served
    in adapt mode rolls the cutoff back to the batch before it (that
    adaptation did not fit the budget).  Frozen batches then come from the
    tail recorded at that cutoff, or failing that the nearest earlier one.
    """

    def __init__(self, fixture: Fixture, tails: tuple[FrozenTail, ...] = ()):
        for tail in tails:
            if tail.last_index != fixture.n:
                raise FixtureError(
                    f"frozen tail for cutoff {tail.cutoff_m} ends at batch "
                    f"{tail.last_index}, expected {fixture.n}"
                )
        ordered = sorted(tails, key=lambda t: t.cutoff_m)
        for a, b in zip(ordered, ordered[1:]):
            if a.cutoff_m == b.cutoff_m:
                raise FixtureError(
                    f"duplicate frozen tail for cutoff {a.cutoff_m}"
                )
        self.fixture = fixture
        self.tails = tuple(ordered)
        self.on_reset()

    def on_reset(self) -> None:
        self._last_adapt = 0
        self._frozen_seen = False

    def on_adapt(self, index: int) -> BatchReply:
        if self._frozen_seen:
            raise CallbackError(
                f"adapt request for batch {index} after freezing"
            )
        self._last_adapt = max(self._last_adapt, index)
        return self.fixture.records[index - 1].reply()

    def on_frozen(self, index: int) -> BatchReply:
        if index <= self._last_adapt:
            # Rollback: this batch's adaptation did not fit the budget.
            self._last_adapt = index - 1
        self._frozen_seen = True
        chosen = None
        for tail in self.tails:
            if tail.cutoff_m <= self._last_adapt:
                chosen = tail
        if chosen is None or chosen.cutoff_m > index - 1:
            raise CallbackError(
                f"no frozen tail covers batch {index} at cutoff "
                f"{self._last_adapt}"
            )
        return chosen.record_for(index).reply()
