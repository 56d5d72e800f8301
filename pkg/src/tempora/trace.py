"""Trace data model and exact-time I/O.

Latency traces are recorded per batch: compute cost ``e`` and adaptation
overhead ``ell``, both in milliseconds in files and integer nanoseconds in
memory.  File values are decimal text and are converted by decimal scaling,
never through a binary float, so round-trips are exact.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NS_PER_MS = 10**6

WEIGHTING_PER_BATCH = "per-batch"
WEIGHTING_PER_SAMPLE = "per-sample"
_WEIGHTINGS = (WEIGHTING_PER_BATCH, WEIGHTING_PER_SAMPLE)


class TraceError(ValueError):
    """Malformed or inconsistent trace data."""


def ms_to_ns(value: str | int | Decimal) -> int:
    """Convert a decimal millisecond quantity to integer nanoseconds.

    Accepts decimal text, an int, or a ``Decimal``.  Binary floats are
    rejected: they cannot represent most decimal fractions and would turn an
    exact file value into an approximation.  Values finer than one
    nanosecond are rejected rather than rounded.
    """
    if isinstance(value, float):
        raise TypeError(
            "binary float rejected; pass decimal text, int or Decimal"
        )
    try:
        scaled = Decimal(value).scaleb(6)
    except InvalidOperation as exc:
        raise TraceError(f"not a decimal quantity: {value!r}") from exc
    if not scaled.is_finite():
        raise TraceError(f"not a finite quantity: {value!r}")
    ns = int(scaled.to_integral_value())
    if Decimal(ns) != scaled:
        raise TraceError(f"sub-nanosecond precision in {value!r}")
    return ns


def ns_to_ms_text(ns: int) -> str:
    """Render integer nanoseconds as exact decimal milliseconds."""
    sign = "-" if ns < 0 else ""
    whole, frac = divmod(abs(ns), NS_PER_MS)
    if frac == 0:
        return f"{sign}{whole}"
    digits = f"{frac:06d}".rstrip("0")
    return f"{sign}{whole}.{digits}"


@dataclass(frozen=True)
class BatchRecord:
    """One batch of the recorded stream.

    ``e_ns`` is the forward-pass cost, ``ell_ns`` the adaptation overhead,
    ``correct`` the number of correctly predicted samples in the batch.
    """

    index: int
    e_ns: int
    ell_ns: int
    batch_size: int
    correct: int

    @property
    def delta_ns(self) -> int:
        """Total service time of the batch."""
        return self.e_ns + self.ell_ns

    @property
    def accuracy(self) -> float:
        return self.correct / self.batch_size


def _check_records(records: Sequence[BatchRecord], first_index: int) -> None:
    if not records:
        raise TraceError("empty record list")
    for row, rec in enumerate(records, start=1):
        expected = first_index + row - 1
        if rec.index != expected:
            raise TraceError(f"non-contiguous index at row {row}")
        if rec.e_ns < 0:
            raise TraceError(f"row {row}: negative value for 'e_ms'")
        if rec.ell_ns < 0:
            raise TraceError(f"row {row}: negative value for 'ell_ms'")
        if rec.batch_size < 1:
            raise TraceError(f"row {row}: batch_size must be >= 1")
        if not 0 <= rec.correct <= rec.batch_size:
            raise TraceError(
                f"row {row}: correct {rec.correct} outside [0, "
                f"{rec.batch_size}]"
            )


def _check_uniform_sizes(records: Sequence[BatchRecord]) -> None:
    size = records[0].batch_size
    for row, rec in enumerate(records, start=1):
        if rec.batch_size != size:
            raise TraceError(
                f"varying batch_size at row {row}; "
                "pass relaxed_sizes=True to allow"
            )


@dataclass(frozen=True)
class MethodTrace:
    """Recorded stream for one method on one corruption.

    ``lambda_ns`` is the deployment latency target the stream was recorded
    against; protocols read it from here unless explicitly overridden.
    """

    method: str
    lambda_ns: int
    records: tuple[BatchRecord, ...]
    corruption: str | None = None
    relaxed_sizes: bool = False

    def __post_init__(self) -> None:
        if not self.method:
            raise TraceError("empty method label")
        if self.lambda_ns <= 0:
            raise TraceError("lambda_ns must be positive")
        object.__setattr__(self, "records", tuple(self.records))
        _check_records(self.records, first_index=1)
        if not self.relaxed_sizes:
            _check_uniform_sizes(self.records)

    @property
    def n(self) -> int:
        return len(self.records)

    def deltas_ns(self) -> list[int]:
        return [rec.delta_ns for rec in self.records]

    def mean_delta_ns(self) -> float:
        return statistics.fmean(rec.delta_ns for rec in self.records)


@dataclass(frozen=True)
class FrozenRun:
    """Re-recorded tail of a stream after adaptation stops.

    The run covers batches ``cutoff_m + 1 .. N`` of the parent stream, all
    evaluated with the model state reached at batch ``cutoff_m``.
    """

    cutoff_m: int
    records: tuple[BatchRecord, ...]
    method: str | None = None
    corruption: str | None = None

    def __post_init__(self) -> None:
        if self.cutoff_m < 0:
            raise TraceError("cutoff_m must be >= 0")
        object.__setattr__(self, "records", tuple(self.records))
        _check_records(self.records, first_index=self.cutoff_m + 1)

    @property
    def last_index(self) -> int:
        return self.records[-1].index

    def record_for(self, index: int) -> BatchRecord:
        if not self.cutoff_m < index <= self.last_index:
            raise TraceError(
                f"frozen run with cutoff {self.cutoff_m} does not cover "
                f"batch {index}"
            )
        return self.records[index - self.cutoff_m - 1]


@dataclass(frozen=True)
class TraceBundle:
    """A trace plus the frozen tails recorded for it."""

    trace: MethodTrace
    frozen_runs: tuple[FrozenRun, ...] = ()

    def __post_init__(self) -> None:
        runs = tuple(sorted(self.frozen_runs, key=lambda r: r.cutoff_m))
        object.__setattr__(self, "frozen_runs", runs)
        seen: set[int] = set()
        for run in runs:
            if run.cutoff_m in seen:
                raise TraceError(f"duplicate frozen run for cutoff {run.cutoff_m}")
            seen.add(run.cutoff_m)
            if run.cutoff_m >= self.trace.n:
                raise TraceError(
                    f"frozen run cutoff {run.cutoff_m} is past the end of a "
                    f"{self.trace.n}-batch trace"
                )
            if run.last_index != self.trace.n:
                raise TraceError(
                    f"frozen run for cutoff {run.cutoff_m} ends at batch "
                    f"{run.last_index}, expected {self.trace.n}"
                )

    def run_for_cutoff(self, cutoff_m: int) -> FrozenRun | None:
        """Exact match, else the nearest earlier cutoff, else None."""
        best = None
        for run in self.frozen_runs:
            if run.cutoff_m == cutoff_m:
                return run
            if run.cutoff_m < cutoff_m:
                best = run
        return best


def accuracy_mean(
    records: Iterable[BatchRecord], weighting: str = WEIGHTING_PER_BATCH
) -> float:
    """Mean accuracy of a set of batches.

    ``per-batch`` averages the batch accuracies unweighted; ``per-sample``
    pools correct counts over pooled batch sizes.  The two agree when every
    batch has the same size.
    """
    recs = list(records)
    if not recs:
        raise TraceError("accuracy of an empty record set is undefined")
    if weighting == WEIGHTING_PER_BATCH:
        return statistics.fmean(r.accuracy for r in recs)
    if weighting == WEIGHTING_PER_SAMPLE:
        return sum(r.correct for r in recs) / sum(r.batch_size for r in recs)
    raise ValueError(f"unknown weighting {weighting!r}; expected one of {_WEIGHTINGS}")


def estimate_lambda(samples_ns: Sequence[int], k_sigma: float = 6.0) -> int:
    """Latency target from a recording of the non-adaptive baseline.

    Returns the sample mean plus ``k_sigma`` standard deviations, rounded to
    the nearest nanosecond.  The headroom absorbs jitter so the target is
    missed only by genuinely slower processing, not by noise.
    """
    if not samples_ns:
        raise TraceError("no samples")
    mean = statistics.fmean(samples_ns)
    sd = statistics.stdev(samples_ns) if len(samples_ns) > 1 else 0.0
    return round(mean + k_sigma * sd)


# --- file formats ---------------------------------------------------------

_RECORD_FIELDS = ("index", "e_ms", "ell_ms", "batch_size", "correct")


def _record_line(rec: BatchRecord) -> str:
    return (
        f'{{"index": {rec.index}, "e_ms": {ns_to_ms_text(rec.e_ns)}, '
        f'"ell_ms": {ns_to_ms_text(rec.ell_ns)}, '
        f'"batch_size": {rec.batch_size}, "correct": {rec.correct}}}'
    )


def _header_line(
    method: str, lambda_ns: int, corruption: str | None, n: int,
    cutoff_m: int | None = None,
) -> str:
    parts = [
        f'"method": {json.dumps(method)}',
        f'"lambda_ms": {ns_to_ms_text(lambda_ns)}',
        f'"corruption": {json.dumps(corruption)}',
        f'"n": {n}',
    ]
    if cutoff_m is not None:
        parts.append(f'"cutoff_m": {cutoff_m}')
    return "{" + ", ".join(parts) + "}"


def _parse_json_line(line: str, where: str) -> dict:
    try:
        obj = json.loads(line, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise TraceError(f"{where}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise TraceError(f"{where}: expected a JSON object")
    return obj


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise TraceError(f"{where}: missing field '{key}'")
    return obj[key]


def _as_int(value, key: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TraceError(f"{where}: field '{key}' must be an integer")
    return value


def _as_ms_ns(value, key: str, where: str) -> int:
    if isinstance(value, float):
        raise TraceError(f"{where}: field '{key}' lost precision in parsing")
    if not isinstance(value, (int, Decimal, str)):
        raise TraceError(f"{where}: field '{key}' must be a decimal quantity")
    try:
        return ms_to_ns(value)
    except TraceError as exc:
        raise TraceError(f"{where}: field '{key}': {exc}") from exc


def _record_from_mapping(obj: dict, where: str) -> BatchRecord:
    return BatchRecord(
        index=_as_int(_require(obj, "index", where), "index", where),
        e_ns=_as_ms_ns(_require(obj, "e_ms", where), "e_ms", where),
        ell_ns=_as_ms_ns(_require(obj, "ell_ms", where), "ell_ms", where),
        batch_size=_as_int(
            _require(obj, "batch_size", where), "batch_size", where
        ),
        correct=_as_int(_require(obj, "correct", where), "correct", where),
    )


def _read_jsonl(path: Path) -> tuple[dict, list[BatchRecord]]:
    lines = [
        ln for ln in path.read_text().splitlines() if ln.strip()
    ]
    if not lines:
        raise TraceError(f"{path}: empty file")
    header = _parse_json_line(lines[0], "header")
    records = [
        _record_from_mapping(_parse_json_line(ln, f"row {row}"), f"row {row}")
        for row, ln in enumerate(lines[1:], start=1)
    ]
    return header, records


def _write_lines(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _csv_meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _read_csv(path: Path) -> tuple[dict, list[BatchRecord]]:
    import csv

    meta_path = _csv_meta_path(path)
    if not meta_path.exists():
        raise TraceError(f"{path}: missing sidecar {meta_path.name}")
    header = _parse_json_line(meta_path.read_text(), "header")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for col in _RECORD_FIELDS:
            if col not in cols:
                raise TraceError(f"{path}: missing column '{col}'")
        records = []
        for row, raw in enumerate(reader, start=1):
            where = f"row {row}"
            obj = {}
            for key in _RECORD_FIELDS:
                text = (raw.get(key) or "").strip()
                if not text:
                    raise TraceError(f"{where}: missing field '{key}'")
                if key in ("e_ms", "ell_ms"):
                    obj[key] = Decimal(text) if _is_decimal(text, where, key) else None
                else:
                    try:
                        obj[key] = int(text)
                    except ValueError:
                        raise TraceError(
                            f"{where}: field '{key}' must be an integer"
                        ) from None
            records.append(_record_from_mapping(obj, where))
    return header, records


def _is_decimal(text: str, where: str, key: str) -> bool:
    try:
        Decimal(text)
    except InvalidOperation:
        raise TraceError(
            f"{where}: field '{key}' is not a decimal quantity"
        ) from None
    return True


def _csv_lines(records: Sequence[BatchRecord]) -> list[str]:
    lines = [",".join(_RECORD_FIELDS)]
    for rec in records:
        lines.append(
            f"{rec.index},{ns_to_ms_text(rec.e_ns)},"
            f"{ns_to_ms_text(rec.ell_ns)},{rec.batch_size},{rec.correct}"
        )
    return lines


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("jsonl", "csv"):
            raise ValueError(f"unknown trace format {fmt!r}")
        return fmt
    if path.suffix == ".csv":
        return "csv"
    return "jsonl"


def write_trace(trace: MethodTrace, path: str | Path, fmt: str | None = None) -> None:
    """Write a trace as JSONL (header line + one record per line) or CSV.

    The CSV form carries the header in a ``<name>.meta.json`` sidecar.
    """
    path = Path(path)
    header = _header_line(trace.method, trace.lambda_ns, trace.corruption, trace.n)
    if _infer_format(path, fmt) == "jsonl":
        _write_lines(path, [header] + [_record_line(r) for r in trace.records])
    else:
        _write_lines(path, _csv_lines(trace.records))
        _write_lines(_csv_meta_path(path), [header])


def load_trace(path: str | Path, fmt: str | None = None) -> MethodTrace:
    """Load a trace file written by :func:`write_trace`."""
    path = Path(path)
    header, records = (
        _read_csv(path) if _infer_format(path, fmt) == "csv" else _read_jsonl(path)
    )
    if "cutoff_m" in header:
        raise TraceError(
            f"{path}: file is a frozen run (has cutoff_m); use load_frozen_run"
        )
    trace = MethodTrace(
        method=str(_require(header, "method", "header")),
        lambda_ns=_as_ms_ns(_require(header, "lambda_ms", "header"), "lambda_ms", "header"),
        records=tuple(records),
        corruption=_optional_str(header.get("corruption"), "corruption"),
    )
    declared = header.get("n")
    if declared is not None and _as_int(declared, "n", "header") != trace.n:
        raise TraceError(
            f"header declares n={declared} but file has {trace.n} records"
        )
    return trace


def _optional_str(value, key: str) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise TraceError(f"header: field '{key}' must be a string or null")
    return value


def write_frozen_run(run: FrozenRun, path: str | Path, *, lambda_ns: int,
                     fmt: str | None = None) -> None:
    """Write a frozen-tail run; the header carries ``cutoff_m``."""
    path = Path(path)
    header = _header_line(
        run.method or "", lambda_ns, run.corruption,
        len(run.records), cutoff_m=run.cutoff_m,
    )
    if _infer_format(path, fmt) == "jsonl":
        _write_lines(path, [header] + [_record_line(r) for r in run.records])
    else:
        _write_lines(path, _csv_lines(run.records))
        _write_lines(_csv_meta_path(path), [header])


def load_frozen_run(path: str | Path, fmt: str | None = None) -> FrozenRun:
    path = Path(path)
    header, records = (
        _read_csv(path) if _infer_format(path, fmt) == "csv" else _read_jsonl(path)
    )
    if "cutoff_m" not in header:
        raise TraceError(f"{path}: not a frozen run (no cutoff_m in header)")
    return FrozenRun(
        cutoff_m=_as_int(header["cutoff_m"], "cutoff_m", "header"),
        records=tuple(records),
        method=str(header.get("method") or "") or None,
        corruption=_optional_str(header.get("corruption"), "corruption"),
    )


# --- synthetic generation -------------------------------------------------


@dataclass(frozen=True)
class AccuracyCurve:
    """Accuracy level as a function of batch index.

    ``constant`` holds ``start``; ``ramp`` moves linearly from ``start`` to
    ``end`` across the stream; ``step`` jumps from ``start`` to ``end`` at
    batch ``step_at``.
    """

    shape: str = "constant"
    start: float = 0.2
    end: float | None = None
    step_at: int | None = None

    def level(self, index: int, n: int) -> float:
        if self.shape == "constant":
            return self.start
        end = self.end if self.end is not None else self.start
        if self.shape == "ramp":
            if n == 1:
                return end
            return self.start + (end - self.start) * (index - 1) / (n - 1)
        if self.shape == "step":
            at = self.step_at if self.step_at is not None else (n // 2 + 1)
            return end if index >= at else self.start
        raise ValueError(f"unknown accuracy curve shape {self.shape!r}")


@dataclass(frozen=True)
class SynthProfile:
    """Latency and accuracy profile for synthetic trace generation."""

    name: str
    e_mean_ns: int
    ell_mean_ns: int
    jitter_sd_ns: int
    accuracy: AccuracyCurve
    lambda_ns: int = 39_900_000
    batch_size: int = 64


def _preset(name: str, e_ms: str, ell_ms: str, jitter_ms: str, acc: float) -> SynthProfile:
    return SynthProfile(
        name=name,
        e_mean_ns=ms_to_ns(e_ms),
        ell_mean_ns=ms_to_ns(ell_ms),
        jitter_sd_ns=ms_to_ns(jitter_ms),
        accuracy=AccuracyCurve(start=acc),
    )


# Calibrated to the measured per-batch cost/overhead means and the offline
# accuracy level of each reference method.  Gradient-free methods carry no
# adaptation overhead and low jitter; gradient-based ones backpropagate and
# jitter more.
PRESETS: dict[str, SynthProfile] = {
    p.name: p
    for p in (
        _preset("standard-table2", "38.7", "0", "1", 0.1816),
        _preset("adabn-table2", "41.1", "0", "1", 0.3172),
        _preset("lame-table2", "40.3", "0", "1", 0.1740),
        _preset("neo-table2", "38.8", "0", "1", 0.2214),
        _preset("tent-table2", "41.1", "56.1", "4", 0.4288),
        _preset("eta-table2", "41.1", "56.6", "4", 0.4835),
        _preset("shot-im-table2", "41.1", "79.8", "4", 0.4243),
        _preset("sar-table2", "41.1", "154.1", "4", 0.4414),
    )
}


def _draw_latency(rng: np.random.Generator, mean_ns: int, sd_ns: int) -> int:
    if mean_ns == 0:
        return 0
    # Gaussian jitter truncated at zero; means sit far above 0 so the
    # truncation never biases the presets.
    return max(0, round(rng.normal(mean_ns, sd_ns)))


Seed = int | Sequence[int]


def gen_synthetic(
    profile: SynthProfile,
    n: int,
    seed: Seed,
    corruption: str | None = None,
    sampling: str = "binomial",
) -> MethodTrace:
    """Generate a deterministic synthetic trace from a profile.

    ``sampling='binomial'`` draws per-batch correct counts from the curve
    level; ``'expected'`` rounds ``level * batch_size`` so the realised
    accuracy is noise-free.  The same (profile, n, seed) always produces the
    same trace.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(1, n + 1):
        e = _draw_latency(rng, profile.e_mean_ns, profile.jitter_sd_ns)
        ell = _draw_latency(rng, profile.ell_mean_ns, profile.jitter_sd_ns)
        p = min(1.0, max(0.0, profile.accuracy.level(i, n)))
        if sampling == "binomial":
            correct = int(rng.binomial(profile.batch_size, p))
        elif sampling == "expected":
            correct = round(p * profile.batch_size)
        else:
            raise ValueError(f"unknown sampling {sampling!r}")
        records.append(
            BatchRecord(
                index=i, e_ns=e, ell_ns=ell,
                batch_size=profile.batch_size, correct=correct,
            )
        )
    return MethodTrace(
        method=profile.name,
        lambda_ns=profile.lambda_ns,
        records=tuple(records),
        corruption=corruption,
    )


def with_accuracy(profile: SynthProfile, curve: AccuracyCurve) -> SynthProfile:
    return replace(profile, accuracy=curve)


def gen_frozen_run(
    profile: SynthProfile,
    trace: MethodTrace,
    cutoff_m: int,
    seed: Seed,
    frozen_level: float | None = None,
    sampling: str = "binomial",
) -> FrozenRun:
    """Synthesise the frozen tail for a trace at one cutoff.

    The frozen model stops adapting, so the tail carries no adaptation
    overhead and holds the accuracy level reached at the cutoff (batch 0
    means the never-adapted level), overridable via ``frozen_level``.
    Deterministic in (seed, cutoff_m).
    """
    n = trace.n
    if not 0 <= cutoff_m < n:
        raise ValueError(f"cutoff_m {cutoff_m} outside 0..{n - 1}")
    if frozen_level is None:
        anchor = cutoff_m if cutoff_m > 0 else 1
        frozen_level = profile.accuracy.level(anchor, n)
    frozen_level = min(1.0, max(0.0, frozen_level))
    seed_seq = [seed] if isinstance(seed, int) else list(seed)
    rng = np.random.default_rng([*seed_seq, cutoff_m])
    records = []
    for i in range(cutoff_m + 1, n + 1):
        e = _draw_latency(rng, profile.e_mean_ns, profile.jitter_sd_ns)
        if sampling == "binomial":
            correct = int(rng.binomial(profile.batch_size, frozen_level))
        elif sampling == "expected":
            correct = round(frozen_level * profile.batch_size)
        else:
            raise ValueError(f"unknown sampling {sampling!r}")
        records.append(
            BatchRecord(
                index=i, e_ns=e, ell_ns=0,
                batch_size=profile.batch_size, correct=correct,
            )
        )
    return FrozenRun(
        cutoff_m=cutoff_m,
        records=tuple(records),
        method=trace.method,
        corruption=trace.corruption,
    )
