"""Batch sources for the protocol drivers: file replay or a live child
process speaking a line protocol.

Wire protocol, one message per line over the child's stdin/stdout:

    engine -> child   HELLO method=<t> lambda_ms=<d> n=<int> protocol=<tag>
                      STEP index=<int> mode=<adapt|frozen>
                      BYE
    child -> engine   READY
                      RES e_ms=<d> ell_ms=<d> batch_size=<int> correct=<int>
                      DONE

All numbers are decimal text; unknown keys are ignored.  The engine only
requests batches the active protocol actually processes, one at a time,
because a served batch's timing decides which batch is requested next.

Freezing is expressed purely through the ``mode`` field.  A frozen request
for an index that was already requested in adapt mode tells the source that
this adaptation did not fit the budget and must be rolled back; from then
on the model state is pinned to the batch before it.
"""

from __future__ import annotations

import contextlib
import shlex
import subprocess
import threading
import queue
from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

from .amortised import AmortisedConfig, AmortisedReport, overheads
from .continuous import ContinuousConfig, ContinuousReport, continuous_utility
from .discrete import (
    DiscreteConfig,
    DiscreteReport,
    Schedule,
    ScheduleEvent,
    VARIANT_BUFFERED,
    discrete_utility,
)
from .trace import (
    BatchRecord,
    MethodTrace,
    TraceBundle,
    WEIGHTING_PER_BATCH,
    accuracy_mean,
    ms_to_ns,
    ns_to_ms_text,
)

MODE_ADAPT = "adapt"
MODE_FROZEN = "frozen"

PROTOCOL_TAGS = ("offline", "discrete", "continuous", "amortised")


class ProviderStep(NamedTuple):
    """One request/response exchange."""

    index: int
    mode: str
    record: BatchRecord


class ProviderError(RuntimeError):
    """Session failed; carries the transcript up to the failure."""

    def __init__(self, message: str, transcript: Sequence[str] = ()):
        tail = list(transcript)[-12:]
        if tail:
            message = message + "\ntranscript tail:\n" + "\n".join(tail)
        super().__init__(message)
        self.transcript = tuple(transcript)


class FrozenUnavailable(ProviderError):
    """The source has no frozen-state data for the requested cutoff.

    Only replay sources raise this (a live harness always has its own
    state); drivers treat it as "fall back to a constant", never as a
    session failure.
    """


@dataclass(frozen=True)
class ProviderInfo:
    """Identity of the stream a provider serves."""

    method: str
    lambda_ns: int
    n: int
    corruption: str | None = None


class BatchProvider(Protocol):
    info: ProviderInfo

    def start(self, protocol: str) -> None: ...

    def step(self, index: int, mode: str) -> BatchRecord: ...

    def close(self) -> None: ...


def _check_step(index: int, mode: str, n: int) -> None:
    if not 1 <= index <= n:
        raise ProviderError(f"step index {index} outside 1..{n}")
    if mode not in (MODE_ADAPT, MODE_FROZEN):
        raise ProviderError(f"unknown step mode {mode!r}")


class ReplayProvider:
    """Serves a recorded bundle: adapt steps from the trace, frozen steps
    from the frozen run matching the rolled-back cutoff."""

    def __init__(self, bundle: TraceBundle):
        self.bundle = bundle
        t = bundle.trace
        self.info = ProviderInfo(
            method=t.method, lambda_ns=t.lambda_ns, n=t.n,
            corruption=t.corruption,
        )
        self._started = False
        self._last_adapt = 0
        self._frozen_seen = False
        self.transcript: list[ProviderStep] = []

    def start(self, protocol: str) -> None:
        if protocol not in PROTOCOL_TAGS:
            raise ProviderError(f"unknown protocol tag {protocol!r}")
        self._started = True
        self._last_adapt = 0
        self._frozen_seen = False
        self.transcript = []

    def step(self, index: int, mode: str) -> BatchRecord:
        if not self._started:
            raise ProviderError("step before handshake")
        _check_step(index, mode, self.info.n)
        if mode == MODE_ADAPT:
            if self._frozen_seen:
                raise ProviderError(
                    f"adapt request for batch {index} after freezing"
                )
            self._last_adapt = max(self._last_adapt, index)
            rec = self.bundle.trace.records[index - 1]
        else:
            if index <= self._last_adapt:
                # Rollback: this batch's adaptation did not fit the budget.
                self._last_adapt = index - 1
            self._frozen_seen = True
            run = self.bundle.run_for_cutoff(self._last_adapt)
            if run is None:
                raise FrozenUnavailable(
                    f"no frozen run covers batch {index} at cutoff "
                    f"{self._last_adapt}"
                )
            rec = run.record_for(index)
        self.transcript.append(ProviderStep(index, mode, rec))
        return rec

    def close(self) -> None:
        self._started = False


def _parse_kv(tokens: Sequence[str]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if sep:
            out[key] = value
    return out


def _require_kv(
    kv: dict[str, str],
    key: str,
    line_no: int,
    line: str,
    transcript: Sequence[str] = (),
) -> str:
    if key not in kv:
        raise ProviderError(
            f"line {line_no}: missing key '{key}' in {line!r}", transcript
        )
    return kv[key]


class ExternalProvider:
    """Child process speaking the line protocol.

    Latencies are whatever the child reports; a scripted child replays a
    fixture, a live harness may report self-measured wall clock (which
    makes results machine-dependent, so scripted children are the norm).
    """

    def __init__(
        self,
        command: Sequence[str] | str,
        info: ProviderInfo,
        timeout_s: float = 30.0,
    ):
        self.command = (
            shlex.split(command) if isinstance(command, str) else list(command)
        )
        self.info = info
        self.timeout_s = timeout_s
        self.lines: list[str] = []
        self.transcript: list[ProviderStep] = []
        self._proc: subprocess.Popen | None = None
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._reader: threading.Thread | None = None
        self._line_no = 0

    # -- plumbing ---------------------------------------------------------

    def _send(self, line: str) -> None:
        proc = self._proc
        if proc is None or proc.stdin is None:
            raise ProviderError("provider not started", self.lines)
        self.lines.append("> " + line)
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProviderError(
                f"provider pipe closed while sending {line!r}: {exc}",
                self.lines,
            ) from exc

    def _recv(self) -> str:
        try:
            item = self._queue.get(timeout=self.timeout_s)
        except queue.Empty:
            raise ProviderError(
                f"provider timed out after {self.timeout_s}s", self.lines
            ) from None
        if item is None:
            code = self._proc.poll() if self._proc else None
            raise ProviderError(
                f"provider exited (code {code}) before the session ended",
                self.lines,
            )
        self._line_no += 1
        self.lines.append("< " + item)
        return item

    def _pump(self) -> None:
        proc = self._proc
        assert proc is not None and proc.stdout is not None
        for raw in proc.stdout:
            self._queue.put(raw.rstrip("\n"))
        proc.stdout.close()
        proc.wait()
        self._queue.put(None)

    # -- protocol ---------------------------------------------------------

    def start(self, protocol: str) -> None:
        if protocol not in PROTOCOL_TAGS:
            raise ProviderError(f"unknown protocol tag {protocol!r}")
        if any(ch.isspace() for ch in self.info.method):
            raise ProviderError(
                f"method label {self.info.method!r} cannot go on the wire "
                "(contains whitespace)"
            )
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.lines = []
        self.transcript = []
        self._line_no = 0
        self._send(
            f"HELLO method={self.info.method} "
            f"lambda_ms={ns_to_ms_text(self.info.lambda_ns)} "
            f"n={self.info.n} protocol={protocol}"
        )
        reply = self._recv()
        if reply.split() and reply.split()[0] == "READY":
            return
        raise ProviderError(
            f"line {self._line_no}: expected READY, got {reply!r}", self.lines
        )

    def step(self, index: int, mode: str) -> BatchRecord:
        _check_step(index, mode, self.info.n)
        self._send(f"STEP index={index} mode={mode}")
        reply = self._recv()
        tokens = reply.split()
        if not tokens or tokens[0] != "RES":
            raise ProviderError(
                f"line {self._line_no}: expected RES, got {reply!r}", self.lines
            )
        kv = _parse_kv(tokens[1:])

        def need(key: str) -> str:
            return _require_kv(kv, key, self._line_no, reply, self.lines)

        try:
            rec = BatchRecord(
                index=index,
                e_ns=ms_to_ns(need("e_ms")),
                ell_ns=ms_to_ns(need("ell_ms")),
                batch_size=int(need("batch_size")),
                correct=int(need("correct")),
            )
        except (ValueError, TypeError) as exc:
            raise ProviderError(
                f"line {self._line_no}: malformed RES {reply!r}: {exc}",
                self.lines,
            ) from exc
        self.transcript.append(ProviderStep(index, mode, rec))
        return rec

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        try:
            if proc.poll() is None:
                self._send("BYE")
                reply = self._recv()
                tokens = reply.split()
                if not tokens or tokens[0] != "DONE":
                    raise ProviderError(
                        f"line {self._line_no}: expected DONE, got {reply!r}",
                        self.lines,
                    )
            proc.wait(timeout=self.timeout_s)
        except subprocess.TimeoutExpired:
            proc.kill()
            raise ProviderError("provider did not exit after BYE", self.lines)
        finally:
            self._proc = None
            if proc.poll() is None:
                proc.kill()


def _abandon(provider: BatchProvider) -> None:
    # Error path: drop the session without letting a secondary close
    # failure shadow the original exception.
    with contextlib.suppress(ProviderError, OSError):
        provider.close()


# -- protocol drivers ------------------------------------------------------


def _collected_trace(provider: BatchProvider, records: list[BatchRecord]) -> MethodTrace:
    return MethodTrace(
        method=provider.info.method,
        lambda_ns=provider.info.lambda_ns,
        records=tuple(records),
        corruption=provider.info.corruption,
        relaxed_sizes=True,
    )


def run_offline(
    provider: BatchProvider, weighting: str = WEIGHTING_PER_BATCH
) -> float:
    """No-pressure reference: every batch adapted and counted."""
    provider.start("offline")
    try:
        records = [
            provider.step(i, MODE_ADAPT) for i in range(1, provider.info.n + 1)
        ]
    except BaseException:
        _abandon(provider)
        raise
    provider.close()
    return accuracy_mean(records, weighting)


def run_discrete(
    provider: BatchProvider,
    cfg: DiscreteConfig,
    weighting: str = WEIGHTING_PER_BATCH,
) -> tuple[Schedule, DiscreteReport]:
    """Discrete protocol against a provider, one served batch at a time.

    Only served batches are requested: the finish time of each served batch
    determines the next index, so evicted batches never reach the source
    and the method adapts exactly on what it served.
    """
    provider.start("discrete")
    n = provider.info.n
    gamma = cfg.gamma_ns
    records: dict[int, BatchRecord] = {}

    try:
        rec = provider.step(1, MODE_ADAPT)
        records[1] = rec
        events = [ScheduleEvent(1, 0, rec.delta_ns)]
        prev, finish = 1, rec.delta_ns
        while prev < n:
            if cfg.variant == VARIANT_BUFFERED:
                arrival_term = min(finish // gamma + 1, n)
            else:
                arrival_term = -(-finish // gamma) + 1
            cand = max(prev + 1, arrival_term)
            if cand > n:
                break
            rec = provider.step(cand, MODE_ADAPT)
            records[cand] = rec
            start = max(finish, (cand - 1) * gamma)
            finish = start + rec.delta_ns
            events.append(ScheduleEvent(cand, start, finish))
            prev = cand
    except BaseException:
        _abandon(provider)
        raise
    provider.close()

    schedule = Schedule(
        n=n, gamma_ns=gamma, variant=cfg.variant, events=tuple(events)
    )
    served = [records[i] for i in schedule.served]
    acc = accuracy_mean(served, weighting)
    report = DiscreteReport(
        availability=schedule.availability,
        served_count=len(served),
        n=n,
        served_accuracy=acc,
        utility=schedule.availability * acc,
        gamma_ns=gamma,
        variant=cfg.variant,
    )
    return schedule, report


def run_continuous(
    provider: BatchProvider,
    threshold_ns: int,
    lambda_override_ns: int | None = None,
) -> ContinuousReport:
    """Continuous protocol: the greedy consumer takes every batch."""
    provider.start("continuous")
    try:
        records = [
            provider.step(i, MODE_ADAPT) for i in range(1, provider.info.n + 1)
        ]
    except BaseException:
        _abandon(provider)
        raise
    provider.close()
    trace = _collected_trace(provider, records)
    return continuous_utility(
        trace, threshold_ns=threshold_ns, lambda_override_ns=lambda_override_ns
    )


def run_amortised(
    provider: BatchProvider,
    cfg: AmortisedConfig,
    frozen_constant: float | None = None,
    weighting: str = WEIGHTING_PER_BATCH,
) -> AmortisedReport:
    """Amortised protocol with online budget tracking.

    Batches are adapted until one overshoots the budget; that batch is
    re-requested in frozen mode (the rollback convention) and the rest of
    the stream follows frozen.  A provider that cannot answer frozen
    requests falls back to ``frozen_constant`` when given.
    """
    provider.start("amortised")
    n = provider.info.n
    adapt_records: list[BatchRecord] = []
    frozen_records: list[BatchRecord] = []
    spent = 0
    frozen_acc: float | None = None
    frozen_source = "none"

    try:
        m = n
        for i in range(1, n + 1):
            rec = provider.step(i, MODE_ADAPT)
            cost = overheads([rec.delta_ns], cfg.lambda_ns)[0]
            if spent + cost > cfg.budget_ns:
                m = i - 1
                break
            spent += cost
            adapt_records.append(rec)

        if m < n:
            try:
                for j in range(m + 1, n + 1):
                    frozen_records.append(provider.step(j, MODE_FROZEN))
                frozen_acc = accuracy_mean(frozen_records, weighting)
                frozen_source = "frozen_run"
            except FrozenUnavailable:
                if frozen_constant is None:
                    raise
                frozen_acc = frozen_constant
                frozen_source = "constant"
    except BaseException:
        _abandon(provider)
        raise
    provider.close()

    beta = m / n
    adapt_acc = accuracy_mean(adapt_records, weighting) if m > 0 else None
    if m == n:
        utility = adapt_acc if adapt_acc is not None else 0.0
    else:
        assert frozen_acc is not None
        utility = beta * (adapt_acc if adapt_acc is not None else 0.0) + (
            1.0 - beta
        ) * frozen_acc
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
