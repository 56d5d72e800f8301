"""Serve the evaluation engine's line protocol around user callbacks.

The engine speaks one message per line on the harness's stdin and expects
one reply per line on stdout:

    engine -> harness   HELLO method=<t> lambda_ms=<d> n=<int> protocol=<tag>
                        STEP index=<int> mode=<adapt|frozen>
                        BYE
    harness -> engine   READY
                        RES e_ms=<d> ell_ms=<d> batch_size=<int> correct=<int>
                        DONE

All numbers travel as decimal text.  The harness answers strictly one RES
per STEP, writes nothing else to the output stream, and sends diagnostics
to the error stream only.  HELLO restarts the episode (the engine resets
its own session state the same way, so a repeated handshake must not leak
state between episodes); BYE ends the session and the process.

Any break in the state machine stops the session with a nonzero status.
The engine treats a dead pipe as a failed session, so bailing out is the
honest move: answering past a malformed exchange could only corrupt
results silently.
"""

from __future__ import annotations

import time
from decimal import Decimal, InvalidOperation
from typing import Protocol, TextIO

MODE_ADAPT = "adapt"
MODE_FROZEN = "frozen"
PROTOCOL_TAGS = ("offline", "discrete", "continuous", "amortised")

EXIT_OK = 0
EXIT_PROTOCOL = 1
EXIT_USAGE = 2

# (e_ms, ell_ms, batch_size, correct); latencies as any decimal-text-able
# quantity.  Binary floats are formatted with repr and therefore reach the
# wire with their full decimal expansion; prefer int, str or Decimal.
BatchReply = tuple[object, object, int, int]


class HarnessCallbacks(Protocol):
    """What a batch source must provide to be served."""

    def on_adapt(self, index: int) -> BatchReply: ...

    def on_frozen(self, index: int) -> BatchReply: ...

    def on_reset(self) -> None: ...


class CallbackError(RuntimeError):
    """A callback cannot answer the request; the session must stop."""


def measure_ms(fn, *args, **kwargs) -> tuple[Decimal, object]:
    """Wall-clock a callable: returns (duration, result).

    The duration is nanosecond-exact decimal milliseconds, ready to go on
    the wire as ``e_ms`` or ``ell_ms``.  Nothing in the harness calls this
    on its own - scripted replies keep sessions reproducible, so
    self-timing is strictly opt-in for callbacks that want to report real
    latencies (at the price of machine-dependent results).
    """
    start = time.perf_counter_ns()
    result = fn(*args, **kwargs)
    elapsed_ns = time.perf_counter_ns() - start
    return Decimal(elapsed_ns).scaleb(-6), result


def _parse_kv(tokens: list[str]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if sep:
            out[key] = value
    return out


def _quantity_text(value: object, key: str) -> str:
    if isinstance(value, bool):
        raise CallbackError(f"callback returned a bool for {key}")
    text = repr(value) if isinstance(value, float) else str(value)
    try:
        if not Decimal(text).is_finite():
            raise InvalidOperation
    except InvalidOperation:
        raise CallbackError(
            f"callback returned {value!r} for {key}; not decimal text"
        ) from None
    if text.startswith("-"):
        raise CallbackError(f"callback returned negative {key}: {text}")
    return text


def _res_line(reply: BatchReply) -> str:
    if not isinstance(reply, (tuple, list)) or len(reply) != 4:
        raise CallbackError(
            f"callback returned {reply!r}; expected "
            "(e_ms, ell_ms, batch_size, correct)"
        )
    e_ms, ell_ms, batch_size, correct = reply
    for key, value in (("batch_size", batch_size), ("correct", correct)):
        if isinstance(value, bool) or not isinstance(value, int):
            raise CallbackError(f"callback returned non-integer {key}: {value!r}")
    if batch_size < 1:
        raise CallbackError(f"callback returned batch_size {batch_size}")
    if not 0 <= correct <= batch_size:
        raise CallbackError(
            f"callback returned correct={correct} outside 0..{batch_size}"
        )
    return (
        f"RES e_ms={_quantity_text(e_ms, 'e_ms')} "
        f"ell_ms={_quantity_text(ell_ms, 'ell_ms')} "
        f"batch_size={batch_size} correct={correct}"
    )


def serve(
    callbacks: HarnessCallbacks,
    stdin: TextIO,
    stdout: TextIO,
    stderr: TextIO,
    expect_method: str | None = None,
    expect_n: int | None = None,
) -> int:
    """Run the request loop until BYE or end of input; returns exit status.

    Streams must be line-buffered (each reply is flushed).  ``expect_*``
    let a scripted source refuse a handshake it cannot honour instead of
    failing mysteriously mid-session.
    """
    def diag(message: str) -> int:
        print(f"tempora-harness: {message}", file=stderr)
        return EXIT_PROTOCOL

    def reply(line: str) -> None:
        stdout.write(line + "\n")
        stdout.flush()

    in_session = False
    n = 0
    for line_no, raw in enumerate(stdin, start=1):
        tokens = raw.split()
        if not tokens:
            return diag(f"line {line_no}: blank line")
        verb, kv = tokens[0], _parse_kv(tokens[1:])

        if verb == "HELLO":
            missing = [
                k for k in ("method", "lambda_ms", "n", "protocol")
                if k not in kv
            ]
            if missing:
                return diag(
                    f"line {line_no}: HELLO missing {', '.join(missing)}"
                )
            if kv["protocol"] not in PROTOCOL_TAGS:
                return diag(
                    f"line {line_no}: unknown protocol tag {kv['protocol']!r}"
                )
            try:
                n = int(kv["n"])
            except ValueError:
                return diag(f"line {line_no}: n={kv['n']!r} is not an integer")
            if n < 1:
                return diag(f"line {line_no}: n must be >= 1, got {n}")
            if expect_method is not None and kv["method"] != expect_method:
                return diag(
                    f"line {line_no}: engine asked for method "
                    f"{kv['method']!r} but this harness serves "
                    f"{expect_method!r}"
                )
            if expect_n is not None and n != expect_n:
                return diag(
                    f"line {line_no}: engine announced n={n} but this "
                    f"harness serves {expect_n} batches"
                )
            callbacks.on_reset()
            in_session = True
            reply("READY")

        elif verb == "STEP":
            if not in_session:
                return diag(f"line {line_no}: STEP before HELLO")
            for key in ("index", "mode"):
                if key not in kv:
                    return diag(f"line {line_no}: STEP missing {key}")
            try:
                index = int(kv["index"])
            except ValueError:
                return diag(
                    f"line {line_no}: index={kv['index']!r} is not an integer"
                )
            if not 1 <= index <= n:
                return diag(f"line {line_no}: index {index} outside 1..{n}")
            mode = kv["mode"]
            if mode not in (MODE_ADAPT, MODE_FROZEN):
                return diag(f"line {line_no}: unknown mode {mode!r}")
            handler = (
                callbacks.on_adapt if mode == MODE_ADAPT else callbacks.on_frozen
            )
            try:
                reply(_res_line(handler(index)))
            except CallbackError as exc:
                return diag(f"line {line_no}: {exc}")

        elif verb == "BYE":
            reply("DONE")
            return EXIT_OK

        else:
            return diag(f"line {line_no}: unknown message {verb!r}")

    if in_session:
        return diag("input ended before BYE")
    return EXIT_OK
