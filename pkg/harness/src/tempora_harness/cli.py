"""Console entry: serve a trace fixture (echo mode) or a user module.

A fixture path replays recorded batches; a module path (``pkg.mod``,
``pkg.mod:factory`` or ``path/to/file.py``) lets user code answer the
engine's requests with its own model.  The module must expose either a
``make_callbacks()`` factory or a ``callbacks`` object.
"""

from __future__ import annotations

import argparse
import glob
import importlib
import importlib.util
import sys
import traceback
from pathlib import Path

from .protocol import EXIT_PROTOCOL, EXIT_USAGE, HarnessCallbacks, serve
from .replay import EchoCallbacks, FixtureError, load_fixture, load_frozen_tail


class UsageError(Exception):
    """Bad invocation or unusable source; mapped to exit code 2."""


def _expand_globs(patterns: str) -> list[str]:
    out: list[str] = []
    for pattern in patterns.split(","):
        pattern = pattern.strip()
        if pattern:
            out.extend(sorted(glob.glob(pattern, recursive=True)))
    if not out:
        raise UsageError(f"no frozen-tail files match {patterns!r}")
    return list(dict.fromkeys(out))


def _callbacks_from_module(module) -> HarnessCallbacks:
    factory = getattr(module, "make_callbacks", None)
    if callable(factory):
        return factory()
    obj = getattr(module, "callbacks", None)
    if obj is None:
        raise UsageError(
            f"module {module.__name__!r} defines neither make_callbacks() "
            "nor callbacks"
        )
    return obj


def _load_user_source(spec: str) -> HarnessCallbacks:
    target, _, attr = spec.partition(":")
    if target.endswith(".py"):
        path = Path(target)
        mod_spec = importlib.util.spec_from_file_location(path.stem, path)
        if mod_spec is None or mod_spec.loader is None:
            raise UsageError(f"cannot load module from {target!r}")
        module = importlib.util.module_from_spec(mod_spec)
        try:
            mod_spec.loader.exec_module(module)
        except FileNotFoundError as exc:
            raise UsageError(f"cannot load module from {target!r}: {exc}") from exc
    else:
        try:
            module = importlib.import_module(target)
        except ImportError as exc:
            raise UsageError(f"cannot import {target!r}: {exc}") from exc
    if attr:
        obj = getattr(module, attr, None)
        if obj is None:
            raise UsageError(f"module {target!r} has no attribute {attr!r}")
        return obj() if callable(obj) else obj
    return _callbacks_from_module(module)


def _build_echo(source: str, frozen: str | None) -> tuple[EchoCallbacks, str, int]:
    fixture = load_fixture(source)
    tails = []
    for path in _expand_globs(frozen) if frozen else ():
        tail = load_frozen_tail(path)
        # A directory glob may hold tails for many streams; only the ones
        # recorded for this fixture apply.
        if tail.method is not None and tail.method != fixture.method:
            continue
        if tail.corruption != fixture.corruption:
            continue
        tails.append(tail)
    callbacks = EchoCallbacks(fixture, tuple(tails))
    return callbacks, fixture.method, fixture.n


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tempora-harness",
        description="Answer the evaluation engine's line protocol on stdio.",
    )
    parser.add_argument(
        "source",
        help="trace fixture (.jsonl) to echo, or user module "
             "(pkg.mod[:factory] / path/to/file.py)",
    )
    parser.add_argument(
        "--frozen",
        help="glob(s) of frozen-tail files for echo mode, comma-separated",
    )
    args = parser.parse_args(argv)

    expect_method = expect_n = None
    try:
        path = Path(args.source)
        if path.suffix != ".py" and path.is_file():
            callbacks, expect_method, expect_n = _build_echo(
                args.source, args.frozen
            )
        else:
            if args.frozen:
                raise UsageError("--frozen only applies to echo mode")
            callbacks = _load_user_source(args.source)
    except (UsageError, FixtureError) as exc:
        print(f"tempora-harness: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return serve(
            callbacks, sys.stdin, sys.stdout, sys.stderr,
            expect_method=expect_method, expect_n=expect_n,
        )
    except Exception:
        print("tempora-harness: callback crashed:", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
