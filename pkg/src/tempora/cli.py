"""Command-line surface: sweeps, analysis, synthetic corpora, oracle checks.

Exit codes: 0 success, 1 partial failure (some cells failed or an oracle
mismatch), 2 usage or configuration error.  Every flag can also be given
in a flat ``key=value`` config file passed via ``--config``; explicit
flags win over the file.
"""

from __future__ import annotations

import argparse
import glob
import sys
from dataclasses import replace
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from .amortised import cutoff, overheads
from .discrete import DiscreteConfig, simulate, VARIANT_BUFFERED, VARIANT_STRICT
from .oracle import OracleConfig, oracle_cutoff, oracle_discrete
from .sweep import SweepSpec, run_analysis, run_sweep
from .trace import (
    BatchRecord,
    MethodTrace,
    PRESETS,
    TraceError,
    WEIGHTING_PER_BATCH,
    WEIGHTING_PER_SAMPLE,
    gen_frozen_run,
    gen_synthetic,
    ms_to_ns,
    write_frozen_run,
    write_trace,
)


class UsageError(Exception):
    """Configuration problem: reported and mapped to exit code 2."""


def _comma_list(text: str) -> tuple[str, ...]:
    items = tuple(part.strip() for part in text.split(",") if part.strip())
    if not items:
        raise UsageError(f"empty list value: {text!r}")
    for item in items:
        try:
            Decimal(item)
        except InvalidOperation:
            raise UsageError(f"not a decimal number: {item!r}") from None
    return items


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempora",
        description="Evaluate adaptation-method traces under temporal pressure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="run a scenario sweep over traces")
    ev.add_argument("--traces", help="glob(s) of trace files, comma-separated")
    ev.add_argument("--frozen", help="glob(s) of frozen-run files")
    ev.add_argument("--rho", help="discrete pressure levels, e.g. 1.0,0.5")
    ev.add_argument("--gamma-ms", help="explicit arrival periods in ms "
                                       "(mutually exclusive with --rho)")
    ev.add_argument("--threshold-ms", help="continuous thresholds in ms")
    ev.add_argument("--budget-s", help="amortised budgets in seconds")
    ev.add_argument("--variant", choices=[VARIANT_BUFFERED, VARIANT_STRICT])
    ev.add_argument("--weighting",
                    choices=[WEIGHTING_PER_BATCH, WEIGHTING_PER_SAMPLE])
    ev.add_argument("--lambda-ms", help="override the latency target")
    ev.add_argument("--frozen-constant", type=float,
                    help="fallback frozen-phase accuracy in [0,1]")
    ev.add_argument("--provider-cmd",
                    help="drive a live child process instead of file replay")
    ev.add_argument("--out", help="output directory")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--workers", type=int)
    ev.add_argument("--config", help="key=value file mirroring these flags")

    an = sub.add_parser("analyze", help="analysis tables from a saved matrix")
    an.add_argument("--matrix", help="matrix.csv or the sweep output directory")
    an.add_argument("--baseline", help="baseline method label for win stats")
    an.add_argument("--out", help="output directory")
    an.add_argument("--config", help="key=value file mirroring these flags")

    gen = sub.add_parser("gen", help="generate synthetic trace corpora")
    gen.add_argument("--preset", help="profile name or 'all'")
    gen.add_argument("--n", type=int, help="batches per trace")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--corruptions", type=int,
                     help="number of difficulty-shifted variants (0 = plain)")
    gen.add_argument("--frozen-budgets",
                     help="emit frozen tails for these budgets (seconds)")
    gen.add_argument("--frozen-level", type=float,
                     help="accuracy of the frozen model (default: level at "
                          "the cutoff)")
    gen.add_argument("--sampling", choices=["binomial", "expected"])
    gen.add_argument("--out", help="output directory")
    gen.add_argument("--config", help="key=value file mirroring these flags")

    oc = sub.add_parser("oracle-check",
                        help="cross-check engines against brute force")
    oc.add_argument("--n-traces", type=int)
    oc.add_argument("--batches", type=int)
    oc.add_argument("--seed", type=int)
    oc.add_argument("--config", help="key=value file mirroring these flags")

    return parser


def _config_defaults(parser: argparse.ArgumentParser, command: str,
                     path: str) -> dict[str, str]:
    """Parse a key=value config file into argparse defaults."""
    sub_actions = next(
        a for a in parser._actions
        if isinstance(a, argparse._SubParsersAction)
    )
    sub = sub_actions.choices[command]
    known = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    defaults = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        if key == "config":
            raise UsageError(f"{path}:{line_no}: config cannot nest")
        action = known.get(key)
        if action is None:
            raise UsageError(f"{path}:{line_no}: unknown option {key!r}")
        if action.type is int:
            try:
                defaults[action.dest] = int(value)
            except ValueError:
                raise UsageError(
                    f"{path}:{line_no}: {key} expects an integer"
                ) from None
        elif action.type is float:
            try:
                defaults[action.dest] = float(value)
            except ValueError:
                raise UsageError(
                    f"{path}:{line_no}: {key} expects a number"
                ) from None
        else:
            if action.choices and value not in action.choices:
                raise UsageError(
                    f"{path}:{line_no}: {key} must be one of "
                    f"{sorted(action.choices)}"
                )
            defaults[action.dest] = value
    return defaults


def _expand_globs(patterns: str, what: str) -> tuple[str, ...]:
    out: list[str] = []
    for pattern in patterns.split(","):
        pattern = pattern.strip()
        if not pattern:
            continue
        matches = sorted(glob.glob(pattern, recursive=True))
        out.extend(matches)
    if not out:
        raise UsageError(f"no {what} files match {patterns!r}")
    return tuple(dict.fromkeys(out))


def _require(args: argparse.Namespace, name: str) -> str:
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise UsageError(f"--{name} is required (flag or config file)")
    return value


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if args.rho is not None and args.gamma_ms is not None:
        raise UsageError("--rho and --gamma-ms are mutually exclusive")
    traces = _expand_globs(_require(args, "traces"), "trace")
    frozen = _expand_globs(args.frozen, "frozen-run") if args.frozen else ()
    if args.frozen_constant is not None and not 0 <= args.frozen_constant <= 1:
        raise UsageError("--frozen-constant must be in [0, 1]")
    try:
        spec = SweepSpec(
            traces=traces,
            frozen=frozen,
            out_dir=_require(args, "out"),
            rho_list=_comma_list(args.rho) if args.rho else None,
            gamma_ms_list=_comma_list(args.gamma_ms) if args.gamma_ms else None,
            threshold_ms_list=(
                _comma_list(args.threshold_ms)
                if args.threshold_ms
                else SweepSpec.__dataclass_fields__["threshold_ms_list"].default
            ),
            budget_s_list=(
                _comma_list(args.budget_s)
                if args.budget_s
                else SweepSpec.__dataclass_fields__["budget_s_list"].default
            ),
            variant=args.variant or VARIANT_BUFFERED,
            weighting=args.weighting or WEIGHTING_PER_BATCH,
            seed=args.seed if args.seed is not None else 0,
            provider_cmd=args.provider_cmd,
            frozen_constant=args.frozen_constant,
            lambda_override_ms=args.lambda_ms,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = run_sweep(spec)
    cells = len(result.results)
    failed = len(result.failures)
    print(f"evaluated {cells - failed}/{cells} cells -> {result.out_dir}")
    if failed:
        for res in result.failures[:10]:
            print(
                f"  FAILED {res.cell.method} {res.cell.scenario.label()} "
                f"{res.cell.corruption}: {res.error}",
                file=sys.stderr,
            )
        if failed > 10:
            print(f"  ... and {failed - 10} more", file=sys.stderr)
        return 1
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    matrix = _require(args, "matrix")
    out = _require(args, "out")
    try:
        written = run_analysis(matrix, out, baseline=args.baseline)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


def _corruption_factor(seed: int, j: int) -> float:
    rng = np.random.default_rng([seed, 7919, j])
    return float(rng.uniform(0.55, 1.15))


def _cmd_gen(args: argparse.Namespace) -> int:
    preset = args.preset or "all"
    if preset != "all" and preset not in PRESETS:
        raise UsageError(
            f"unknown preset {preset!r}; available: "
            + ", ".join(sorted(PRESETS)) + ", all"
        )
    names = sorted(PRESETS) if preset == "all" else [preset]
    n = args.n if args.n is not None else 781
    if n < 1:
        raise UsageError("--n must be >= 1")
    seed = args.seed if args.seed is not None else 0
    k = args.corruptions if args.corruptions is not None else 0
    if k < 0:
        raise UsageError("--corruptions must be >= 0")
    sampling = args.sampling or "binomial"
    budgets = _comma_list(args.frozen_budgets) if args.frozen_budgets else ()
    out_dir = Path(_require(args, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    variants: list[tuple[str | None, float]] = (
        [(None, 1.0)]
        if k == 0
        else [(f"shift{j:02d}", _corruption_factor(seed, j)) for j in range(1, k + 1)]
    )
    written = 0
    for pi, name in enumerate(names):
        base = PRESETS[name]
        for corruption, factor in variants:
            profile = base
            if factor != 1.0:
                curve = base.accuracy
                profile = replace(base, accuracy=replace(
                    curve,
                    start=min(1.0, curve.start * factor),
                    end=(
                        min(1.0, curve.end * factor)
                        if curve.end is not None else None
                    ),
                ))
            trace_seed = [seed, pi, 0 if corruption is None else int(corruption[-2:])]
            trace = gen_synthetic(
                profile, n, trace_seed, corruption=corruption, sampling=sampling
            )
            stem = name if corruption is None else f"{name}-{corruption}"
            write_trace(trace, out_dir / f"{stem}.jsonl")
            written += 1
            if budgets:
                costs = overheads(trace.deltas_ns(), profile.lambda_ns)
                cutoffs = sorted({
                    cutoff(costs, ms_to_ns(Decimal(b) * 1000)) for b in budgets
                })
                for m in cutoffs:
                    if m >= n:
                        continue
                    run = gen_frozen_run(
                        profile, trace, m, seed=trace_seed,
                        frozen_level=args.frozen_level, sampling=sampling,
                    )
                    # Separate directory so trace globs never match tails.
                    write_frozen_run(
                        run, out_dir / "frozen" / f"{stem}-m{m}.jsonl",
                        lambda_ns=profile.lambda_ns,
                    )
                    written += 1
    print(f"wrote {written} files -> {out_dir}")
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    n_traces = args.n_traces if args.n_traces is not None else 100
    batches = args.batches if args.batches is not None else 200
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    gamma = 100_000_000
    mismatches = 0
    for t in range(n_traces):
        deltas = rng.integers(gamma // 5, 3 * gamma, size=batches)
        records = tuple(
            BatchRecord(i + 1, int(d), 0, 64, 32)
            for i, d in enumerate(deltas)
        )
        trace = MethodTrace("check", 39_900_000, records)
        avail = {}
        for variant in (VARIANT_BUFFERED, VARIANT_STRICT):
            cfg = DiscreteConfig(gamma_ns=gamma, variant=variant)
            fast = simulate(trace, cfg)
            slow = oracle_discrete(trace, cfg, OracleConfig(tick_ns=1))
            if fast != slow:
                mismatches += 1
                print(f"MISMATCH trace {t} variant {variant}", file=sys.stderr)
            avail[variant] = fast.availability
        if avail[VARIANT_BUFFERED] < avail[VARIANT_STRICT]:
            mismatches += 1
            print(f"MISMATCH trace {t}: buffered < strict", file=sys.stderr)
    for t in range(n_traces * 10):
        costs = [int(c) for c in rng.integers(0, 10_000, size=50)]
        budget = int(rng.integers(0, 250_000))
        if cutoff(costs, budget) != oracle_cutoff(costs, budget):
            mismatches += 1
            print(f"MISMATCH cutoff instance {t}", file=sys.stderr)
    if mismatches:
        print(f"oracle-check: {mismatches} mismatches", file=sys.stderr)
        return 1
    print(
        f"oracle-check: {n_traces} schedules x 2 variants and "
        f"{n_traces * 10} cutoffs agree"
    )
    return 0


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "analyze": _cmd_analyze,
    "gen": _cmd_gen,
    "oracle-check": _cmd_oracle_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            defaults = _config_defaults(parser, args.command, args.config)
            # Re-parse so explicit flags keep priority over file values.
            sub_actions = next(
                a for a in parser._actions
                if isinstance(a, argparse._SubParsersAction)
            )
            sub_actions.choices[args.command].set_defaults(**defaults)
            args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
