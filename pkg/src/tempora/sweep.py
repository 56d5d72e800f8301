"""Scenario sweeps: run every (method, scenario, corruption) cell, write
matrices, decomposition tables, reports and a reproducibility manifest.

A sweep is deterministic: the same inputs, options and seed produce
byte-identical outputs (the manifest records digests so this is checkable),
and results do not depend on how many workers ran the cells.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .amortised import (
    AmortisedConfig,
    AmortisedReport,
    ParetoPoint,
    amortised_utility,
    frontier_to_csv,
    pareto_frontier,
)
from .analysis import (
    Scenario,
    UtilityMatrix,
    MatrixKey,
    insolvency_threshold,
    rank,
    spearman,
    win_stats,
    winner_table_csv,
    winner_table_markdown,
)
from .continuous import ContinuousReport, continuous_utility
from .discrete import (
    DiscreteConfig,
    DiscreteReport,
    discrete_utility,
    utilisation_to_gamma,
)
from .provider import (
    ExternalProvider,
    ProviderInfo,
    run_amortised,
    run_continuous,
    run_discrete,
)
from .trace import (
    TraceBundle,
    WEIGHTING_PER_BATCH,
    accuracy_mean,
    load_frozen_run,
    load_trace,
    ms_to_ns,
    ns_to_ms_text,
)


def _ns_from_s(text: str | Decimal) -> int:
    return ms_to_ns(Decimal(text) * 1000)


def _s_text(ns: int) -> str:
    whole, frac = divmod(ns, 10**9)
    if frac == 0:
        return str(whole)
    return f"{whole}.{f'{frac:09d}'.rstrip('0')}"


@dataclass(frozen=True)
class SweepSpec:
    """Everything a sweep needs: inputs, grids and options.

    Exactly one of ``rho_list`` / ``gamma_ms_list`` drives the discrete
    grid.  Parameters are decimal text so specs hash stably and convert to
    nanoseconds exactly.
    """

    traces: tuple[str, ...]
    frozen: tuple[str, ...] = ()
    out_dir: str = "out"
    rho_list: tuple[str, ...] | None = None
    gamma_ms_list: tuple[str, ...] | None = None
    threshold_ms_list: tuple[str, ...] = ("50", "100", "200", "400", "1000")
    budget_s_list: tuple[str, ...] = ("1", "2", "4", "8", "16", "32")
    variant: str = "buffered"
    weighting: str = WEIGHTING_PER_BATCH
    seed: int = 0
    provider_cmd: str | None = None
    frozen_constant: float | None = None
    lambda_override_ms: str | None = None
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.rho_list is not None and self.gamma_ms_list is not None:
            raise ValueError("rho and gamma-ms are mutually exclusive")

    def effective_rho_list(self) -> tuple[str, ...] | None:
        if self.gamma_ms_list is not None:
            return None
        return self.rho_list or ("1.00", "0.70", "0.50", "0.35", "0.25")


def resolve_workers(spec_workers: int | None) -> int:
    if spec_workers is not None and spec_workers > 0:
        return spec_workers
    env = os.environ.get("TEMPORA_WORKERS", "")
    try:
        value = int(env)
    except ValueError:
        value = 0
    return value if value > 0 else 4


@dataclass(frozen=True)
class Cell:
    method: str
    corruption: str
    scenario: Scenario


@dataclass
class CellResult:
    cell: Cell
    utility: float | None
    fields: dict[str, object] = field(default_factory=dict)
    error: str | None = None


def _corruption_key(corruption: str | None) -> str:
    return corruption if corruption is not None else "-"


def load_bundles(
    trace_paths: Sequence[str | Path],
    frozen_paths: Sequence[str | Path] = (),
    errors: str = "strict",
) -> tuple[dict[tuple[str, str], TraceBundle], list[tuple[str, str]]]:
    """Load traces and attach frozen runs by (method, corruption).

    Returns (bundles, problems); with ``errors='strict'`` the first problem
    raises instead.  ``errors='collect'`` isolates bad files so one broken
    input never takes a sweep down.
    """
    if errors not in ("strict", "collect"):
        raise ValueError(f"unknown errors mode {errors!r}")
    problems: list[tuple[str, str]] = []

    def bad(path, message: str) -> None:
        if errors == "strict":
            raise ValueError(f"{path}: {message}")
        problems.append((str(path), message))

    runs: dict[tuple[str, str], list] = {}
    for path in frozen_paths:
        try:
            run = load_frozen_run(path)
        except Exception as exc:
            bad(path, f"{type(exc).__name__}: {exc}")
            continue
        if run.method is None:
            bad(path, "frozen run header lacks a method label")
            continue
        runs.setdefault((run.method, _corruption_key(run.corruption)), []).append(run)
    bundles: dict[tuple[str, str], TraceBundle] = {}
    for path in trace_paths:
        try:
            trace = load_trace(path)
        except Exception as exc:
            bad(path, f"{type(exc).__name__}: {exc}")
            continue
        key = (trace.method, _corruption_key(trace.corruption))
        if key in bundles:
            bad(path, f"duplicate trace for method={key[0]} corruption={key[1]}")
            continue
        try:
            bundles[key] = TraceBundle(
                trace=trace, frozen_runs=tuple(runs.pop(key, ()))
            )
        except Exception as exc:
            bad(path, f"{type(exc).__name__}: {exc}")
    for (method, corruption) in sorted(runs):
        bad("frozen runs", f"no matching trace for {method}/{corruption}")
    if not bundles:
        raise ValueError("no traces loaded")
    return bundles, problems


def build_scenarios(spec: SweepSpec) -> list[Scenario]:
    out = []
    rho = spec.effective_rho_list()
    if rho is not None:
        out += [Scenario("discrete", f"rho={Decimal(r):f}") for r in rho]
    else:
        out += [
            Scenario("discrete", f"gamma={Decimal(g):f}ms")
            for g in spec.gamma_ms_list or ()
        ]
    out += [
        Scenario("continuous", f"T={Decimal(t):f}ms")
        for t in spec.threshold_ms_list
    ]
    out += [
        Scenario("amortised", f"B={Decimal(b):f}s") for b in spec.budget_s_list
    ]
    return out


def parse_parameter(scenario: Scenario) -> tuple[str, Decimal]:
    """Split a scenario parameter like ``rho=0.5`` / ``B=4s`` into name and
    decimal value."""
    name, _, raw = scenario.parameter.partition("=")
    raw = raw.removesuffix("ms").removesuffix("s")
    return name, Decimal(raw)


def _evaluate_cell(
    bundle: TraceBundle, scenario: Scenario, spec: SweepSpec
) -> tuple[float, dict[str, object]]:
    trace = bundle.trace
    lam = (
        ms_to_ns(spec.lambda_override_ms)
        if spec.lambda_override_ms is not None
        else trace.lambda_ns
    )
    name, value = parse_parameter(scenario)
    if scenario.protocol == "discrete":
        if name == "rho":
            gamma = utilisation_to_gamma(lam, float(value))
        else:
            gamma = ms_to_ns(value)
        cfg = DiscreteConfig(gamma_ns=gamma, variant=spec.variant, lambda_ns=lam)
        if spec.provider_cmd:
            _, rep = run_discrete(
                _external(spec, trace), cfg, weighting=spec.weighting
            )
        else:
            rep = discrete_utility(trace, cfg, weighting=spec.weighting)
        return rep.utility, _discrete_fields(rep)
    if scenario.protocol == "continuous":
        threshold = ms_to_ns(value)
        if spec.provider_cmd:
            rep = run_continuous(
                _external(spec, trace), threshold,
                lambda_override_ns=lam if lam != trace.lambda_ns else None,
            )
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = continuous_utility(
                    trace, threshold_ns=threshold,
                    lambda_override_ns=lam if lam != trace.lambda_ns else None,
                )
        return rep.utility, _continuous_fields(rep, threshold)
    if scenario.protocol == "amortised":
        budget = _ns_from_s(value)
        cfg = AmortisedConfig(budget_ns=budget, lambda_ns=lam)
        if spec.provider_cmd:
            rep = run_amortised(
                _external(spec, trace), cfg,
                frozen_constant=spec.frozen_constant,
                weighting=spec.weighting,
            )
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = amortised_utility(
                    bundle, cfg,
                    frozen_constant=spec.frozen_constant,
                    weighting=spec.weighting,
                )
        return rep.utility, _amortised_fields(rep)
    raise ValueError(f"unknown protocol {scenario.protocol!r}")


def _external(spec: SweepSpec, trace) -> ExternalProvider:
    info = ProviderInfo(
        method=trace.method, lambda_ns=trace.lambda_ns, n=trace.n,
        corruption=trace.corruption,
    )
    assert spec.provider_cmd is not None
    return ExternalProvider(spec.provider_cmd, info)


def _discrete_fields(rep: DiscreteReport) -> dict[str, object]:
    return {
        "availability": rep.availability,
        "served_count": rep.served_count,
        "served_accuracy": rep.served_accuracy,
        "gamma_ms": ns_to_ms_text(rep.gamma_ns),
    }


def _continuous_fields(rep: ContinuousReport, threshold_ns: int) -> dict[str, object]:
    return {
        "mean_accuracy": rep.mean_accuracy,
        "mean_responsiveness": rep.mean_responsiveness,
        "covariance": rep.covariance,
        "alignment": rep.alignment,
        "threshold_ms": ns_to_ms_text(threshold_ns),
    }


def _amortised_fields(rep: AmortisedReport) -> dict[str, object]:
    return {
        "cutoff_m": rep.cutoff_m,
        "adapt_fraction": rep.adapt_fraction,
        "adapt_accuracy": rep.adapt_accuracy,
        "frozen_accuracy": rep.frozen_accuracy,
        "frozen_source": rep.frozen_source,
        "budget_s": _s_text(rep.budget_ns),
        "budget_spent_ms": ns_to_ms_text(rep.budget_spent_ns),
    }


DECOMPOSITION_COLUMNS = (
    "method", "protocol", "parameter", "corruption", "utility",
    "availability", "served_count", "served_accuracy", "gamma_ms",
    "mean_accuracy", "mean_responsiveness", "covariance", "alignment",
    "threshold_ms",
    "cutoff_m", "adapt_fraction", "adapt_accuracy", "frozen_accuracy",
    "frozen_source", "budget_s", "budget_spent_ms",
    "error",
)


@dataclass
class SweepResult:
    matrix: UtilityMatrix
    results: list[CellResult]
    failures: list[CellResult]
    out_dir: Path


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every cell of the grid and write all sweep outputs.

    Per-cell warnings are suppressed here (the decomposition CSV records
    the same facts); the single-trace APIs keep them.
    """
    bundles, load_problems = load_bundles(
        spec.traces, spec.frozen, errors="collect"
    )
    scenarios = build_scenarios(spec)
    methods = tuple(sorted({m for m, _ in bundles}))
    corruptions = tuple(sorted({c for _, c in bundles}))

    cells = [
        Cell(method, corruption, scenario)
        for method in methods
        for corruption in corruptions
        for scenario in scenarios
        if (method, corruption) in bundles
    ]

    def work(cell: Cell) -> CellResult:
        bundle = bundles[(cell.method, cell.corruption)]
        try:
            utility, fields = _evaluate_cell(bundle, cell.scenario, spec)
            return CellResult(cell, utility, fields)
        except Exception as exc:  # per-cell isolation
            return CellResult(cell, None, {}, error=f"{type(exc).__name__}: {exc}")

    workers = resolve_workers(spec.workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(work, cells))

    values: dict[MatrixKey, float | None] = {}
    for method in methods:
        for scenario in scenarios:
            for corruption in corruptions:
                values[MatrixKey(method, scenario, corruption)] = None
    for res in results:
        key = MatrixKey(res.cell.method, res.cell.scenario, res.cell.corruption)
        values[key] = res.utility

    offline = {
        (method, corruption): accuracy_mean(
            bundle.trace.records, spec.weighting
        )
        for (method, corruption), bundle in bundles.items()
    }
    mean_delta = {}
    for (method, _), bundle in sorted(bundles.items()):
        mean_delta.setdefault(method, []).append(bundle.trace.mean_delta_ns())
    matrix = UtilityMatrix(
        methods=methods,
        scenarios=tuple(scenarios),
        corruptions=corruptions,
        values=values,
        offline=offline,
        mean_delta_ns={m: sum(v) / len(v) for m, v in mean_delta.items()},
    )
    for path, message in load_problems:
        results.append(CellResult(
            Cell(path, "-", Scenario("load", "")), None, {},
            error=message,
        ))
    failures = [r for r in results if r.error is not None]

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix.to_csv(out_dir / "matrix.csv")
    _write_mean_delta(matrix, out_dir / "mean_delta.csv")
    _write_decomposition(results, out_dir / "decomposition.csv")
    (out_dir / "report.md").write_text(render_report(matrix, results, spec))
    write_manifest(spec, out_dir)
    return SweepResult(matrix, results, failures, out_dir)


def _write_mean_delta(matrix: UtilityMatrix, path: Path) -> None:
    lines = ["method,mean_delta_ms"]
    for method in matrix.methods:
        v = (matrix.mean_delta_ns or {}).get(method)
        if v is not None:
            lines.append(f"{method},{v / 10**6!r}")
    path.write_text("\n".join(lines) + "\n")


def load_mean_delta(path: Path) -> dict[str, float]:
    out = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["method"]] = float(row["mean_delta_ms"]) * 10**6
    return out


def _fmt_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_decomposition(results: Sequence[CellResult], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DECOMPOSITION_COLUMNS)
        ordered = sorted(
            results,
            key=lambda r: (
                r.cell.method,
                r.cell.scenario.protocol,
                r.cell.scenario.parameter,
                r.cell.corruption,
            ),
        )
        for res in ordered:
            row = {
                "method": res.cell.method,
                "protocol": res.cell.scenario.protocol,
                "parameter": res.cell.scenario.parameter,
                "corruption": res.cell.corruption,
                "utility": res.utility,
                "error": res.error,
                **res.fields,
            }
            writer.writerow([_fmt_cell(row.get(col)) for col in DECOMPOSITION_COLUMNS])


# --- report rendering -----------------------------------------------------


def _pct(value: float | None, decimals: int = 2) -> str:
    if value is None:
        return "-"
    return f"{value * 100:.{decimals}f}"


def _md_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _scenario_util_table(matrix: UtilityMatrix, protocol: str) -> str:
    scenarios = [s for s in matrix.scenarios if s.protocol == protocol]
    headers = ["method"] + [s.parameter for s in scenarios]
    rows = []
    for method in matrix.methods:
        row = [method]
        for s in scenarios:
            agg = matrix.aggregated_scores(s)
            row.append(_pct(agg.get(method)))
        rows.append(row)
    return _md_table(headers, rows)


def _decomp_rows(
    results: Sequence[CellResult], scenario: Scenario
) -> dict[str, list[CellResult]]:
    per_method: dict[str, list[CellResult]] = {}
    for res in results:
        if res.cell.scenario == scenario and res.error is None:
            per_method.setdefault(res.cell.method, []).append(res)
    return per_method


def _mean_field(rows: list[CellResult], key: str) -> float | None:
    vals = [
        r.fields[key]
        for r in rows
        if isinstance(r.fields.get(key), (int, float))
    ]
    if not vals:
        return None
    return sum(float(v) for v in vals) / len(vals)


def render_report(
    matrix: UtilityMatrix, results: Sequence[CellResult], spec: SweepSpec
) -> str:
    """Markdown summary: per-protocol utility grids plus a decomposition
    table at the harshest parameter of each protocol.  Utilities are
    percentages at 2 decimals; rates at 1 decimal."""
    parts = ["# Sweep report", ""]

    parts.append("## Offline accuracy (mean over corruptions, %)")
    offline = matrix.offline_scores()
    parts.append(_md_table(
        ["method", "offline"],
        [[m, _pct(offline.get(m))] for m in matrix.methods],
    ))

    for protocol, title in (
        ("discrete", "Discrete protocol utility (%)"),
        ("continuous", "Continuous protocol utility (%)"),
        ("amortised", "Amortised protocol utility (%)"),
    ):
        scenarios = [s for s in matrix.scenarios if s.protocol == protocol]
        if not scenarios:
            continue
        parts.append(f"## {title}")
        parts.append(_scenario_util_table(matrix, protocol))
        harsh = _harshest(scenarios)
        rows = _decomp_rows(results, harsh)
        if protocol == "discrete":
            headers = ["method", "availability %", "served acc %", "U %"]
            table = [
                [
                    m,
                    _pct(_mean_field(rows.get(m, []), "availability"), 1),
                    _pct(_mean_field(rows.get(m, []), "served_accuracy")),
                    _pct(matrix.aggregated_scores(harsh).get(m)),
                ]
                for m in matrix.methods
            ]
        elif protocol == "continuous":
            headers = ["method", "acc %", "responsiveness %", "U %"]
            table = [
                [
                    m,
                    _pct(_mean_field(rows.get(m, []), "mean_accuracy")),
                    _pct(_mean_field(rows.get(m, []), "mean_responsiveness"), 1),
                    _pct(matrix.aggregated_scores(harsh).get(m)),
                ]
                for m in matrix.methods
            ]
        else:
            headers = ["method", "adapted %", "adapt acc %", "frozen acc %", "U %"]
            table = [
                [
                    m,
                    _pct(_mean_field(rows.get(m, []), "adapt_fraction"), 1),
                    _pct(_mean_field(rows.get(m, []), "adapt_accuracy")),
                    _pct(_mean_field(rows.get(m, []), "frozen_accuracy")),
                    _pct(matrix.aggregated_scores(harsh).get(m)),
                ]
                for m in matrix.methods
            ]
        parts.append(f"### Decomposition at {harsh.label()}")
        parts.append(_md_table(headers, table))

    failures = [r for r in results if r.error is not None]
    if failures:
        parts.append("## Failed cells")
        parts.append(_md_table(
            ["method", "scenario", "corruption", "error"],
            [
                [
                    r.cell.method, r.cell.scenario.label(), r.cell.corruption,
                    (r.error or "").splitlines()[0],
                ]
                for r in failures
            ],
        ))
    return "\n".join(parts)


def _harshest(scenarios: Sequence[Scenario]) -> Scenario:
    # Highest pressure: largest rho / smallest gamma, smallest T, smallest B.
    def key(s: Scenario):
        name, value = parse_parameter(s)
        return -value if name == "rho" else value

    return min(scenarios, key=key)


# --- manifest -------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(spec: SweepSpec, out_dir: Path) -> Path:
    """Reproducibility record: engine version, config hash, input digests,
    seed, output digests, timestamp.  Identical manifests (timestamp aside)
    imply bit-identical outputs."""
    config = asdict(spec)
    # Hash only fields that determine the results; where they land and how
    # many workers computed them are environment, not identity.
    hashed = {
        k: v for k, v in config.items() if k not in ("out_dir", "workers")
    }
    config_json = json.dumps(hashed, sort_keys=True)
    inputs = {}
    for group in (spec.traces, spec.frozen):
        for p in group:
            path = Path(p)
            inputs[str(path)] = _sha256_file(path)
    outputs = {}
    for path in sorted(out_dir.iterdir()):
        if path.name == "manifest.json" or not path.is_file():
            continue
        outputs[path.name] = _sha256_file(path)
    manifest = {
        "engine_version": __version__,
        "config": config,
        "config_sha256": hashlib.sha256(config_json.encode()).hexdigest(),
        "inputs": inputs,
        "outputs": outputs,
        "seed": spec.seed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# --- analysis over saved sweeps -------------------------------------------


def run_analysis(matrix_path: str | Path, out_dir: str | Path,
                 baseline: str | None = None) -> dict[str, Path]:
    """Winners, rank correlations, insolvency and Pareto tables from a
    saved utility matrix (plus sidecars when present next to it)."""
    matrix_path = Path(matrix_path)
    if matrix_path.is_dir():
        matrix_path = matrix_path / "matrix.csv"
    mean_delta_path = matrix_path.with_name("mean_delta.csv")
    mean_delta = (
        load_mean_delta(mean_delta_path) if mean_delta_path.exists() else None
    )
    matrix = UtilityMatrix.from_csv(matrix_path, mean_delta_ns=mean_delta)
    decomp_path = matrix_path.with_name("decomposition.csv")
    decomp = _load_decomposition(decomp_path) if decomp_path.exists() else []

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    winner_table_csv(matrix, out_dir / "winners.csv")
    (out_dir / "winners.md").write_text(
        "# Winner per (scenario, corruption)\n\n"
        + winner_table_markdown(matrix)
    )
    written["winners"] = out_dir / "winners.csv"

    _write_spearman(matrix, out_dir)
    written["spearman"] = out_dir / "spearman_aggregated.csv"

    _write_win_stats(matrix, out_dir, baseline)
    written["win_stats"] = out_dir / "win_stats.csv"

    if decomp:
        _write_insolvency(matrix, decomp, out_dir)
        written["insolvency"] = out_dir / "insolvency.csv"

    pareto_path = _write_pareto(matrix, out_dir)
    if pareto_path is not None:
        written["pareto"] = pareto_path
    return written


def _load_decomposition(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _write_spearman(matrix: UtilityMatrix, out_dir: Path) -> None:
    """Rank correlation against the offline ranking, in two flavours:
    aggregated (mean utility across corruptions) and per corruption."""
    agg_lines = ["protocol,parameter,spearman"]
    per_lines = ["protocol,parameter,corruption,spearman"]
    offline_mean = matrix.offline_scores()
    for scenario in matrix.scenarios:
        agg = matrix.aggregated_scores(scenario)
        common = sorted(set(agg) & set(offline_mean))
        if len(common) >= 2:
            try:
                r_s = spearman(
                    rank({m: agg[m] for m in common}),
                    rank({m: offline_mean[m] for m in common}),
                )
                agg_lines.append(
                    f"{scenario.protocol},{scenario.parameter},{r_s!r}"
                )
            except ValueError:
                pass
        for corruption in matrix.corruptions:
            scores = matrix.scenario_scores(scenario, corruption)
            off = matrix.offline_scores(corruption)
            common = sorted(set(scores) & set(off))
            if len(common) < 2:
                continue
            try:
                r_s = spearman(
                    rank({m: scores[m] for m in common}),
                    rank({m: off[m] for m in common}),
                )
            except ValueError:
                continue
            per_lines.append(
                f"{scenario.protocol},{scenario.parameter},{corruption},{r_s!r}"
            )
    (out_dir / "spearman_aggregated.csv").write_text("\n".join(agg_lines) + "\n")
    (out_dir / "spearman_per_corruption.csv").write_text("\n".join(per_lines) + "\n")


def _pick_baseline(matrix: UtilityMatrix, baseline: str | None) -> str | None:
    if baseline is not None:
        if baseline not in matrix.methods:
            raise ValueError(f"unknown baseline method {baseline!r}")
        return baseline
    for m in matrix.methods:
        if "standard" in m.lower():
            return m
    return None


def _write_win_stats(
    matrix: UtilityMatrix, out_dir: Path, baseline: str | None
) -> None:
    base = _pick_baseline(matrix, baseline)
    lines = [
        "method,wins,losses,total,win_rate,mean_yield_when_losing,"
        "sub_baseline_count,baseline"
    ]
    for method in matrix.methods:
        st = win_stats(matrix, method, baseline=base)
        lines.append(
            f"{method},{st.wins},{st.losses},{st.total},{st.win_rate!r},"
            f"{st.mean_yield_when_losing!r},{st.sub_baseline_count},"
            f"{base or ''}"
        )
    (out_dir / "win_stats.csv").write_text("\n".join(lines) + "\n")


def _write_insolvency(
    matrix: UtilityMatrix, decomp: list[dict[str, str]], out_dir: Path
) -> None:
    """Required accuracy for each method to catch the best competitor in
    each cell, given the method's own availability / responsiveness."""
    factor_key = {"discrete": "availability", "continuous": "mean_responsiveness"}
    factors: dict[tuple[str, Scenario, str], float] = {}
    for row in decomp:
        key = factor_key.get(row["protocol"])
        if key and row.get(key):
            scenario = Scenario(row["protocol"], row["parameter"])
            factors[(row["method"], scenario, row["corruption"])] = float(row[key])
    lines = [
        "protocol,parameter,corruption,method,factor,best_competitor,"
        "required_accuracy,impossible"
    ]
    for scenario in matrix.scenarios:
        if scenario.protocol not in factor_key:
            continue
        for corruption in matrix.corruptions:
            scores = matrix.scenario_scores(scenario, corruption)
            for method in matrix.methods:
                factor = factors.get((method, scenario, corruption))
                others = {m: u for m, u in scores.items() if m != method}
                if factor is None or factor <= 0 or not others:
                    continue
                a0 = max(others.values())
                res = insolvency_threshold(a0, min(factor, 1.0))
                lines.append(
                    f"{scenario.protocol},{scenario.parameter},{corruption},"
                    f"{method},{factor!r},{a0!r},{res.required!r},"
                    f"{int(res.impossible)}"
                )
    (out_dir / "insolvency.csv").write_text("\n".join(lines) + "\n")


def _write_pareto(matrix: UtilityMatrix, out_dir: Path) -> Path | None:
    points = []
    for scenario in matrix.scenarios:
        if scenario.protocol != "amortised":
            continue
        name, value = parse_parameter(scenario)
        budget_ns = _ns_from_s(value)
        for method, utility in matrix.aggregated_scores(scenario).items():
            points.append(ParetoPoint(budget_ns, utility, method))
    if not points:
        return None
    frontier = pareto_frontier(points)
    path = out_dir / "pareto.csv"
    frontier_to_csv(points, frontier, path)
    return path
