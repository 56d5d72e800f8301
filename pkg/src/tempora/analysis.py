"""Cross-method analysis: rankings, rank correlation, winner tables,
insolvency thresholds.

Everything here consumes utilities as fractions in [0, 1] keyed by method,
scenario and corruption.  Ranking uses average ranks for ties, and the rank
correlation is the Pearson correlation of the two rank vectors, which
reduces to the classic closed form when there are no ties.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence


class Scenario(NamedTuple):
    """A protocol plus its pressure parameter, e.g. (discrete, rho=0.5)."""

    protocol: str
    parameter: str

    def label(self) -> str:
        return f"{self.protocol} {self.parameter}" if self.parameter else self.protocol


OFFLINE = Scenario("offline", "")


@dataclass(frozen=True)
class RankVector:
    """Per-method ranks, 1 = best; exact ties share the average position."""

    labels: tuple[str, ...]
    ranks: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.ranks):
            raise ValueError("labels and ranks differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate method labels")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.ranks))


def rank(scores: Mapping[str, float] | Sequence[tuple[str, float]]) -> RankVector:
    """Rank methods by score, higher is better."""
    items = list(scores.items()) if isinstance(scores, Mapping) else list(scores)
    if len(items) < 2:
        raise ValueError("ranking needs at least 2 entries")
    labels = [lab for lab, _ in items]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate method labels")
    order = sorted(range(len(items)), key=lambda i: -items[i][1])
    ranks = [0.0] * len(items)
    pos = 0
    while pos < len(order):
        end = pos
        while end + 1 < len(order) and items[order[end + 1]][1] == items[order[pos]][1]:
            end += 1
        avg = (pos + end) / 2 + 1
        for k in range(pos, end + 1):
            ranks[order[k]] = avg
        pos = end + 1
    return RankVector(labels=tuple(labels), ranks=tuple(ranks))


def spearman(a: RankVector, b: RankVector) -> float:
    """Rank correlation of two rankings over the same method set.

    Computed as the Pearson correlation of the rank vectors so tied ranks
    are handled correctly; for tie-free inputs this equals
    1 - 6*sum(d^2) / (n*(n^2-1)).
    """
    if set(a.labels) != set(b.labels):
        missing = set(a.labels) ^ set(b.labels)
        raise ValueError(f"mismatched method sets: {sorted(missing)}")
    bd = b.as_dict()
    xs = list(a.ranks)
    ys = [bd[lab] for lab in a.labels]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise ValueError("degenerate ranking: all ranks equal")
    return sxy / math.sqrt(sxx * syy)


def spearman_scores(
    x: Mapping[str, float], y: Mapping[str, float]
) -> float:
    """Rank correlation straight from two score maps."""
    return spearman(rank(x), rank(y))


class MatrixKey(NamedTuple):
    method: str
    scenario: Scenario
    corruption: str


@dataclass
class UtilityMatrix:
    """Dense grid of utilities per (method, scenario, corruption).

    ``offline`` holds the no-pressure accuracy per (method, corruption),
    the reference point for rank-correlation analysis.  ``mean_delta_ns``
    is optional tie-break metadata: mean service time per method.
    Cells may hold None, meaning explicitly absent.
    """

    methods: tuple[str, ...]
    scenarios: tuple[Scenario, ...]
    corruptions: tuple[str, ...]
    values: dict[MatrixKey, float | None]
    offline: dict[tuple[str, str], float]
    mean_delta_ns: dict[str, float] | None = None

    def __post_init__(self) -> None:
        for method in self.methods:
            for scenario in self.scenarios:
                for corruption in self.corruptions:
                    key = MatrixKey(method, scenario, corruption)
                    if key not in self.values:
                        raise ValueError(
                            f"matrix not dense: missing cell {key}; mark "
                            "absent cells with None"
                        )

    def value(self, method: str, scenario: Scenario, corruption: str) -> float | None:
        return self.values[MatrixKey(method, scenario, corruption)]

    def scenario_scores(
        self, scenario: Scenario, corruption: str
    ) -> dict[str, float]:
        """Method scores of one cell column; absent entries dropped."""
        out = {}
        for method in self.methods:
            v = self.value(method, scenario, corruption)
            if v is not None:
                out[method] = v
        return out

    def aggregated_scores(self, scenario: Scenario) -> dict[str, float]:
        """Mean utility per method across corruptions (absent cells
        excluded from the mean)."""
        out = {}
        for method in self.methods:
            vals = [
                v
                for corruption in self.corruptions
                if (v := self.value(method, scenario, corruption)) is not None
            ]
            if vals:
                out[method] = sum(vals) / len(vals)
        return out

    def offline_scores(self, corruption: str | None = None) -> dict[str, float]:
        """Offline accuracy per method, for one corruption or averaged."""
        if corruption is not None:
            return {
                m: self.offline[(m, corruption)]
                for m in self.methods
                if (m, corruption) in self.offline
            }
        out = {}
        for m in self.methods:
            vals = [
                self.offline[(m, c)]
                for c in self.corruptions
                if (m, c) in self.offline
            ]
            if vals:
                out[m] = sum(vals) / len(vals)
        return out

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["method", "protocol", "parameter", "corruption", "utility"])
            for (method, corruption), v in sorted(self.offline.items()):
                writer.writerow([method, "offline", "", corruption, repr(v)])
            for method in self.methods:
                for scenario in self.scenarios:
                    for corruption in self.corruptions:
                        v = self.value(method, scenario, corruption)
                        writer.writerow([
                            method, scenario.protocol, scenario.parameter,
                            corruption, "" if v is None else repr(v),
                        ])

    @classmethod
    def from_csv(cls, path: str | Path,
                 mean_delta_ns: Mapping[str, float] | None = None) -> "UtilityMatrix":
        path = Path(path)
        methods: list[str] = []
        scenarios: list[Scenario] = []
        corruptions: list[str] = []
        values: dict[MatrixKey, float | None] = {}
        offline: dict[tuple[str, str], float] = {}
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"method", "protocol", "parameter", "corruption", "utility"}
            if set(reader.fieldnames or []) != expected:
                raise ValueError(
                    f"{path}: expected columns {sorted(expected)}, "
                    f"got {reader.fieldnames}"
                )
            for row in reader:
                method = row["method"]
                corruption = row["corruption"]
                text = row["utility"]
                if row["protocol"] == "offline":
                    offline[(method, corruption)] = float(text)
                    continue
                scenario = Scenario(row["protocol"], row["parameter"])
                if method not in methods:
                    methods.append(method)
                if scenario not in scenarios:
                    scenarios.append(scenario)
                if corruption not in corruptions:
                    corruptions.append(corruption)
                values[MatrixKey(method, scenario, corruption)] = (
                    float(text) if text else None
                )
        matrix = cls(
            methods=tuple(methods),
            scenarios=tuple(scenarios),
            corruptions=tuple(corruptions),
            values=values,
            offline=offline,
            mean_delta_ns=dict(mean_delta_ns) if mean_delta_ns else None,
        )
        return matrix


class WinnerCell(NamedTuple):
    method: str
    utility: float
    tied_with: tuple[str, ...]


def winners(matrix: UtilityMatrix) -> dict[tuple[Scenario, str], WinnerCell]:
    """Best method per (scenario, corruption) cell.

    Exact utility ties break by lower mean service time (when the matrix
    carries it), then by label; tied methods are reported alongside the
    winner either way.
    """
    mean_delta = matrix.mean_delta_ns or {}
    out: dict[tuple[Scenario, str], WinnerCell] = {}
    for scenario in matrix.scenarios:
        for corruption in matrix.corruptions:
            scores = matrix.scenario_scores(scenario, corruption)
            if not scores:
                continue
            best_u = max(scores.values())
            tied = sorted(m for m, u in scores.items() if u == best_u)
            winner = min(
                tied, key=lambda m: (mean_delta.get(m, math.inf), m)
            )
            others = tuple(m for m in tied if m != winner)
            out[(scenario, corruption)] = WinnerCell(winner, best_u, others)
    return out


class InsolvencyResult(NamedTuple):
    """Accuracy a method must reach on its surviving fraction to catch a
    competitor; above 1 that is mathematically impossible."""

    required: float
    impossible: bool


def insolvency_threshold(a0: float, factor: float) -> InsolvencyResult:
    """Accuracy required to match utility ``a0`` when only ``factor`` of
    the stream contributes (availability or mean responsiveness)."""
    if not 0.0 < factor <= 1.0:
        raise ValueError("factor must be in (0, 1]")
    if a0 < 0.0:
        raise ValueError("a0 must be >= 0")
    required = a0 / factor
    return InsolvencyResult(required=required, impossible=required > 1.0)


class WinStats(NamedTuple):
    focus: str
    wins: int
    losses: int
    total: int
    win_rate: float
    mean_yield_when_losing: float
    sub_baseline_count: int


def win_stats(
    matrix: UtilityMatrix, focus: str, baseline: str | None = None
) -> WinStats:
    """Win/loss record of one method over all cells.

    ``mean_yield_when_losing`` is the mean, over losing cells, of the
    relative utility gap to that cell's winner.  ``sub_baseline_count``
    counts cells where the focus method falls below the baseline method.
    """
    if focus not in matrix.methods:
        raise ValueError(f"unknown method {focus!r}")
    if baseline is not None and baseline not in matrix.methods:
        raise ValueError(f"unknown method {baseline!r}")
    cells = winners(matrix)
    wins = 0
    yields = []
    sub_baseline = 0
    for (scenario, corruption), cell in cells.items():
        focus_u = matrix.value(focus, scenario, corruption)
        if focus_u is None:
            continue
        if cell.method == focus:
            wins += 1
        else:
            if cell.utility > 0:
                yields.append((cell.utility - focus_u) / cell.utility)
        if baseline is not None:
            base_u = matrix.value(baseline, scenario, corruption)
            if base_u is not None and focus_u < base_u:
                sub_baseline += 1
    total = len(cells)
    losses = total - wins
    return WinStats(
        focus=focus,
        wins=wins,
        losses=losses,
        total=total,
        win_rate=wins / total if total else 0.0,
        mean_yield_when_losing=(
            sum(yields) / len(yields) if yields else 0.0
        ),
        sub_baseline_count=sub_baseline,
    )


def winner_table_markdown(matrix: UtilityMatrix) -> str:
    """Winner grid as Markdown, corruptions as rows, scenarios as columns."""
    cells = winners(matrix)
    heads = [s.label() for s in matrix.scenarios]
    lines = ["| corruption | " + " | ".join(heads) + " |"]
    lines.append("|" + "---|" * (len(heads) + 1))
    for corruption in matrix.corruptions:
        row = [corruption]
        for scenario in matrix.scenarios:
            cell = cells.get((scenario, corruption))
            if cell is None:
                row.append("-")
            else:
                mark = "*" if cell.tied_with else ""
                row.append(f"{cell.method}{mark}")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def winner_table_csv(
    matrix: UtilityMatrix, path: str | Path
) -> None:
    cells = winners(matrix)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["protocol", "parameter", "corruption", "winner",
                         "utility", "tied_with"])
        for scenario in matrix.scenarios:
            for corruption in matrix.corruptions:
                cell = cells.get((scenario, corruption))
                if cell is None:
                    continue
                writer.writerow([
                    scenario.protocol, scenario.parameter, corruption,
                    cell.method, repr(cell.utility),
                    ";".join(cell.tied_with),
                ])
