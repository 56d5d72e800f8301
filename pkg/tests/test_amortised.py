"""Amortised protocol: budget cutoff, two-phase utility, Pareto frontier."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tempora import (
    AmortisedConfig,
    AmortisedError,
    BatchRecord,
    FrozenRun,
    MethodTrace,
    ParetoPoint,
    TraceBundle,
    amortised_utility,
    cutoff,
    frontier_to_csv,
    oracle_cutoff,
    overheads,
    pareto_frontier,
)

MS = 10**6
LAMBDA = 39_900_000


def bundle_with_cost(n, cost_ns, accs, frozen=(), batch_size=10):
    """Trace where every batch costs exactly ``cost_ns`` over the target."""
    records = tuple(
        BatchRecord(i + 1, LAMBDA + cost_ns, 0, batch_size, accs[i])
        for i in range(n)
    )
    trace = MethodTrace("m", LAMBDA, records)
    return TraceBundle(trace, tuple(frozen))


def frozen_at(m, n, correct, batch_size=10):
    return FrozenRun(
        m,
        tuple(
            BatchRecord(i, LAMBDA, 0, batch_size, correct)
            for i in range(m + 1, n + 1)
        ),
    )


class TestCutoff:
    def test_overheads(self):
        assert overheads([LAMBDA + 5, LAMBDA, LAMBDA - 5], LAMBDA) == [5, 0, 0]
        assert overheads([LAMBDA - 5], LAMBDA, clamp=False) == [-5]

    def test_examples(self):
        assert cutoff([5, 5, 5], 12) == 2
        assert cutoff([5, 5, 5], 0) == 0
        assert cutoff([5, 5, 5], 15) == 3
        assert cutoff([0, 0, 0], 0) == 3

    @given(
        costs=st.lists(st.integers(0, 1000), max_size=40),
        budgets=st.tuples(st.integers(0, 20000), st.integers(0, 20000)),
    )
    def test_monotone_in_budget(self, costs, budgets):
        lo, hi = sorted(budgets)
        assert cutoff(costs, lo) <= cutoff(costs, hi)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(1500):
            n = int(rng.integers(0, 50))
            costs = [int(c) for c in rng.integers(0, 800, size=n)]
            budget = int(rng.integers(0, 8000))
            assert cutoff(costs, budget) == oracle_cutoff(costs, budget)


class TestUtility:
    def test_exact_frozen_run(self):
        accs = [8] * 4 + [0] * 6
        bundle = bundle_with_cost(
            10, MS, accs, frozen=[frozen_at(4, 10, correct=2)]
        )
        cfg = AmortisedConfig(budget_ns=4 * MS, lambda_ns=LAMBDA)
        rep = amortised_utility(bundle, cfg)
        assert rep.cutoff_m == 4
        assert rep.adapt_fraction == 0.4
        assert rep.adapt_accuracy == pytest.approx(0.8)
        assert rep.frozen_accuracy == pytest.approx(0.2)
        assert rep.frozen_source == "frozen_run"
        assert rep.utility == pytest.approx(0.4 * 0.8 + 0.6 * 0.2)
        assert rep.budget_spent_ns == 4 * MS
        assert rep.utility == pytest.approx(
            rep.adapt_fraction * rep.adapt_accuracy
            + (1 - rep.adapt_fraction) * rep.frozen_accuracy,
            abs=1e-12,
        )

    def test_nearest_earlier_run_warns(self):
        bundle = bundle_with_cost(
            10, MS, [8] * 10, frozen=[frozen_at(2, 10, correct=3)]
        )
        cfg = AmortisedConfig(budget_ns=4 * MS, lambda_ns=LAMBDA)
        with pytest.warns(UserWarning, match="cutoff 2"):
            rep = amortised_utility(bundle, cfg)
        assert rep.cutoff_m == 4
        # Tail still starts after the computed cutoff, served from the
        # staler run.
        assert rep.frozen_source == "frozen_run"
        assert rep.frozen_accuracy == pytest.approx(0.3)

    def test_constant_fallback(self):
        bundle = bundle_with_cost(10, MS, [8] * 10)
        cfg = AmortisedConfig(budget_ns=4 * MS, lambda_ns=LAMBDA)
        rep = amortised_utility(bundle, cfg, frozen_constant=0.25)
        assert rep.frozen_source == "constant"
        assert rep.utility == pytest.approx(0.4 * 0.8 + 0.6 * 0.25)
        with pytest.raises(AmortisedError, match="frozen_constant"):
            amortised_utility(bundle, cfg, frozen_constant=1.5)

    def test_no_frozen_source_fails(self):
        bundle = bundle_with_cost(10, MS, [8] * 10)
        cfg = AmortisedConfig(budget_ns=4 * MS, lambda_ns=LAMBDA)
        with pytest.raises(AmortisedError, match="no frozen"):
            amortised_utility(bundle, cfg)

    def test_budget_covers_everything(self):
        bundle = bundle_with_cost(6, MS, [7] * 6)
        cfg = AmortisedConfig(budget_ns=6 * MS, lambda_ns=LAMBDA)
        rep = amortised_utility(bundle, cfg)
        assert rep.cutoff_m == 6
        assert rep.frozen_source == "none"
        assert rep.frozen_accuracy is None
        assert rep.utility == pytest.approx(0.7)

    def test_zero_budget_is_all_frozen(self):
        bundle = bundle_with_cost(
            6, MS, [9] * 6, frozen=[frozen_at(0, 6, correct=1)]
        )
        cfg = AmortisedConfig(budget_ns=0, lambda_ns=LAMBDA)
        rep = amortised_utility(bundle, cfg)
        assert rep.cutoff_m == 0
        assert rep.adapt_accuracy is None
        assert rep.adapt_fraction == 0.0
        assert rep.utility == pytest.approx(0.1)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="budget_ns"):
            AmortisedConfig(budget_ns=-1, lambda_ns=LAMBDA)
        with pytest.raises(ValueError, match="lambda_ns"):
            AmortisedConfig(budget_ns=0, lambda_ns=0)


class TestPareto:
    def test_dominated_points_removed(self):
        pts = [
            (1, 0.3, "a"),
            (1, 0.5, "b"),   # dominates a at the same budget
            (2, 0.4, "c"),   # dominated by b: more budget, less utility
            (2, 0.7, "d"),
            (4, 0.7, "e"),   # dominated by d: more budget, same utility
        ]
        frontier = pareto_frontier(pts)
        assert [(p.budget_ns, p.method) for p in frontier] == [
            (1, "b"), (2, "d"),
        ]

    def test_exact_duplicates_survive_together(self):
        pts = [(1, 0.5, "a"), (1, 0.5, "b")]
        frontier = pareto_frontier(pts)
        assert [p.method for p in frontier] == ["a", "b"]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pareto_frontier([])

    def test_csv_dump(self, tmp_path):
        pts = [
            ParetoPoint(10**9, 0.5, "a"),
            ParetoPoint(2 * 10**9, 0.25, "b"),
        ]
        frontier = pareto_frontier(pts)
        path = tmp_path / "pareto.csv"
        frontier_to_csv(pts, frontier, path)
        assert path.read_text() == (
            "budget_s,utility,method,on_frontier\n"
            "1,0.5,a,1\n"
            "2,0.25,b,0\n"
        )
