"""Continuous protocol: greedy consumer waits and hyperbolic decay."""

import numpy as np
import pytest

from tempora import (
    BatchRecord,
    ContinuousConfig,
    MethodTrace,
    continuous_utility,
    decay,
    wait_times,
)

MS = 10**6
LAMBDA = 39_900_000


def test_half_life_at_one_threshold_width():
    for t_ms in (50, 100, 200, 400, 1000):
        cfg = ContinuousConfig(threshold_ns=t_ms * MS, lambda_ns=LAMBDA)
        assert decay(t_ms * MS - LAMBDA, cfg) == 0.5


def test_decay_shape():
    cfg = ContinuousConfig(threshold_ns=100 * MS, lambda_ns=LAMBDA)
    assert decay(0, cfg) == 1.0
    scale = 100 * MS - LAMBDA
    assert decay(3 * scale, cfg) == pytest.approx(0.25)
    assert decay(10 * scale, cfg) < decay(9 * scale, cfg)
    with pytest.raises(ValueError):
        decay(-1, cfg)


def test_config_requires_headroom():
    with pytest.raises(ValueError, match="threshold_ns must exceed"):
        ContinuousConfig(threshold_ns=LAMBDA, lambda_ns=LAMBDA)
    with pytest.raises(ValueError, match="lambda_ns"):
        ContinuousConfig(threshold_ns=1, lambda_ns=0)


def test_wait_inherits_one_overhead(make_trace):
    trace = make_trace(e=[10, 20, 30], ell=[5, 7, 0], lambda_ns=1)
    assert wait_times(trace) == [(10, 0), (25, 5), (37, 7)]


def test_first_batch_carries_no_backlog(make_trace):
    # A huge overhead on batch 1 delays batch 2, never batch 1 itself.
    trace = make_trace(e=[LAMBDA, LAMBDA], ell=[10**9, 0])
    rep = continuous_utility(trace, threshold_ns=140 * MS)
    assert rep.timings[0].delay_ns == 0
    assert rep.timings[0].responsiveness == 1.0
    assert rep.timings[1].delay_ns == 10**9


def test_constant_trace_has_unit_alignment(make_trace):
    trace = make_trace(e=[60 * MS] * 8, correct=[3] * 8)
    rep = continuous_utility(trace, threshold_ns=140 * MS)
    assert rep.covariance == 0.0
    # Equal per-batch terms make the ratio 1 up to summation rounding.
    assert rep.alignment == pytest.approx(1.0, abs=1e-12)
    assert rep.mean_accuracy == pytest.approx(0.3)
    assert rep.utility == pytest.approx(0.3 * rep.mean_responsiveness)


def test_zero_accuracy_has_undefined_alignment(make_trace):
    trace = make_trace(e=[60 * MS] * 3, correct=[0, 0, 0])
    rep = continuous_utility(trace, threshold_ns=140 * MS)
    assert rep.utility == 0.0
    assert rep.alignment is None


def test_decomposition_identity_randomized(make_trace):
    rng = np.random.default_rng(5)
    for _ in range(300):
        n = int(rng.integers(1, 40))
        trace = make_trace(
            e=[int(v) for v in rng.integers(0, 500 * MS, size=n)],
            ell=[int(v) for v in rng.integers(0, 500 * MS, size=n)],
            correct=[int(v) for v in rng.integers(0, 11, size=n)],
        )
        rep = continuous_utility(trace, threshold_ns=140 * MS)
        assert rep.utility == pytest.approx(
            rep.mean_accuracy * rep.mean_responsiveness + rep.covariance,
            abs=1e-12,
        )
        direct = sum(
            rec.accuracy * t.responsiveness
            for rec, t in zip(trace.records, rep.timings)
        ) / n
        assert rep.utility == pytest.approx(direct, abs=1e-15)


def test_lambda_override_warns_on_mismatch(make_trace):
    trace = make_trace(e=[50 * MS] * 3)
    with pytest.warns(UserWarning, match="differs from the trace header"):
        rep = continuous_utility(
            trace, threshold_ns=200 * MS, lambda_override_ns=45 * MS
        )
    assert rep.timings[0].delay_ns == 5 * MS
    # Header value by default: no warning.
    rep = continuous_utility(trace, threshold_ns=200 * MS)
    assert rep.timings[0].delay_ns == 50 * MS - LAMBDA


def test_requires_cfg_or_threshold(make_trace):
    trace = make_trace(e=[50 * MS])
    with pytest.raises(ValueError, match="cfg or threshold_ns"):
        continuous_utility(trace)


def test_explicit_cfg_matches_threshold_shorthand(make_trace):
    trace = make_trace(e=[50 * MS, 70 * MS], ell=[5 * MS, 0])
    cfg = ContinuousConfig(threshold_ns=140 * MS, lambda_ns=LAMBDA)
    assert continuous_utility(trace, cfg) == continuous_utility(
        trace, threshold_ns=140 * MS
    )
