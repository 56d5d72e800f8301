"""Fixture parsing and the replay state machine behind echo mode."""

from decimal import Decimal

import pytest

from tempora_harness import (
    CallbackError,
    EchoCallbacks,
    FixtureError,
    load_fixture,
    load_frozen_tail,
)
from tempora_harness.cli import main

D = Decimal

HEADER = {"method": "tent", "lambda_ms": D("39.9"), "corruption": None, "n": 3}
RECORDS = [
    {"index": 1, "e_ms": D("41.5"), "ell_ms": D("56.123"), "batch_size": 64,
     "correct": 20},
    {"index": 2, "e_ms": 40, "ell_ms": 0, "batch_size": 64, "correct": 31},
    {"index": 3, "e_ms": D("39.000001"), "ell_ms": D("0.5"), "batch_size": 64,
     "correct": 7},
]


def write(tmp_path, jsonl, name, header, records):
    path = tmp_path / name
    path.write_text(jsonl(header, records))
    return path


def tail_header(cutoff_m, n_records, method="tent"):
    return {
        "method": method, "lambda_ms": D("39.9"), "corruption": None,
        "n": n_records, "cutoff_m": cutoff_m,
    }


def tail_records(cutoff_m, n=3, correct=5):
    return [
        {"index": i, "e_ms": 40, "ell_ms": 0, "batch_size": 64,
         "correct": correct}
        for i in range(cutoff_m + 1, n + 1)
    ]


class TestLoadFixture:
    def test_parses_exact_decimals(self, tmp_path, jsonl):
        fixture = load_fixture(write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS))
        assert fixture.method == "tent"
        assert fixture.lambda_ms == D("39.9")
        assert fixture.corruption is None
        assert fixture.n == 3
        first = fixture.records[0]
        assert first.e_ms == D("41.5")
        assert first.ell_ms == D("56.123")
        assert (first.batch_size, first.correct) == (64, 20)
        # Integer-valued fields stay exact too.
        assert fixture.records[1].e_ms == D(40)

    def test_header_without_n_is_fine(self, tmp_path, jsonl):
        header = {k: v for k, v in HEADER.items() if k != "n"}
        assert load_fixture(
            write(tmp_path, jsonl, "t.jsonl", header, RECORDS)
        ).n == 3

    @pytest.mark.parametrize("mangle, problem", [
        (lambda h, r: (h, []), "no records"),
        (lambda h, r: ({**h, "n": 7}, r), "declares n=7"),
        (lambda h, r: ({**h, "cutoff_m": 2}, r), "is a frozen tail"),
        (lambda h, r: ({**h, "method": 5}, r), "'method' must be a string"),
        (lambda h, r: ({**h, "corruption": 5}, r), "must be a string or null"),
        (lambda h, r: ({k: v for k, v in h.items() if k != "method"}, r),
         "missing field 'method'"),
        (lambda h, r: (h, [{**r[0], "index": 2}] + r[1:]),
         "has index 2, expected 1"),
        (lambda h, r: (h, [{k: v for k, v in r[0].items() if k != "e_ms"}]),
         "missing field 'e_ms'"),
        (lambda h, r: (h, [{**r[0], "batch_size": "big"}]),
         "'batch_size' must be an integer"),
        (lambda h, r: (h, [{**r[0], "e_ms": "41.5"}]),
         "'e_ms' must be a decimal number"),
    ])
    def test_malformed_fixture(self, tmp_path, jsonl, mangle, problem):
        header, records = mangle(HEADER, RECORDS)
        path = write(tmp_path, jsonl, "bad.jsonl", header, records)
        with pytest.raises(FixtureError, match=problem):
            load_fixture(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "garbage.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(FixtureError, match="invalid JSON"):
            load_fixture(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("\n\n")
        with pytest.raises(FixtureError, match="empty file"):
            load_fixture(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FixtureError, match="cannot read"):
            load_fixture(tmp_path / "absent.jsonl")


class TestLoadFrozenTail:
    def test_parses_tail(self, tmp_path, jsonl):
        path = write(
            tmp_path, jsonl, "t-m1.jsonl", tail_header(1, 2), tail_records(1)
        )
        tail = load_frozen_tail(path)
        assert tail.cutoff_m == 1
        assert tail.last_index == 3
        assert tail.record_for(2).correct == 5

    def test_requires_cutoff(self, tmp_path, jsonl):
        path = write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS)
        with pytest.raises(FixtureError, match="missing field 'cutoff_m'"):
            load_frozen_tail(path)

    def test_tail_indices_start_after_cutoff(self, tmp_path, jsonl):
        path = write(
            tmp_path, jsonl, "t-m2.jsonl", tail_header(2, 3), tail_records(0)
        )
        with pytest.raises(FixtureError, match="has index 1, expected 3"):
            load_frozen_tail(path)

    def test_negative_cutoff(self, tmp_path, jsonl):
        path = write(
            tmp_path, jsonl, "t-bad.jsonl", tail_header(-1, 3),
            tail_records(0),
        )
        with pytest.raises(FixtureError, match="cutoff_m must be >= 0"):
            load_frozen_tail(path)


def echo(tmp_path, jsonl, cutoffs=()):
    fixture = load_fixture(write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS))
    tails = tuple(
        load_frozen_tail(write(
            tmp_path, jsonl, f"t-m{m}.jsonl",
            tail_header(m, 3 - m), tail_records(m, correct=10 + m),
        ))
        for m in cutoffs
    )
    return EchoCallbacks(fixture, tails)


class TestEchoCallbacks:
    def test_adapt_reads_the_trace(self, tmp_path, jsonl):
        cb = echo(tmp_path, jsonl)
        assert cb.on_adapt(1) == (D("41.5"), D("56.123"), 64, 20)
        assert cb.on_adapt(3) == (D("39.000001"), D("0.5"), 64, 7)

    def test_frozen_with_rollback_picks_the_earlier_cutoff(
        self, tmp_path, jsonl
    ):
        cb = echo(tmp_path, jsonl, cutoffs=(0, 1, 2))
        cb.on_adapt(1)
        cb.on_adapt(2)
        # Batch 2's adaptation is rolled back; the cutoff becomes 1.
        assert cb.on_frozen(2) == (40, 0, 64, 11)
        assert cb.on_frozen(3) == (40, 0, 64, 11)

    def test_frozen_without_rollback_uses_the_last_adapted_state(
        self, tmp_path, jsonl
    ):
        cb = echo(tmp_path, jsonl, cutoffs=(0, 1, 2))
        cb.on_adapt(1)
        cb.on_adapt(2)
        assert cb.on_frozen(3) == (40, 0, 64, 12)

    def test_frozen_before_any_adapt_uses_the_never_adapted_tail(
        self, tmp_path, jsonl
    ):
        cb = echo(tmp_path, jsonl, cutoffs=(0, 2))
        assert cb.on_frozen(1) == (40, 0, 64, 10)

    def test_nearest_earlier_tail_substitutes_for_a_missing_exact_one(
        self, tmp_path, jsonl
    ):
        cb = echo(tmp_path, jsonl, cutoffs=(0,))
        cb.on_adapt(1)
        cb.on_adapt(2)
        assert cb.on_frozen(3) == (40, 0, 64, 10)

    def test_no_tail_covers_the_cutoff(self, tmp_path, jsonl):
        cb = echo(tmp_path, jsonl, cutoffs=(2,))
        cb.on_adapt(1)
        with pytest.raises(
            CallbackError, match="no frozen tail covers batch 2 at cutoff 1"
        ):
            cb.on_frozen(2)

    def test_adapt_after_freezing_is_refused(self, tmp_path, jsonl):
        cb = echo(tmp_path, jsonl, cutoffs=(0,))
        cb.on_frozen(1)
        with pytest.raises(
            CallbackError, match="adapt request for batch 2 after freezing"
        ):
            cb.on_adapt(2)

    def test_reset_clears_the_episode(self, tmp_path, jsonl):
        cb = echo(tmp_path, jsonl, cutoffs=(0, 2))
        cb.on_adapt(1)
        cb.on_frozen(2)
        cb.on_reset()
        first = [cb.on_adapt(i) for i in (1, 2, 3)]
        cb.on_reset()
        second = [cb.on_adapt(i) for i in (1, 2, 3)]
        # Pure with respect to the transcript: same requests, same replies.
        assert first == second

    def test_duplicate_tail_cutoffs_are_rejected(self, tmp_path, jsonl):
        fixture = load_fixture(
            write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS)
        )
        tail = load_frozen_tail(write(
            tmp_path, jsonl, "t-m1.jsonl", tail_header(1, 2), tail_records(1)
        ))
        with pytest.raises(FixtureError, match="duplicate frozen tail"):
            EchoCallbacks(fixture, (tail, tail))

    def test_short_tail_is_rejected(self, tmp_path, jsonl):
        fixture = load_fixture(
            write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS)
        )
        short = load_frozen_tail(write(
            tmp_path, jsonl, "t-short.jsonl", tail_header(1, 1),
            tail_records(1)[:1],
        ))
        with pytest.raises(FixtureError, match="ends at batch 2, expected 3"):
            EchoCallbacks(fixture, (short,))


class TestCliSources:
    def test_missing_fixture_is_a_usage_error(self, tmp_path, capsys):
        assert main([str(tmp_path / "absent.jsonl")]) == 2
        assert "tempora-harness: error:" in capsys.readouterr().err

    def test_malformed_fixture_is_a_usage_error(self, tmp_path, capsys):
        path = tmp_path / "bad.jsonl"
        path.write_text("{}\n")
        assert main([str(path)]) == 2
        assert "missing field 'method'" in capsys.readouterr().err

    def test_frozen_glob_matching_nothing(self, tmp_path, jsonl, capsys):
        path = write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS)
        code = main([str(path), "--frozen", str(tmp_path / "frozen" / "*")])
        assert code == 2
        assert "no frozen-tail files match" in capsys.readouterr().err

    def test_frozen_flag_refused_for_module_sources(self, capsys):
        assert main(["some.module", "--frozen", "x"]) == 2
        assert "--frozen only applies to echo mode" in capsys.readouterr().err

    def test_unimportable_module(self, capsys):
        assert main(["no_such_module_anywhere"]) == 2
        assert "cannot import" in capsys.readouterr().err

    def test_module_without_callbacks(self, capsys):
        assert main(["json"]) == 2
        assert "neither make_callbacks() nor callbacks" in (
            capsys.readouterr().err
        )

    def test_tails_for_other_streams_are_skipped(self, tmp_path, jsonl):
        write(tmp_path, jsonl, "t.jsonl", HEADER, RECORDS)
        write(
            tmp_path, jsonl, "other-m0.jsonl",
            tail_header(0, 3, method="other"), tail_records(0),
        )
        write(
            tmp_path, jsonl, "t-m0.jsonl", tail_header(0, 3), tail_records(0)
        )
        from tempora_harness.cli import _build_echo

        callbacks, method, n = _build_echo(
            str(tmp_path / "t.jsonl"), str(tmp_path / "*-m0.jsonl")
        )
        assert (method, n) == ("tent", 3)
        assert [t.method for t in callbacks.tails] == ["tent"]
