"""State machine and wire formatting of the request loop."""

from decimal import Decimal

import pytest

from tempora_harness import CallbackError, measure_ms

HELLO = "HELLO method=probe lambda_ms=39.9 n=5 protocol=offline"


class ScriptedCallbacks:
    """Deterministic replies with full call accounting."""

    def __init__(self):
        self.calls = []
        self.resets = 0

    def on_reset(self):
        self.resets += 1

    def on_adapt(self, index):
        self.calls.append(("adapt", index))
        return (Decimal(f"{10 + index}.5"), index, 16, index % 17)

    def on_frozen(self, index):
        self.calls.append(("frozen", index))
        return (100 + index, Decimal("0.125"), 16, 0)


@pytest.fixture
def scripted():
    return ScriptedCallbacks()


class TestSession:
    def test_happy_path(self, drive, scripted):
        status, out, err = drive(scripted, [
            HELLO,
            "STEP index=1 mode=adapt",
            "STEP index=2 mode=adapt",
            "STEP index=3 mode=frozen",
            "BYE",
        ])
        assert status == 0
        assert err == ""
        assert out == [
            "READY",
            "RES e_ms=11.5 ell_ms=1 batch_size=16 correct=1",
            "RES e_ms=12.5 ell_ms=2 batch_size=16 correct=2",
            "RES e_ms=103 ell_ms=0.125 batch_size=16 correct=0",
            "DONE",
        ]
        assert scripted.resets == 1
        assert scripted.calls == [("adapt", 1), ("adapt", 2), ("frozen", 3)]

    def test_one_res_per_step_for_a_781_step_session(self, drive, scripted):
        steps = [f"STEP index={i} mode=adapt" for i in range(1, 782)]
        hello = "HELLO method=probe lambda_ms=39.9 n=781 protocol=continuous"
        status, out, err = drive(scripted, [hello, *steps, "BYE"])
        assert status == 0
        assert out[0] == "READY"
        assert out[-1] == "DONE"
        res = [line for line in out[1:-1] if line.startswith("RES ")]
        assert len(res) == 781
        assert len(out) == 783

    def test_unknown_keys_in_requests_are_ignored(self, drive, scripted):
        status, out, _ = drive(scripted, [
            HELLO + " flavor=vanilla",
            "STEP index=1 mode=adapt retries=0",
            "BYE",
        ])
        assert status == 0
        assert len(out) == 3

    def test_hello_restarts_the_episode(self, drive, scripted):
        status, out, _ = drive(scripted, [
            HELLO,
            "STEP index=2 mode=adapt",
            HELLO,
            "STEP index=2 mode=adapt",
            "BYE",
        ])
        assert status == 0
        assert scripted.resets == 2
        assert out.count("READY") == 2

    def test_bye_without_hello_is_a_clean_shutdown(self, drive, scripted):
        status, out, err = drive(scripted, ["BYE"])
        assert status == 0
        assert out == ["DONE"]
        assert err == ""

    def test_empty_input_exits_cleanly(self, drive, scripted):
        status, out, err = drive(scripted, [])
        assert status == 0
        assert out == []
        assert err == ""

    def test_input_ending_mid_session_is_an_error(self, drive, scripted):
        status, out, err = drive(scripted, [HELLO, "STEP index=1 mode=adapt"])
        assert status == 1
        assert "input ended before BYE" in err
        assert out[-1].startswith("RES ")


class TestProtocolViolations:
    def test_step_before_hello(self, drive, scripted):
        status, out, err = drive(scripted, ["STEP index=1 mode=adapt"])
        assert status == 1
        assert out == []
        assert "tempora-harness: line 1: STEP before HELLO" in err
        assert scripted.calls == []

    def test_unknown_message(self, drive, scripted):
        status, _, err = drive(scripted, ["HOWDY partner"])
        assert status == 1
        assert "line 1: unknown message 'HOWDY'" in err

    def test_blank_line(self, drive, scripted):
        status, _, err = drive(scripted, [HELLO, ""])
        assert status == 1
        assert "line 2: blank line" in err

    def test_hello_missing_keys(self, drive, scripted):
        status, _, err = drive(scripted, ["HELLO method=probe n=5"])
        assert status == 1
        assert "line 1: HELLO missing lambda_ms, protocol" in err

    def test_unknown_protocol_tag(self, drive, scripted):
        status, _, err = drive(scripted, [
            "HELLO method=probe lambda_ms=39.9 n=5 protocol=sideways",
        ])
        assert status == 1
        assert "unknown protocol tag 'sideways'" in err

    @pytest.mark.parametrize("n_text, problem", [
        ("five", "n='five' is not an integer"),
        ("0", "n must be >= 1, got 0"),
    ])
    def test_bad_n(self, drive, scripted, n_text, problem):
        status, _, err = drive(scripted, [
            f"HELLO method=probe lambda_ms=39.9 n={n_text} protocol=offline",
        ])
        assert status == 1
        assert problem in err

    @pytest.mark.parametrize("step, problem", [
        ("STEP index=1", "STEP missing mode"),
        ("STEP mode=adapt", "STEP missing index"),
        ("STEP index=one mode=adapt", "index='one' is not an integer"),
        ("STEP index=6 mode=adapt", "index 6 outside 1..5"),
        ("STEP index=0 mode=adapt", "index 0 outside 1..5"),
        ("STEP index=1 mode=melted", "unknown mode 'melted'"),
    ])
    def test_bad_step(self, drive, scripted, step, problem):
        status, _, err = drive(scripted, [HELLO, step])
        assert status == 1
        assert f"line 2: {problem}" in err

    def test_expected_method_mismatch(self, drive, scripted):
        status, _, err = drive(scripted, [HELLO], expect_method="other")
        assert status == 1
        assert "asked for method 'probe'" in err
        assert "serves 'other'" in err

    def test_expected_n_mismatch(self, drive, scripted):
        status, _, err = drive(scripted, [HELLO], expect_n=7)
        assert status == 1
        assert "announced n=5" in err
        assert "serves 7 batches" in err

    def test_callback_error_stops_the_session(self, drive):
        class Refusing(ScriptedCallbacks):
            def on_frozen(self, index):
                raise CallbackError(f"nothing frozen for batch {index}")

        status, out, err = drive(Refusing(), [
            HELLO, "STEP index=1 mode=frozen",
        ])
        assert status == 1
        assert out == ["READY"]
        assert "line 2: nothing frozen for batch 1" in err


class TestReplyValidation:
    @staticmethod
    def replying(value):
        class Fixed(ScriptedCallbacks):
            def on_adapt(self, index):
                return value

        return Fixed()

    @pytest.mark.parametrize("reply, problem", [
        ((1, 2, 3), "expected (e_ms, ell_ms, batch_size, correct)"),
        ("nope", "expected (e_ms, ell_ms, batch_size, correct)"),
        ((1, 2, "16", 3), "non-integer batch_size: '16'"),
        ((1, 2, 16, True), "non-integer correct: True"),
        ((1, 2, 0, 0), "returned batch_size 0"),
        ((1, 2, 16, 17), "correct=17 outside 0..16"),
        ((1, 2, 16, -1), "correct=-1 outside 0..16"),
        ((Decimal("-0.5"), 2, 16, 3), "negative e_ms: -0.5"),
        ((object(), 2, 16, 3), "not decimal text"),
        ((1, "fast", 16, 3), "not decimal text"),
    ])
    def test_malformed_reply(self, drive, reply, problem):
        status, _, err = drive(
            self.replying(reply), [HELLO, "STEP index=1 mode=adapt"]
        )
        assert status == 1
        assert problem in err

    def test_floats_reach_the_wire_via_repr(self, drive):
        status, out, _ = drive(
            self.replying((10.25, 0.5, 16, 3)),
            [HELLO, "STEP index=1 mode=adapt", "BYE"],
        )
        assert status == 0
        assert out[1] == "RES e_ms=10.25 ell_ms=0.5 batch_size=16 correct=3"

    def test_int_and_decimal_quantities(self, drive):
        status, out, _ = drive(
            self.replying((41, Decimal("56.123456"), 64, 10)),
            [HELLO, "STEP index=1 mode=adapt", "BYE"],
        )
        assert status == 0
        assert out[1] == (
            "RES e_ms=41 ell_ms=56.123456 batch_size=64 correct=10"
        )


class TestMeasureMs:
    def test_returns_duration_and_result(self):
        duration, result = measure_ms(lambda x: x * 2, 21)
        assert result == 42
        assert isinstance(duration, Decimal)
        assert duration > 0
        # Nanosecond grid: six fractional digits, wire-ready.
        assert duration.as_tuple().exponent == -6

    def test_nothing_in_the_serve_path_times_itself(self, drive, scripted):
        # Scripted latencies must reach the wire untouched; wall clock
        # would make sessions machine-dependent.
        _, out, _ = drive(scripted, [HELLO, "STEP index=4 mode=adapt", "BYE"])
        assert out[1] == "RES e_ms=14.5 ell_ms=4 batch_size=16 correct=4"
