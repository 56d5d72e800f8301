import pytest

from tempora import BatchRecord, MethodTrace

MS = 10**6

DEFAULT_LAMBDA_NS = 39_900_000


@pytest.fixture
def make_trace():
    """Factory for small hand-rolled traces.

    ``e``/``ell`` are per-batch nanosecond lists (``ell`` defaults to all
    zero), ``correct`` defaults to half the batch size.
    """

    def make(e, ell=None, correct=None, batch_size=10,
             lambda_ns=DEFAULT_LAMBDA_NS, method="m", corruption=None):
        ell = ell if ell is not None else [0] * len(e)
        correct = correct if correct is not None else [batch_size // 2] * len(e)
        records = tuple(
            BatchRecord(i + 1, e[i], ell[i], batch_size, correct[i])
            for i in range(len(e))
        )
        return MethodTrace(
            method=method, lambda_ns=lambda_ns, records=records,
            corruption=corruption,
        )

    return make
