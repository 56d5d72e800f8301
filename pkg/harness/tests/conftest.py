import io
import json
from decimal import Decimal

import pytest

from tempora_harness import serve


@pytest.fixture
def drive():
    """Run one serve() loop over scripted input lines."""

    def run(callbacks, lines, **kwargs):
        stdin = io.StringIO("".join(line + "\n" for line in lines))
        stdout, stderr = io.StringIO(), io.StringIO()
        status = serve(callbacks, stdin, stdout, stderr, **kwargs)
        return status, stdout.getvalue().splitlines(), stderr.getvalue()

    return run


@pytest.fixture
def jsonl():
    """Fixture file text builder; Decimal values become bare JSON numbers
    so files carry exact decimals, never binary floats."""

    def render(obj):
        parts = []
        for key, value in obj.items():
            if isinstance(value, Decimal):
                parts.append(f'"{key}": {value}')
            else:
                parts.append(f'"{key}": {json.dumps(value)}')
        return "{" + ", ".join(parts) + "}"

    def build(header, records):
        return "".join(render(obj) + "\n" for obj in [header] + list(records))

    return build
