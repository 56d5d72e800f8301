"""Reference provider speaking the evaluation engine's line protocol.

Wraps user adapt/predict callbacks (or a recorded fixture, in echo mode)
behind the stdin/stdout request loop the engine drives.  Pure stdlib: user
callbacks bring their own model dependencies.
"""

from .protocol import (
    BatchReply,
    CallbackError,
    EXIT_OK,
    EXIT_PROTOCOL,
    EXIT_USAGE,
    HarnessCallbacks,
    MODE_ADAPT,
    MODE_FROZEN,
    PROTOCOL_TAGS,
    measure_ms,
    serve,
)
from .replay import (
    EchoCallbacks,
    Fixture,
    FixtureError,
    FixtureRecord,
    FrozenTail,
    load_fixture,
    load_frozen_tail,
)
from .cli import main

__all__ = [name for name in dir() if not name.startswith("_")]
