"""
Named random streams.

All randomness in a session flows from one integer seed. Each subsystem draws
from its own child stream so that switching one subsystem on or off (an
attack, say) leaves the draws of the others untouched.
"""

from __future__ import annotations

import numpy as np

# Stable spawn keys; never reorder, only append.
STREAM_KEYS: dict[str, int] = {
    "source": 0,
    "channel": 1,
    "detector": 2,
    "attack": 3,
}


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Return the child generator ``name`` of the master ``seed``.

    Args:
        seed: Master seed of the run.
        name: One of STREAM_KEYS.

    Returns:
        An independent numpy Generator, identical for identical (seed, name).

    Raises:
        KeyError: If the stream name is unknown.
    """
    key = STREAM_KEYS[name]
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


def session_streams(seed: int) -> dict[str, np.random.Generator]:
    """Return every named stream of a session keyed by name."""
    return {name: named_stream(seed, name) for name in STREAM_KEYS}
