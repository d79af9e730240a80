"""Counter-based random number streams.

All randomness in the package flows through Philox generators keyed by
(seed, stream, draw_index).  Because each key yields an independent stream,
samples, trials, and sweep cells can be computed in any order, or split
across workers, and still produce identical draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

# Purpose tags for the high bits of the stream word.  Entities (sample index,
# trial index, sweep cell, ...) occupy the low 26 bits.
MEASUREMENT = 1
DATASET = 2
SAMPLER = 3
INITIAL_CONDITION = 4
TRIAL = 5

_ENTITY_BITS = 26


def entity_stream(purpose: int, entity: int = 0) -> int:
    """Pack a (purpose, entity) pair into a single stream id."""
    if entity < 0 or entity >= (1 << _ENTITY_BITS):
        raise ValueError(f"entity index {entity} out of range")
    return (purpose << _ENTITY_BITS) | entity


def generator(seed: int, stream: int, draw_index: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream, draw_index).

    Equal keys give bitwise-equal draw sequences on every platform numpy
    supports, independent of any other generator in the process.
    """
    key = np.array(
        [seed & _MASK64, ((stream & _MASK32) << 32) | (draw_index & _MASK32)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def normal(seed: int, stream: int, draw_index: int, size) -> np.ndarray:
    """Standard-normal draws, a pure function of (seed, stream, draw_index)."""
    return generator(seed, stream, draw_index).standard_normal(size)


def uniform(seed: int, stream: int, draw_index: int, size) -> np.ndarray:
    """Uniform [0, 1) draws, a pure function of (seed, stream, draw_index)."""
    return generator(seed, stream, draw_index).random(size)
