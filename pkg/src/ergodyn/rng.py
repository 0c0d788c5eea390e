"""Counter-addressable random streams.

Every draw in the package is a pure function of (master_seed, stream_id,
time index, slot).  Streams are backed by numpy's Philox generator: the
128-bit Philox key holds (master_seed, stream_id) and the 256-bit counter
is partitioned into disjoint regions so that

  * each time index owns a fixed block of uniforms (re-readable, so
    backward iterations and couplings can revisit history without storing
    draws),
  * the "primed" copy of the time-0 innovation lives in its own region,
  * per-time-index Poisson arrival streams get an open-ended region.

Philox ``advance(delta)`` moves the counter by ``delta`` blocks of four
64-bit outputs; ``Generator.random`` consumes one 64-bit output per double.
Both facts are relied on below and pinned by tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Counter layout, in `advance` units (one unit = 4 uint64 outputs).
_TIME_OFFSET = 1 << 52          # maps signed time indices to nonnegative positions
_UNITS_PER_T = 2                # 2 units = 8 doubles per time index
BLOCK_WIDTH = 8                 # doubles available per time index
_PRIME_BASE = 1 << 96           # region for the independent copy of a draw
_ARRIVAL_SHIFT = 128            # arrival stream for time t starts at (t+off) << 128
_ARRIVAL_PRIME = 1 << 127

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedStream:
    """Identifies one replicable stream of draws.

    Distinct (master_seed, stream_id) pairs index statistically independent
    Philox streams; regenerating with the same pair reproduces every draw
    bit for bit.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must fit in 64 bits")
        if not 0 <= self.stream_id <= _MASK64:
            raise ValueError("stream_id must be a nonnegative 64-bit integer")

    def replicate(self, r: int) -> "SeedStream":
        """Stream for replicate ``r`` (independent of this one for r > 0)."""
        return SeedStream(self.master_seed, self.stream_id + r)

    @property
    def _key(self) -> int:
        return (self.master_seed << 64) | self.stream_id


def _generator_at(stream: SeedStream, units: int) -> np.random.Generator:
    bg = np.random.Philox(key=stream._key)
    bg.advance(units)
    return np.random.Generator(bg)


def _time_units(t: int) -> int:
    u = t + _TIME_OFFSET
    if u < 0 or u >= (1 << 53):
        raise ValueError(f"time index {t} outside supported range")
    return u


def uniform_block(stream: SeedStream, t0: int, t1: int, prime: bool = False) -> np.ndarray:
    """Uniforms for time indices t0..t1 inclusive, shape (t1-t0+1, BLOCK_WIDTH).

    Row i is a pure function of (stream, t0+i); requesting any sub-range
    returns the identical rows.  ``prime=True`` addresses the disjoint
    region used for the independent-copy coupling.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    units = _time_units(t0) * _UNITS_PER_T
    if prime:
        units += _PRIME_BASE
    gen = _generator_at(stream, units)
    n = t1 - t0 + 1
    u = gen.random((n, BLOCK_WIDTH))
    # keep inverse-CDF transforms finite
    return np.clip(u, 2.0 ** -53, 1.0 - 2.0 ** -53)


def arrival_generator(stream: SeedStream, t: int, prime: bool = False) -> np.random.Generator:
    """Open-ended generator for the time-t unit-rate Poisson arrival stream."""
    units = _time_units(t) << _ARRIVAL_SHIFT
    if prime:
        units += _ARRIVAL_PRIME
    return _generator_at(stream, units)
