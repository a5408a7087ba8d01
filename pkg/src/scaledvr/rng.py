"""Seeded random sources with fixed, documented per-purpose streams.

Every random decision in this package flows through a RandomSource. The
generator is SplitMix64 (64-bit state, published mixing constants; see
``_kernels_py`` for the exact recurrence), chosen because it is trivial to
reproduce exactly in any language. A source is addressed by
``(seed, stream, counter)``:

    state0 = mix64(mix64((seed mod 2^64) xor (code * GAMMA mod 2^64))
                   xor (counter * GAMMA mod 2^64))

with stream codes batch-sampling=1, rademacher=2, coin-flip=3,
permutation=4. Identical (seed, stream, counter) always yields the
identical sequence; distinct purposes never share a stream, so adding or
removing one consumer (say, the preconditioner) does not shift anyone
else's draws.

Sources are single-owner: hand one to exactly one consumer loop. The
module-level operations mutate the source state in place.
"""

import enum

import numpy as np

from ._kernels_py import GAMMA, MASK64, mix64, next_u64
from .backend import kernels as _k
from .errors import EmptyDimensionError, InvalidBatchError, InvalidProbabilityError


class Stream(enum.Enum):
    """Purpose tag of a random stream."""

    BATCH = "batch-sampling"
    RADEMACHER = "rademacher"
    COIN = "coin-flip"
    PERMUTATION = "permutation"


_STREAM_CODE = {
    Stream.BATCH: 1,
    Stream.RADEMACHER: 2,
    Stream.COIN: 3,
    Stream.PERMUTATION: 4,
}


def _stream_state(seed: int, stream: Stream, counter: int) -> int:
    s = mix64((seed & MASK64) ^ ((_STREAM_CODE[stream] * GAMMA) & MASK64))
    return mix64(s ^ (((counter & MASK64) * GAMMA) & MASK64))


class RandomSource:
    """SplitMix64 stream addressed by (seed, stream, counter)."""

    __slots__ = ("seed", "stream", "counter", "_state")

    def __init__(self, seed: int, stream: Stream, counter: int = 0):
        self.seed = seed
        self.stream = Stream(stream)
        self.counter = counter
        self._state = _stream_state(seed, self.stream, counter)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, stream={self.stream.value!r}, counter={self.counter})"

    def next_u64(self) -> int:
        self._state, u = next_u64(self._state)
        return u

    def next_double(self) -> float:
        """Uniform in [0, 1): top 53 bits of the next output."""
        return (self.next_u64() >> 11) * 2.0**-53


def rademacher(rng: RandomSource, d: int) -> np.ndarray:
    """Vector of independent +-1 entries (top output bit: 0 -> +1)."""
    if d < 1:
        raise EmptyDimensionError(f"rademacher vector needs d >= 1, got {d}")
    out = np.empty(d, dtype=np.float64)
    rng._state = _k.fill_rademacher(rng._state, out)
    return out


def sample_batch(rng: RandomSource, n: int, b: int) -> np.ndarray:
    """b distinct indices uniform over {0..n-1}, in draw order."""
    if n < 1:
        raise InvalidBatchError(f"population must be nonempty, got n={n}")
    if b < 1:
        raise InvalidBatchError(f"batch needs at least one index, got b={b}")
    if b > n:
        raise InvalidBatchError(f"batch size {b} exceeds population size {n}")
    out = np.empty(b, dtype=np.int64)
    rng._state = _k.fill_sample(rng._state, n, out)
    return out


def coin(rng: RandomSource, p: float) -> bool:
    """True with probability p (exact at p=0 and p=1)."""
    if not 0.0 <= p <= 1.0:
        raise InvalidProbabilityError(f"probability must lie in [0, 1], got {p}")
    return rng.next_double() < p


def permutation(rng: RandomSource, n: int) -> np.ndarray:
    """Uniform permutation of 0..n-1 (Fisher-Yates)."""
    if n < 1:
        raise EmptyDimensionError(f"permutation needs n >= 1, got {n}")
    out = np.empty(n, dtype=np.int64)
    rng._state = _k.fill_permutation(rng._state, out)
    return out
