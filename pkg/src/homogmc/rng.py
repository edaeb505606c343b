"""Counter-based randomness: every draw is a pure function of (seed, labels).

Two layers:

* a vectorized SplitMix64 avalanche over ``uint64`` arrays, used for random
  access into lattice marks at arbitrary (possibly huge) integer coordinates;
* labeled seed derivation for numpy ``Generator`` streams, so that parallel
  workers get disjoint, order-independent streams from one master seed.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


class Stream(IntEnum):
    """Labeled counter for sub-stream derivation from a master seed."""

    FIELD_SHIFT = 1
    FIELD_MARKS = 2
    FIELD_REALIZATION = 3
    PATH = 4
    PATH_REFINE = 5
    LIMIT_FIELD = 6
    SWEEP_PATHS = 7
    SWEEP_LIMIT = 8
    EMPIRICAL = 9
    SIGMA_MC = 10
    DIAG = 11


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = (x + _GOLDEN).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _as_u64(x) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype == np.uint64:
        return a
    if np.issubdtype(a.dtype, np.floating):
        raise TypeError("hash inputs must be integers")
    return a.astype(np.int64).view(np.uint64)


def hash_u64(*parts) -> np.ndarray:
    """Avalanche-fold integer arrays into one uint64 hash (broadcasting)."""
    h = splitmix64(_as_u64(parts[0]))
    for p in parts[1:]:
        h = splitmix64(h ^ _as_u64(p))
    return h


def uniform01(h: np.ndarray) -> np.ndarray:
    """Map uint64 hashes to floats in [0, 1) with 53-bit resolution."""
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(master: int, stream: Stream, index: int = 0) -> int:
    """Child seed for (master, labeled counter, index); a plain Python int."""
    h = hash_u64(
        np.uint64(master & _U64_MASK),
        np.uint64(int(stream)),
        np.int64(index).view(np.uint64),
    )
    return int(h)


def generator(master: int, stream: Stream, index: int = 0) -> np.random.Generator:
    """Deterministic numpy Generator for the given labeled sub-stream."""
    return np.random.default_rng(derive_seed(master, stream, index))
