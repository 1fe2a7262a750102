"""Counter-based random streams (splitmix64).

Every random draw in this package is a pure function of (seed, counter):

    out(seed, n) = mix64(seed + (n + 1) * 0x9E3779B97F4A7B15)  mod 2**64

where mix64 is the splitmix64 finalizer (Steele/Lea/Flood; the same mix
used to seed the xoshiro family).  Uniform doubles take the top 53 bits,
giving values in [0, 1).

A stateless generator was chosen over numpy's stateful ones because the
same stream must be reproducible from three places -- vectorized numpy
(environment sequences), the compiled simulation kernel (action sampling
and tie draws), and plain python (tests) -- and because it makes resuming
a run at period t exact: the draw for any period is recomputed from its
counter alone.

Counter layout within one run of horizon T with N bidders, period t:
    t*(N+1) + i      action-sampling uniform for bidder i
    t*(N+1) + N      tie-break uniform (consumed lazily; counters are
                     position-based, not consumption-based)
The environment stream uses the same layout under its own seed:
    t*(N+1)          query draw
    t*(N+1) + 1 + i  type draw for bidder i
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7B15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53_INV = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer on uint64 scalars or arrays (wraps mod 2**64)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def raw(seed: int, counters: np.ndarray | int) -> np.ndarray | np.uint64:
    """Raw 64-bit outputs for the given counters under ``seed``."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        out = mix64(np.uint64(seed) + (c + np.uint64(1)) * _GOLDEN)
    return out


def uniforms(seed: int, counters: np.ndarray | int) -> np.ndarray | float:
    """Uniform [0, 1) doubles for the given counters under ``seed``."""
    return (raw(seed, counters) >> np.uint64(11)) * _U53_INV


def derive_seed(master_seed: int, index: int) -> int:
    """Child seed ``index`` of ``master_seed``.

    Index 0 is reserved for the environment stream, 1 + k for run k.
    """
    return int(raw(master_seed, np.uint64(index)))


def env_seed_from_master(master_seed: int) -> int:
    return derive_seed(master_seed, 0)


def run_seeds_from_master(master_seed: int, runs: int) -> tuple[int, ...]:
    return tuple(derive_seed(master_seed, 1 + k) for k in range(runs))
