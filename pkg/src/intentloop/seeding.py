"""Deterministic seed derivation.

Every stochastic decision in the package draws from a generator seeded
by mixing a base seed with string tags and integers identifying the
decision (instance id, iteration index, channel name). Decisions are
therefore independent of each other: changing one probability never
shifts the random draws of an unrelated channel.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix(seed: int, *parts: int | str) -> int:
    """Mix a 64-bit seed with tags into a new 64-bit seed."""
    state = seed & _MASK
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                state = _splitmix64(state ^ byte)
        else:
            state = _splitmix64(state ^ (int(part) & _MASK))
    return _splitmix64(state)


def rng_for(seed: int, *parts: int | str) -> np.random.Generator:
    """A generator dedicated to one decision, identified by its tags."""
    return np.random.default_rng(mix(seed, *parts))


def u01(seed: int, *parts: int | str) -> float:
    """One uniform [0, 1) draw keyed by tags; cheaper than a Generator."""
    return mix(seed, *parts) / float(1 << 64)


def uniform(lo: float, hi: float, seed: int, *parts: int | str) -> float:
    return lo + u01(seed, *parts) * (hi - lo)


def pick(n: int, seed: int, *parts: int | str) -> int:
    """Uniform index in [0, n)."""
    return min(int(u01(seed, *parts) * n), n - 1)


def pick_weighted(weights: list[float], seed: int, *parts: int | str) -> int:
    total = sum(weights)
    target = u01(seed, *parts) * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if target < acc:
            return i
    return len(weights) - 1


def normal(sigma: float, seed: int, *parts: int | str) -> float:
    """One zero-mean gaussian draw (Box-Muller over two keyed uniforms)."""
    import math

    u1 = max(u01(seed, "bm1", *parts), 1e-12)
    u2 = u01(seed, "bm2", *parts)
    return sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def poisson(lam: float, seed: int, *parts: int | str) -> int:
    """Knuth sampling; fine for the small means used here."""
    import math

    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    k, product = 0, 1.0
    while True:
        product *= u01(seed, "poisson", k, *parts)
        if product <= limit:
            return k
        k += 1
