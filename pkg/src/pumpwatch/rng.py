"""Deterministic random numbers for every stochastic step in the toolkit.

All synthetic data, weight initialisation and shuffling draw from SplitMix64,
a 64-bit shift/multiply generator, instead of the platform RNG.  The
algorithm is ~10 lines and fully specified in ``docs/prng.md``, so any other
implementation (another language, a spreadsheet) can reproduce every dataset,
every initial weight and every shuffle bit-for-bit from the seed alone.

The generator is counter-based: output ``i`` depends only on ``(seed, i)``,
which lets us evaluate whole blocks of the stream with vectorised uint64
arithmetic.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(z: np.ndarray) -> np.ndarray:
    # SplitMix64 finaliser; uint64 arithmetic wraps mod 2**64.
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *tags) -> int:
    """Derive an independent child seed from ``seed`` and a list of tags.

    Tags may be ints or strings; strings are folded in bytewise.  Used to
    give each sample / layer / purpose its own stream without coordination.
    """
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        for tag in tags:
            if isinstance(tag, str):
                for b in tag.encode("utf-8"):
                    state = _mix((state + _GOLDEN) ^ np.uint64(b))
            else:
                state = _mix((state + _GOLDEN) ^ np.uint64(int(tag) & 0xFFFFFFFFFFFFFFFF))
    return int(state)


class SplitMix64:
    """Counter-based SplitMix64 stream.

    ``raw(n)`` returns the next ``n`` 64-bit outputs; everything else is
    built on top of it.  Equal ``(seed, call sequence)`` gives bit-equal
    results on every platform.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix(self._seed + idx * _GOLDEN)

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1), using the top 53 bits."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normals(self, n: int) -> np.ndarray:
        """``n`` standard normal doubles via the Box-Muller transform."""
        m = (n + 1) // 2
        # u1 in (0, 1] so the log is always finite.
        u1 = ((self.raw(m) >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def below(self, bound: int) -> int:
        """One integer in [0, bound) via floor(u * bound)."""
        return min(int(self.uniforms(1)[0] * bound), bound - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by ``below``."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> np.ndarray:
        order = list(range(n))
        self.shuffle(order)
        return np.asarray(order, dtype=np.int64)
