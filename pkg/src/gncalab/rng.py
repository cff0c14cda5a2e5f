"""Deterministic counter-based random streams.

Every stochastic routine in the package draws from a `Stream`, which is a
splitmix64 generator addressed by (key, counter). The same key always yields
the same sequence regardless of platform, numpy version or call interleaving,
because each output depends only on the key and the draw index. Streams are
cheap to fork: `derive(label)` produces a statistically independent child
stream without consuming draws from the parent.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # golden-ratio increment, the splitmix64 constant
_INV53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    """Scalar splitmix64 finalizer (python ints, explicit 64-bit wrap)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2**64, which is exactly what we want
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Counter-based splitmix64 stream with vectorized draws."""

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, _counter: int = 0):
        self.key = _mix(int(seed) ^ 0x6A09E667F3BCC908)
        self.counter = int(_counter)

    def derive(self, label: int) -> "Stream":
        """Fork a child stream; children with distinct labels are independent."""
        child = Stream.__new__(Stream)
        child.key = _mix(self.key ^ _mix((label + 1) * _GAMMA))
        child.counter = 0
        return child

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _mix_array(np.uint64(self.key) + idx * np.uint64(_GAMMA))

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Doubles in [low, high), full 53-bit resolution."""
        shape = () if shape is None else shape
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV53
        out = low + u * (high - low)
        return out.reshape(shape) if shape else float(out[0])

    def bits(self, shape) -> np.ndarray:
        """0/1 floats, fair coin per entry."""
        n = int(np.prod(shape))
        return (self._raw(n) >> np.uint64(63)).astype(np.float64).reshape(shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        """Uniform ints in [low, high] inclusive (modulo bias < 2**-50 here)."""
        span = int(high) - int(low) + 1
        if span <= 0:
            raise ValueError("integers() needs high >= low")
        shape = () if shape is None else shape
        n = int(np.prod(shape)) if shape else 1
        vals = low + (self._raw(n) % np.uint64(span)).astype(np.int64)
        return vals.reshape(shape) if shape else int(vals[0])

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        order = np.arange(n)
        if n > 1:
            js = self._raw(n - 1)  # j for i = n-1 .. 1
            for k, i in enumerate(range(n - 1, 0, -1)):
                j = int(js[k] % np.uint64(i + 1))
                order[i], order[j] = order[j], order[i]
        return order

    def sample_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), order random."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        pool = np.arange(n)
        js = self._raw(k)
        for i in range(k):
            j = i + int(js[i] % np.uint64(n - i))
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()

    def glorot(self, fan_in: int, fan_out: int) -> np.ndarray:
        """Glorot-uniform matrix of shape (fan_in, fan_out)."""
        s = float(np.sqrt(6.0 / (fan_in + fan_out)))
        return self.uniform((fan_in, fan_out), -s, s)
