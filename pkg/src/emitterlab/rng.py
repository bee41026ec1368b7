"""Platform-independent seeded random streams.

Every stream is a bank of ``LANES`` independent xoshiro256** generators advanced
in lock-step with numpy uint64 arithmetic. Lane states are filled from a
splitmix64 sequence keyed by ``(seed, name)``, so named substreams never share
state and results are bit-identical on any platform with IEEE doubles.
"""

import hashlib

import numpy as np

LANES = 1024

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(state, n):
    """Return ``n`` successive splitmix64 outputs starting from ``state``."""
    base = np.uint64(state & _MASK64)
    steps = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = base + steps * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def _key(seed, name):
    digest = hashlib.blake2b(str(name).encode(), digest_size=8).digest()
    return (int(seed) ^ int.from_bytes(digest, "little")) & _MASK64


class Stream:
    """Vectorised xoshiro256** bank for one named substream."""

    def __init__(self, seed, name="", lanes=LANES):
        words = splitmix64(_key(seed, name), 4 * lanes).reshape(4, lanes)
        # an all-zero lane would be stuck forever
        words[0, (words == 0).all(axis=0)] = np.uint64(1)
        self._s = [words[i].copy() for i in range(4)]
        self.lanes = lanes

    def _step(self):
        s0, s1, s2, s3 = self._s
        with np.errstate(over="ignore"):
            out = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self._s[3] = _rotl(s3, 45)
        return out

    def next_uint64(self, n):
        n = int(n)
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        rounds = -(-n // self.lanes)
        out = np.empty(rounds * self.lanes, dtype=np.uint64)
        for i in range(rounds):
            out[i * self.lanes:(i + 1) * self.lanes] = self._step()
        return out[:n]

    def uniform(self, n):
        """Doubles in [0, 1) with 53 random bits."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def exponential(self, n, mean=1.0):
        return -mean * np.log1p(-self.uniform(n))

    def normal(self, n, sigma=1.0):
        n = int(n)
        half = -(-n // 2)
        u1 = 1.0 - self.uniform(half)
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return sigma * z[:n]

    def poisson_times(self, rate, duration):
        """Arrival times of a homogeneous Poisson process on [0, duration)."""
        if rate <= 0 or duration <= 0:
            return np.zeros(0)
        expected = rate * duration
        chunk = int(expected + 6 * np.sqrt(expected) + 16)
        pieces, t0 = [], 0.0
        while True:
            gaps = self.exponential(chunk, 1.0 / rate)
            times = t0 + np.cumsum(gaps)
            pieces.append(times[times < duration])
            if times[-1] >= duration:
                break
            t0 = times[-1]
        return np.concatenate(pieces)


def substreams(seed, *names):
    return [Stream(seed, name) for name in names]
