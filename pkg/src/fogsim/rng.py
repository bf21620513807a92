"""Seeded xoshiro256** generator.

Pure-integer arithmetic masked to 64 bits, so a given seed yields the same
stream on every platform and Python version. State is seeded through
splitmix64 as recommended by the xoshiro authors.
"""

import math

ALGORITHM = "xoshiro256**/splitmix64"

_MASK = (1 << 64) - 1


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def splitmix64(state):
    """Return (next_state, output) for one splitmix64 step."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** with a small float/exponential helper surface."""

    algorithm = ALGORITHM

    def __init__(self, seed=0, *, state=None):
        if state is not None:
            if len(state) != 4 or not any(state):
                raise ValueError("state must be four 64-bit words, not all zero")
            self._s = [int(w) & _MASK for w in state]
            return
        sm = int(seed) & _MASK
        words = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        self._s = words

    def next_u64(self):
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self):
        """Uniform float in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.random()

    def randbelow(self, n):
        if n <= 0:
            raise ValueError("n must be positive")
        # rejection sampling keeps the result unbiased
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def exponential(self, mean):
        if mean <= 0:
            return 0.0
        return -mean * math.log(1.0 - self.random())

    def getstate(self):
        return tuple(self._s)

    def spawn(self, salt):
        """Independent child stream derived from this state and an integer salt."""
        sm = (self._s[0] ^ (int(salt) * 0xD1B54A32D192ED03)) & _MASK
        return Xoshiro256(sm)
