"""Counter-based random streams.

Every random number in the package is a pure function of a 64-bit key and a
128-bit counter, computed with Philox4x32-10.  Paths and environment cells
address their own counters, so results never depend on evaluation order or
on how work is split between threads.
"""
import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH21 = np.uint64(21)
_SH11 = np.uint64(11)

# high word of the counter reserved for path streams; cell draws stay below it
PATH_TAG = 0xA5A50000
_PATH_TAG = np.uint64(PATH_TAG)
TWO_PI = 2.0 * math.pi


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function.  All arguments are uint64 holding 32-bit words."""
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SH32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SH32
        lo1 = p1 & _MASK32
        c0 = (hi1 ^ c1 ^ k0) & _MASK32
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & _MASK32
        c3 = lo0
        if r < 9:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def _to_unit(a, b):
    # 53 random bits mapped to the open interval (0, 1)
    v = (a << _SH21) ^ (b >> _SH11)
    return (float(v) + 0.5) * 1.1102230246251565e-16


@njit(cache=True, nogil=True)
def uniform_pair(c0, c1, c2, c3, k0, k1):
    r0, r1, r2, r3 = philox4x32(c0, c1, c2, c3, k0, k1)
    return _to_unit(r0, r1), _to_unit(r2, r3)


@njit(cache=True, nogil=True)
def normal_pair(call, path, k0, k1):
    """Two independent standard normals for call number ``call`` of stream ``path``."""
    u1, u2 = uniform_pair(np.uint64(call) & _MASK32, np.uint64(path) & _MASK32,
                          np.uint64(path) >> _SH32, _PATH_TAG, k0, k1)
    rad = math.sqrt(-2.0 * math.log(u1))
    return rad * math.cos(TWO_PI * u2), rad * math.sin(TWO_PI * u2)


def derive_key(seed, *tags):
    """Split a 64-bit master seed into a Philox key for the sub-stream named by ``tags``.

    Returns two uint64 values holding the 32-bit key words.
    """
    words = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags)).generate_state(2, np.uint32)
    return np.uint64(words[0]), np.uint64(words[1])


def derive_seed(seed, *tags):
    """A 64-bit integer seed for a child stream, e.g. environment number ``i`` of a run."""
    words = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags)).generate_state(1, np.uint64)
    return int(words[0])
