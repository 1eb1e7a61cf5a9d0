"""Keyed random streams for reproducible parallel Monte Carlo.

Every simulated path draws from its own xoshiro256** stream whose state is
derived from ``(seed, path_index)`` through SplitMix64.  Paths therefore
never share state, and results do not depend on how paths are scheduled
across workers.

Two implementations live here: a pure-Python reference (:class:`KeyedStream`)
and the numba versions used inside the integrator kernels.  The test suite
checks that they agree bit for bit.
"""

import math

import numpy as np
from numba import njit

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
GOLDEN_GAMMA = 0x9E37_79B9_7F4A_7C15
SEED_SALT = 0x5851_F42D_4C95_7F2D


def splitmix64_mix(z):
    """Finalizer of SplitMix64 applied to a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(state):
    """Return ``(output, new_state)`` for one SplitMix64 step."""
    state = (state + GOLDEN_GAMMA) & MASK64
    return splitmix64_mix(state), state


def derive_state(seed, path_index):
    """xoshiro256** state words for stream ``(seed, path_index)``."""
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if path_index < 0:
        raise ValueError("path_index must be nonnegative")
    h = splitmix64_mix(seed ^ SEED_SALT)
    h = splitmix64_mix((h + path_index) & MASK64)
    words = []
    for _ in range(4):
        out, h = splitmix64(h)
        words.append(out)
    if not any(words):
        words[0] = 1
    return words


def _signed32(v):
    return v - (1 << 32) if v >= (1 << 31) else v


def _ziggurat_tables(layers=128, r=3.442619855899, v=9.91256303526217e-3):
    """Marsaglia-Tsang tables for 32-bit signed mantissas."""
    m1 = 2.0**31
    kn = np.zeros(layers)
    wn = np.zeros(layers)
    fn = np.zeros(layers)
    dn = tn = r
    q = v / math.exp(-0.5 * dn * dn)
    kn[0] = (dn / q) * m1
    kn[1] = 0.0
    wn[0] = q / m1
    wn[layers - 1] = dn / m1
    fn[0] = 1.0
    fn[layers - 1] = math.exp(-0.5 * dn * dn)
    for i in range(layers - 2, 0, -1):
        dn = math.sqrt(-2.0 * math.log(v / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = (dn / tn) * m1
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


ZIG_R = 3.442619855899
ZIG_K, ZIG_W, ZIG_F = _ziggurat_tables()


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class KeyedStream:
    """Pure-Python xoshiro256** stream keyed by ``(seed, path_index)``.

    Slow; meant as a reference for the compiled kernels and for small
    scalar draws.
    """

    def __init__(self, seed, path_index=0):
        self.s = derive_state(seed, path_index)

    @classmethod
    def from_state(cls, words):
        obj = cls.__new__(cls)
        obj.s = [int(w) & MASK64 for w in words]
        return obj

    def next_u64(self):
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self):
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self):
        """Standard normal variate (128-layer ziggurat)."""
        while True:
            u = self.next_u64()
            iz = u & 127
            hz = _signed32(u >> 32)
            if abs(hz) < ZIG_K[iz]:
                return hz * ZIG_W[iz]
            x = hz * ZIG_W[iz]
            if iz == 0:
                while True:
                    x = -math.log(1.0 - self.uniform()) / ZIG_R
                    y = -math.log(1.0 - self.uniform())
                    if y + y >= x * x:
                        break
                return ZIG_R + x if hz > 0 else -ZIG_R - x
            if ZIG_F[iz] + self.uniform() * (ZIG_F[iz - 1] - ZIG_F[iz]) < math.exp(-0.5 * x * x):
                return x


# -- compiled versions -------------------------------------------------------

_U64_GAMMA = np.uint64(GOLDEN_GAMMA)
_U64_SALT = np.uint64(SEED_SALT)
_M1 = np.uint64(0xBF58_476D_1CE4_E5B9)
_M2 = np.uint64(0x94D0_49BB_1331_11EB)
_ZK = ZIG_K.copy()
_ZW = ZIG_W.copy()
_ZF = ZIG_F.copy()


@njit(cache=True, nogil=True)
def _mix_nb(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def seed_stream_nb(seed, path_index, state):
    """Fill ``state`` (uint64[4]) for stream ``(seed, path_index)``."""
    h = _mix_nb(np.uint64(seed) ^ _U64_SALT)
    h = _mix_nb(h + np.uint64(path_index))
    zero = True
    for i in range(4):
        h = h + _U64_GAMMA
        state[i] = _mix_nb(h)
        if state[i] != np.uint64(0):
            zero = False
    if zero:
        state[0] = np.uint64(1)


@njit(cache=True, nogil=True, inline="always")
def _rotl_nb(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, nogil=True, inline="always")
def next_u64_nb(s):
    result = _rotl_nb(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl_nb(s[3], 45)
    return result


@njit(cache=True, nogil=True, inline="always")
def uniform_nb(s):
    return float(next_u64_nb(s) >> np.uint64(11)) * 2.0**-53


@njit(cache=True, nogil=True)
def normal_nb(s):
    """Standard normal variate (128-layer ziggurat)."""
    while True:
        u = next_u64_nb(s)
        iz = np.int64(u & np.uint64(127))
        hz = np.int64(u >> np.uint64(32))
        if hz >= 2147483648:
            hz -= 4294967296
        if abs(hz) < _ZK[iz]:
            return hz * _ZW[iz]
        x = hz * _ZW[iz]
        if iz == 0:
            while True:
                x = -math.log(1.0 - uniform_nb(s)) / ZIG_R
                y = -math.log(1.0 - uniform_nb(s))
                if y + y >= x * x:
                    break
            if hz > 0:
                return ZIG_R + x
            return -ZIG_R - x
        if _ZF[iz] + uniform_nb(s) * (_ZF[iz - 1] - _ZF[iz]) < math.exp(-0.5 * x * x):
            return x


@njit(cache=True)
def _draw_normals_nb(seed, path_index, n):
    state = np.empty(4, dtype=np.uint64)
    seed_stream_nb(seed, path_index, state)
    out = np.empty(n)
    for i in range(n):
        out[i] = normal_nb(state)
    return out


@njit(cache=True)
def _draw_u64_nb(seed, path_index, n):
    state = np.empty(4, dtype=np.uint64)
    seed_stream_nb(seed, path_index, state)
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = next_u64_nb(state)
    return out


def normals(seed, path_index, n):
    """``n`` standard normals from stream ``(seed, path_index)`` (compiled)."""
    return _draw_normals_nb(np.uint64(seed), np.uint64(path_index), n)


def raw_u64(seed, path_index, n):
    """``n`` raw 64-bit outputs from stream ``(seed, path_index)`` (compiled)."""
    return _draw_u64_nb(np.uint64(seed), np.uint64(path_index), n)
