"""Distance recorders, least-significant-bit helper and the seeded hash family.

A distance recorder (DR) is a ``z``-bit saturating counter holding the number of
slices since an item was last seen.  ``0`` means "seen in the current slice" and
the all-ones value ``2**z - 1`` is the expired/never-seen sentinel.

Every operation comes in a scalar flavour (plain ``int``) and works unchanged on
numpy arrays of the dtype returned by :func:`dtype_for`.

Concurrency contract: during a scan phase the only mutation is :func:`dr_set`,
which is idempotent and moves values monotonically down to 0, so concurrent
writers on the same recorder are race-benign.  :func:`dr_slide` and
:func:`dr_init` belong to the exclusive maintenance phase between slices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_Z = 32

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def sentinel(z: int) -> int:
    if not 1 <= z <= MAX_Z:
        raise ValueError(f"recorder width z={z} outside [1, {MAX_Z}]")
    return (1 << z) - 1


def dtype_for(z: int) -> np.dtype:
    """Smallest unsigned machine width holding ``z`` bits."""
    sentinel(z)
    for dt in (np.uint8, np.uint16, np.uint32):
        if z <= np.iinfo(dt).bits:
            return np.dtype(dt)
    raise AssertionError("unreachable")


def check_window(k: int, z: int) -> None:
    """Reject a window length a ``z``-bit recorder cannot represent."""
    if not 1 <= k <= sentinel(z):
        raise ValueError(f"window length k={k} outside [1, {sentinel(z)}] for z={z}")


def dr_init(z: int) -> int:
    return sentinel(z)


def dr_set(value=None):
    """Record an appearance in the current slice.  Always 0."""
    return 0


def dr_slide(value, z: int):
    s = sentinel(z)
    if isinstance(value, np.ndarray):
        out = value.copy()
        slide_inplace(out, z)
        return out
    return value + 1 if value < s else value


def dr_join(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.maximum(a, b)
    return max(a, b)


def dr_active(value, k: int):
    return value < k


_SLIDE_BLOCK = 1 << 16


def slide_inplace(arr: np.ndarray, z: int) -> None:
    """Saturating increment of every recorder in ``arr``, in place."""
    s = arr.dtype.type(sentinel(z))
    if not arr.flags.c_contiguous:
        np.add(arr, arr != s, out=arr, casting="unsafe")
        return
    # cache-sized blocks; adding the mask is far faster than a ``where=`` add
    flat = arr.reshape(-1)
    mask = np.empty(min(flat.size, _SLIDE_BLOCK), dtype=bool)
    for lo in range(0, flat.size, _SLIDE_BLOCK):
        block = flat[lo:lo + _SLIDE_BLOCK]
        m = mask[:block.size]
        np.not_equal(block, s, out=m)
        np.add(block, m, out=block, casting="unsafe")


def active_count(arr: np.ndarray, k: int, axis=None):
    return np.count_nonzero(arr < k, axis=axis)


@dataclass
class DistanceRecorder:
    """A single recorder; mostly useful for reference models and tests."""

    z: int = 16
    value: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.value == -1:
            self.value = dr_init(self.z)
        if not 0 <= self.value <= sentinel(self.z):
            raise ValueError(f"value {self.value} out of range for z={self.z}")

    def init(self) -> "DistanceRecorder":
        self.value = dr_init(self.z)
        return self

    def set(self) -> "DistanceRecorder":
        self.value = dr_set()
        return self

    def slide(self) -> "DistanceRecorder":
        self.value = dr_slide(self.value, self.z)
        return self

    def join(self, other: "DistanceRecorder") -> "DistanceRecorder":
        if other.z != self.z:
            raise ValueError(f"cannot join recorders of width {self.z} and {other.z}")
        return DistanceRecorder(self.z, dr_join(self.value, other.value))

    def active(self, k: int) -> bool:
        return dr_active(self.value, k)


def lsb(x):
    """Index of the lowest set bit of a 32-bit value; ``lsb(0) == 32``.

    >>> lsb(3), lsb(40), lsb(0)
    (0, 3, 32)
    """
    if isinstance(x, np.ndarray):
        x = x.astype(np.uint64) & np.uint64(0xFFFFFFFF)
        low = x & (~x + np.uint64(1))
        out = np.full(x.shape, 32, dtype=np.int64)
        nz = low != 0
        # powers of two are exact in float64
        out[nz] = np.log2(low[nz].astype(np.float64)).astype(np.int64)
        return out
    x &= 0xFFFFFFFF
    if x == 0:
        return 32
    return (x & -x).bit_length() - 1


def _mix64(x: int) -> int:
    x ^= x >> 30
    x = (x * _M1) & _MASK64
    x ^= x >> 27
    x = (x * _M2) & _MASK64
    x ^= x >> 31
    return x


def _mix64_array(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(_M1)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(_M2)
    x = x ^ (x >> np.uint64(31))
    return x


@dataclass(frozen=True)
class HashFamily:
    """One member of a seeded 64-bit mixer family over 32-bit addresses.

    Members with different ``index`` under the same ``seed`` behave as
    independent functions.  Scalars in, scalars out; arrays in, arrays out.
    """

    seed: int
    index: int = 0

    @property
    def key(self) -> int:
        return _mix64((self.seed + (self.index + 1) * _GOLDEN) & _MASK64)

    def u32(self, ip):
        if isinstance(ip, np.ndarray):
            x = ip.astype(np.uint64) ^ np.uint64(self.key)
            return (_mix64_array(x) >> np.uint64(32)).astype(np.uint32)
        return _mix64((ip & 0xFFFFFFFF) ^ self.key) >> 32

    def range(self, ip, m: int):
        if m < 1:
            raise ValueError("range size must be >= 1")
        h = self.u32(ip)
        if isinstance(h, np.ndarray):
            return ((h.astype(np.uint64) * np.uint64(m)) >> np.uint64(32)).astype(np.int64)
        return (h * m) >> 32


def hash_to_u32(h: HashFamily, ip):
    return h.u32(ip)


def hash_to_range(h: HashFamily, ip, m: int):
    return h.range(ip, m)


# function indices within one family
SAMPLE_FN = 1  # LSB sampling of the opposite host
SRE_INDEX_FN = 2
LE_INDEX_FN = 3
SI_INDEX_FN = 4
ROW_FN_BASE = 16

SI_BITS = 16


@dataclass(frozen=True)
class HashSuite:
    """All hash functions one sketch needs, derived from a single seed."""

    seed: int = 0

    @property
    def sample(self) -> HashFamily:
        return HashFamily(self.seed, SAMPLE_FN)

    @property
    def sre_index(self) -> HashFamily:
        return HashFamily(self.seed, SRE_INDEX_FN)

    @property
    def le_index(self) -> HashFamily:
        return HashFamily(self.seed, LE_INDEX_FN)

    @property
    def si_index(self) -> HashFamily:
        return HashFamily(self.seed, SI_INDEX_FN)

    def row(self, i: int) -> HashFamily:
        return HashFamily(self.seed, ROW_FN_BASE + i)

    def sampled(self, bip, tau: int):
        """True where ``lsb(H_1(bip)) >= tau``."""
        h = self.sample.u32(bip)
        if tau <= 0:
            return np.ones(h.shape, dtype=bool) if isinstance(h, np.ndarray) else True
        if tau > 32:
            return np.zeros(h.shape, dtype=bool) if isinstance(h, np.ndarray) else False
        if tau == 32:
            return h == 0
        mask = (1 << tau) - 1
        if isinstance(h, np.ndarray):
            return (h & np.uint32(mask)) == 0
        return (h & mask) == 0
