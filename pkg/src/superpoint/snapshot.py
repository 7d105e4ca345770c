"""Versioned little-endian binary snapshots of an SEArray plus its candidate list.

Layout::

    b"SEAS"  u8 version
    <u4 u, v, g, g_prime, z, k, theta   <u8 seed   <f8 rho
    <u2[u*v]            SI bits
    <uN[u*v*g]          SRE recorders   (N = recorder width in bytes)
    <uN[u*v*g_prime]    SLE recorders
    <u4 n, <u4[n]       candidate list, insertion order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .sea import CandidateList, SEArray

MAGIC = b"SEAS"
VERSION = 1
_HEADER = struct.Struct("<7IQd")


class SnapshotError(ValueError):
    pass


def dumps(sea: SEArray, csip: CandidateList | None = None) -> bytes:
    csip = csip if csip is not None else CandidateList()
    p = sea.params
    parts = [
        MAGIC,
        bytes([VERSION]),
        _HEADER.pack(sea.u, sea.v, sea.g, sea.g_prime, sea.z, p.k, p.theta, sea.seed, p.rho),
    ]
    le_dt = sea.re.dtype.newbyteorder("<")
    parts.append(sea.si.astype("<u2").tobytes())
    parts.append(sea.re.astype(le_dt).tobytes())
    parts.append(sea.le.astype(le_dt).tobytes())
    hosts = np.fromiter(csip, dtype="<u4", count=len(csip))
    parts.append(struct.pack("<I", hosts.size))
    parts.append(hosts.tobytes())
    return b"".join(parts)


def loads(data: bytes) -> tuple[SEArray, CandidateList]:
    if data[:4] != MAGIC:
        raise SnapshotError("not an SEA snapshot (bad magic)")
    if len(data) < 5 or data[4] != VERSION:
        raise SnapshotError(f"unsupported snapshot version {data[4] if len(data) > 4 else None}")
    off = 5
    try:
        u, v, g, g_prime, z, k, theta, seed, rho = _HEADER.unpack_from(data, off)
    except struct.error as exc:
        raise SnapshotError("truncated snapshot header") from exc
    off += _HEADER.size
    sea = SEArray(u=u, v=v, g=g, g_prime=g_prime, z=z, k=k, theta=theta, rho=rho, seed=seed)
    dt = sea.re.dtype.newbyteorder("<")

    def take(dtype, count):
        nonlocal off
        nbytes = np.dtype(dtype).itemsize * count
        if off + nbytes > len(data):
            raise SnapshotError("truncated snapshot body")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        off += nbytes
        return arr

    sea.si[...] = take("<u2", u * v).reshape(u, v)
    sea.re[...] = take(dt, u * v * g).reshape(u, v, g)
    sea.le[...] = take(dt, u * v * g_prime).reshape(u, v, g_prime)
    (n,) = take("<u4", 1)
    csip = CandidateList(take("<u4", int(n)).tolist())
    if off != len(data):
        raise SnapshotError(f"{len(data) - off} trailing bytes after snapshot")
    return sea, csip


def save(path, sea: SEArray, csip: CandidateList | None = None) -> None:
    Path(path).write_bytes(dumps(sea, csip))


def load(path) -> tuple[SEArray, CandidateList]:
    return loads(Path(path).read_bytes())
