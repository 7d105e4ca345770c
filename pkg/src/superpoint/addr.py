"""Dotted-quad <-> integer helpers for IPv4 addresses."""

from __future__ import annotations

import ipaddress

import numpy as np


def int_to_ip(x: int) -> str:
    x = int(x)
    return f"{x >> 24 & 255}.{x >> 16 & 255}.{x >> 8 & 255}.{x & 255}"


def ip_to_int(s: str) -> int:
    parts = s.split(".")
    if len(parts) != 4:
        raise ValueError(f"not a dotted-quad address: {s!r}")
    out = 0
    for p in parts:
        if not p.isdigit() or len(p) > 3 or int(p) > 255:
            raise ValueError(f"not a dotted-quad address: {s!r}")
        out = out << 8 | int(p)
    return out


def parse_cidr(cidr: str) -> tuple[int, int]:
    """``(first address, number of addresses)`` of an IPv4 prefix."""
    net = ipaddress.IPv4Network(cidr, strict=False)
    return int(net.network_address), net.num_addresses


def in_network(addrs: np.ndarray, cidr: str) -> np.ndarray:
    base, size = parse_cidr(cidr)
    a = np.asarray(addrs, dtype=np.uint64)
    return (a >= np.uint64(base)) & (a < np.uint64(base + size))
