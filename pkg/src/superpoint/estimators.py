"""Sliding rough estimator (detection) and sliding linear estimator (counting)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .recorders import (
    HashSuite,
    active_count,
    check_window,
    dtype_for,
    sentinel,
    slide_inplace,
)

DEFAULT_RHO = 0.99 * (1.0 - math.exp(-1.0 / 3.0))


class Saturated:
    """Marker for a linear-counting estimate whose estimator has no empty cells."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "SATURATED"

    def __reduce__(self):
        return (Saturated, ())


SATURATED = Saturated()


def is_saturated(x) -> bool:
    return x is SATURATED


def compute_tau(theta: int, g: int) -> int:
    """LSB sampling exponent ``ceil(log2(theta / g))``, floored at 0."""
    if theta < 1 or g < 1:
        raise ValueError("theta and g must be positive")
    if theta <= g:
        return 0
    # exact integer ceil(log2(theta/g)): smallest t with g * 2**t >= theta
    t = 0
    while g << t < theta:
        t += 1
    return t


def weight_threshold(rho: float, g: int) -> int:
    """Smallest integer weight satisfying ``weight >= rho * g``."""
    return max(0, math.ceil(rho * g - 1e-9))


@dataclass(frozen=True)
class DetectionParams:
    theta: int = 1024
    g: int = 8
    k: int = 1
    z: int = 1
    rho: float = DEFAULT_RHO

    def __post_init__(self) -> None:
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        if self.g < 1:
            raise ValueError("g must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        check_window(self.k, self.z)

    @property
    def tau(self) -> int:
        return compute_tau(self.theta, self.g)

    @property
    def threshold(self) -> int:
        return weight_threshold(self.rho, self.g)


def sle_estimate(weight: int, g_prime: int):
    """Linear-counting estimate ``-g' ln((g' - w) / g')``; SATURATED when w == g'."""
    if not 0 <= weight <= g_prime:
        raise ValueError(f"weight {weight} outside [0, {g_prime}]")
    if weight == g_prime:
        return SATURATED
    if weight == 0:
        return 0.0
    return -g_prime * math.log((g_prime - weight) / g_prime)


class _RecorderSketch:
    def __init__(self, size: int, z: int):
        self.z = z
        self.recorders = np.full(size, sentinel(z), dtype=dtype_for(z))

    def weight(self, k: int) -> int:
        check_window(k, self.z)
        return int(active_count(self.recorders, k))

    def slide(self) -> None:
        slide_inplace(self.recorders, self.z)

    def reset(self) -> None:
        self.recorders.fill(sentinel(self.z))


class SlidingRoughEstimator(_RecorderSketch):
    """``g`` recorders fed by an LSB-sampled subset of the opposite hosts."""

    def __init__(self, g: int = 8, z: int = 16):
        if g < 1:
            raise ValueError("g must be >= 1")
        super().__init__(g, z)
        self.g = g

    def offer(self, bip: int, params: DetectionParams, hashes: HashSuite) -> bool:
        if not hashes.sampled(bip, params.tau):
            return False
        self.recorders[hashes.sre_index.range(bip, self.g)] = 0
        return True

    def is_super(self, params: DetectionParams) -> bool:
        return self.weight(params.k) >= params.threshold


class SlidingLinearEstimator(_RecorderSketch):
    """Linear counting with recorders in place of bits.  Every offer is recorded."""

    def __init__(self, g_prime: int = 1024, z: int = 16):
        if g_prime < 2:
            raise ValueError("g_prime must be >= 2")
        super().__init__(g_prime, z)
        self.g_prime = g_prime

    def offer(self, bip: int, hashes: HashSuite) -> None:
        self.recorders[hashes.le_index.range(bip, self.g_prime)] = 0

    def estimate(self, k: int):
        return sle_estimate(self.weight(k), self.g_prime)
