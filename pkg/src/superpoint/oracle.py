"""Exact sliding-window cardinalities and detection accuracy metrics.

Two independent exact backends:

* :class:`ExactDrMap` keeps one distance recorder per distinct (aip, bip)
  pair, in sorted numpy arrays, and counts active recorders per host.
* :class:`SliceSetStore` keeps the raw per-slice ``aip -> {bip}`` sets for the
  last ``capacity`` slices and takes unions.

Both are fed slice by slice: ``observe`` pairs, then ``advance`` at the slice
boundary.  Queries address windows ``W(t, k)`` by their first slice ``t``.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np

from .addr import int_to_ip
from .recorders import check_window, dtype_for, slide_inplace


class WindowError(ValueError):
    """A window that has not been (or is no longer) observable."""


class EmptyTruthError(ValueError):
    """Accuracy ratios are undefined without any true super point."""


def _pair_keys(aips, bips) -> np.ndarray:
    a = np.asarray(aips, dtype=np.uint64)
    b = np.asarray(bips, dtype=np.uint64)
    return (a << np.uint64(32)) | b


class ExactDrMap:
    """One recorder per distinct pair; exact for windows ending at the current slice."""

    def __init__(self, z: int = 16):
        self.z = z
        self.keys = np.empty(0, dtype=np.uint64)
        self.values = np.empty(0, dtype=dtype_for(z))
        self.current = 0
        self._pending: list[np.ndarray] = []

    def __len__(self) -> int:
        self._flush()
        return self.keys.size

    def observe(self, aip: int, bip: int) -> None:
        self._pending.append(_pair_keys([aip], [bip]))

    def observe_many(self, aips, bips) -> None:
        self._pending.append(_pair_keys(aips, bips))

    def _flush(self) -> None:
        if not self._pending:
            return
        new = np.unique(np.concatenate(self._pending))
        self._pending.clear()
        pos = np.searchsorted(self.keys, new)
        hit = pos < self.keys.size
        hit[hit] = self.keys[pos[hit]] == new[hit]
        self.values[pos[hit]] = 0
        fresh = new[~hit]
        if fresh.size:
            keys = np.concatenate([self.keys, fresh])
            values = np.concatenate([self.values, np.zeros(fresh.size, dtype=self.values.dtype)])
            order = np.argsort(keys, kind="stable")
            self.keys, self.values = keys[order], values[order]

    def advance(self) -> None:
        self._flush()
        slide_inplace(self.values, self.z)
        self.current += 1

    def _check(self, t: int, k: int) -> None:
        check_window(k, self.z)
        if t + k - 1 != self.current:
            raise WindowError(
                f"W({t},{k}) does not end at the current slice {self.current}"
            )

    def cardinalities(self, t: int, k: int) -> dict[int, int]:
        self._check(t, k)
        self._flush()
        active = self.values < k
        hosts, counts = np.unique(self.keys[active] >> np.uint64(32), return_counts=True)
        return dict(zip(hosts.tolist(), counts.tolist()))

    def cardinality(self, aip: int, t: int, k: int) -> int:
        self._check(t, k)
        self._flush()
        lo = np.searchsorted(self.keys, np.uint64(aip) << np.uint64(32))
        hi = np.searchsorted(self.keys, (np.uint64(aip) + np.uint64(1)) << np.uint64(32))
        return int(np.count_nonzero(self.values[lo:hi] < k))


class SliceSetStore:
    """Ring of the most recent ``capacity`` slices, each ``aip -> set(bip)``."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.current = 0
        self._ring: deque[dict[int, set[int]]] = deque([defaultdict(set)], maxlen=capacity)

    def observe(self, aip: int, bip: int) -> None:
        self._ring[-1][int(aip)].add(int(bip))

    def observe_many(self, aips, bips) -> None:
        cur = self._ring[-1]
        for a, b in zip(np.asarray(aips).tolist(), np.asarray(bips).tolist()):
            cur[a].add(b)

    def advance(self) -> None:
        self._ring.append(defaultdict(set))
        self.current += 1

    def _slices(self, t: int, k: int):
        if k < 1:
            raise WindowError("k must be >= 1")
        end = t + k - 1
        oldest = self.current - len(self._ring) + 1
        if end > self.current or t < oldest or t < 0:
            raise WindowError(f"W({t},{k}) is not held (slices {oldest}..{self.current})")
        return [self._ring[s - oldest] for s in range(t, end + 1)]

    def cardinalities(self, t: int, k: int) -> dict[int, int]:
        union: dict[int, set[int]] = defaultdict(set)
        for sl in self._slices(t, k):
            for a, bs in sl.items():
                union[a] |= bs
        return {a: len(bs) for a, bs in union.items() if bs}

    def cardinality(self, aip: int, t: int, k: int) -> int:
        seen: set[int] = set()
        for sl in self._slices(t, k):
            seen |= sl.get(int(aip), set())
        return len(seen)


def exact_cardinality(store, aip: int, t: int, k: int) -> int:
    return store.cardinality(aip, t, k)


def exact_super_points(store, t: int, k: int, theta: int) -> set[int]:
    return {a for a, c in store.cardinalities(t, k).items() if c >= theta}


@dataclass(frozen=True)
class AccuracyMetrics:
    n: int
    n_detected: int
    n_plus: int
    n_minus: int

    @property
    def fpr(self) -> float:
        return self.n_plus / self.n

    @property
    def fnr(self) -> float:
        return self.n_minus / self.n

    @property
    def tfr(self) -> float:
        return self.fpr + self.fnr


def score(detected, truth) -> AccuracyMetrics:
    detected, truth = set(detected), set(truth)
    if not truth:
        raise EmptyTruthError("no true super points: FPR/FNR undefined")
    return AccuracyMetrics(
        n=len(truth),
        n_detected=len(detected),
        n_plus=len(detected - truth),
        n_minus=len(truth - detected),
    )


def relative_error(estimate, truth: int) -> float:
    if estimate is None or not isinstance(estimate, (int, float)):
        return math.inf
    return abs(estimate - truth) / truth


def truth_lines(t: int, cards: dict[int, int], min_cardinality: int = 1) -> list[str]:
    """``window_t,aip,exact_cardinality`` lines for one window, address order."""
    return [
        f"{t},{int_to_ip(a)},{c}"
        for a, c in sorted(cards.items())
        if c >= min_cardinality
    ]

