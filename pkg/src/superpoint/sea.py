"""The u x v sliding estimator array and the per-slice detection procedure.

Each cell of the grid holds a 16-bit super-point indicator (SI), a sliding rough
estimator (``g`` recorders) and a sliding linear estimator (``g'`` recorders).
A host ``aip`` maps to one column per row; detection and estimation work on the
row-wise union of those cells (recorder max, SI bitwise AND).

Two-phase contract: ``scan_*`` only ever sets recorders to 0 and SI bits to 1,
so scan workers may overlap freely.  ``slide`` and ``report_window`` need
exclusive access.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .addr import int_to_ip, ip_to_int
from .estimators import (
    DEFAULT_RHO,
    SATURATED,
    DetectionParams,
    is_saturated,
    sle_estimate,
)
from .recorders import (
    SI_BITS,
    HashSuite,
    check_window,
    dtype_for,
    sentinel,
    slide_inplace,
)

REPORT_SCHEMA = "superpoint.window-report/1"

# hosts per gather block when estimating many candidates at once
_GATHER_BLOCK = 512


def corrected_le_estimate(weight: int, g_prime: int, up: float):
    """Union linear-counting estimate with expected cross-host fill removed.

    ``up`` is the probability that a recorder of the union was set by some
    other host.  Falls back to the plain estimate when ``up`` is ~1 and clamps
    to 0 when the observed weight is below the expected contamination.
    """
    if up >= 1.0 - 1e-12:
        return sle_estimate(weight, g_prime)
    excess = weight - g_prime * up
    if excess <= 0:
        return 0.0
    arg = 1.0 - excess / (g_prime * (1.0 - up))
    if arg <= 0.0:
        return SATURATED
    return -g_prime * float(np.log(arg))


class CandidateList:
    """Insertion-ordered set of candidate super points."""

    def __init__(self, hosts: Iterable[int] = ()):
        self._hosts: dict[int, None] = {}
        for h in hosts:
            self.add(h)

    def add(self, host: int) -> bool:
        host = int(host)
        if host in self._hosts:
            return False
        self._hosts[host] = None
        return True

    def __contains__(self, host) -> bool:
        return int(host) in self._hosts

    def __iter__(self) -> Iterator[int]:
        return iter(self._hosts)

    def __len__(self) -> int:
        return len(self._hosts)

    def __eq__(self, other) -> bool:
        if isinstance(other, CandidateList):
            return list(self) == list(other)
        return NotImplemented

    def __repr__(self) -> str:
        return f"CandidateList({[int_to_ip(h) for h in self]})"

    def as_set(self) -> set[int]:
        return set(self._hosts)

    def sorted(self) -> list[int]:
        return sorted(self._hosts)


@dataclass
class UnionView:
    usi: int
    ure: np.ndarray
    ule: np.ndarray | None = None


@dataclass
class ReportEntry:
    host: int
    estimate: float | object
    weight: int
    is_super: bool

    def to_dict(self) -> dict:
        sat = is_saturated(self.estimate)
        return {
            "host": int_to_ip(self.host),
            "estimate": None if sat else float(self.estimate),
            "saturated": sat,
            "weight": int(self.weight),
            "super": bool(self.is_super),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportEntry":
        est = SATURATED if d.get("saturated") else float(d["estimate"])
        return cls(ip_to_int(d["host"]), est, int(d["weight"]), bool(d["super"]))


@dataclass
class WindowReport:
    """Per-window output: window ``W(t, k)`` and every candidate's estimate."""

    t: int
    k: int
    entries: list[ReportEntry] = field(default_factory=list)
    c_u: float = 0.0
    c_e: float = 0.0

    def detected(self) -> set[int]:
        return {e.host for e in self.entries if e.is_super}

    def estimates(self) -> dict[int, object]:
        return {e.host: e.estimate for e in self.entries}

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "schema": REPORT_SCHEMA,
            "window": {"t": self.t, "k": self.k},
            "entries": [e.to_dict() for e in self.entries],
        }
        if timings:
            d["c_u"] = self.c_u
            d["c_e"] = self.c_e
        return d

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "WindowReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            t=int(d["window"]["t"]),
            k=int(d["window"]["k"]),
            entries=[ReportEntry.from_dict(e) for e in d["entries"]],
            c_u=float(d.get("c_u", 0.0)),
            c_e=float(d.get("c_e", 0.0)),
        )


class SEArray:
    """Grid of sliding estimators shared by every host of the monitored network."""

    def __init__(
        self,
        u: int = 4,
        v: int = 65536,
        g: int = 8,
        g_prime: int = 1024,
        z: int = 1,
        k: int = 1,
        theta: int = 1024,
        rho: float = DEFAULT_RHO,
        seed: int = 0,
    ):
        if u < 1 or v < 1:
            raise ValueError("u and v must be >= 1")
        if g_prime < 2:
            raise ValueError("g_prime must be >= 2")
        self.u, self.v, self.g, self.g_prime, self.z = u, v, g, g_prime, z
        self.params = DetectionParams(theta=theta, g=g, k=k, z=z, rho=rho)
        self.seed = seed
        self.hashes = HashSuite(seed)
        dt = dtype_for(z)
        self.si = np.zeros((u, v), dtype=np.uint16)
        self.re = np.full((u, v, g), sentinel(z), dtype=dt)
        self.le = np.full((u, v, g_prime), sentinel(z), dtype=dt)
        self._rows = np.arange(u)[:, None]

    @property
    def k(self) -> int:
        return self.params.k

    def _k(self, k: int | None) -> int:
        if k is None:
            return self.params.k
        check_window(k, self.z)
        return k

    def reset(self) -> None:
        self.si.fill(0)
        self.re.fill(sentinel(self.z))
        self.le.fill(sentinel(self.z))

    def same_shape(self, other: "SEArray") -> bool:
        return (self.u, self.v, self.g, self.g_prime, self.z) == (
            other.u, other.v, other.g, other.g_prime, other.z
        )

    def columns(self, aip):
        """Column of ``aip`` in each row: shape (u,) for a scalar, (u, n) for an array."""
        if isinstance(aip, np.ndarray):
            if aip.size == 0:
                return np.empty((self.u, 0), dtype=np.int64)
            return np.stack([self.hashes.row(i).range(aip, self.v) for i in range(self.u)])
        return np.array([self.hashes.row(i).range(int(aip), self.v) for i in range(self.u)])

    def si_bit(self, aip):
        return self.hashes.si_index.range(aip, SI_BITS)

    # ---- scan phase -------------------------------------------------------

    def scan_ip_pair(self, csip: CandidateList, aip: int, bip: int) -> None:
        """Process one IP pair, exactly in stream order."""
        cols = self.columns(aip)
        rows = np.arange(self.u)
        self.le[rows, cols, self.hashes.le_index.range(bip, self.g_prime)] = 0
        if not self.hashes.sampled(bip, self.params.tau):
            return
        self.re[rows, cols, self.hashes.sre_index.range(bip, self.g)] = 0
        self._admit_one(csip, int(aip), cols)

    def _admit_one(self, csip: CandidateList, aip: int, cols: np.ndarray) -> bool:
        rows = np.arange(self.u)
        ure = self.re[rows, cols].max(axis=0)
        if np.count_nonzero(ure < self.params.k) < self.params.threshold:
            return False
        bit = np.uint16(1 << self.si_bit(aip))
        usi = np.bitwise_and.reduce(self.si[rows, cols])
        if usi & bit:
            return False
        csip.add(aip)
        self.si[rows, cols] |= bit
        return True

    def _record(self, aips: np.ndarray, bips: np.ndarray) -> np.ndarray:
        """Recorder writes for a chunk of pairs; returns the sampled-pair mask."""
        cols = self.columns(aips)
        le_idx = self.hashes.le_index.range(bips, self.g_prime)
        for i in range(self.u):
            self.le[i, cols[i], le_idx] = 0
        mask = self.hashes.sampled(bips, self.params.tau)
        if mask.any():
            re_idx = self.hashes.sre_index.range(bips[mask], self.g)
            for i in range(self.u):
                self.re[i, cols[i][mask], re_idx] = 0
        return mask

    def scan_batch(
        self,
        csip: CandidateList,
        aips: np.ndarray,
        bips: np.ndarray,
        workers: int = 1,
    ) -> None:
        """Process a whole slice (or part of one) of IP pairs.

        Recorder writes are split across ``workers`` threads.  Candidate
        admission runs after the barrier in ascending address order, so the
        result does not depend on pair order or worker count.
        """
        aips = np.asarray(aips, dtype=np.uint32)
        bips = np.asarray(bips, dtype=np.uint32)
        if aips.shape != bips.shape:
            raise ValueError("aips and bips must have the same length")
        n = aips.size
        if n == 0:
            return
        if workers <= 1 or n < 2 * workers:
            mask = self._record(aips, bips)
        else:
            bounds = np.linspace(0, n, workers + 1).astype(np.int64)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(
                    pool.map(
                        lambda ab: self._record(aips[ab[0]:ab[1]], bips[ab[0]:ab[1]]),
                        zip(bounds[:-1], bounds[1:]),
                    )
                )
            mask = np.concatenate(parts)
        touched = np.unique(aips[mask])
        self.admit(csip, touched)

    def admit(self, csip: CandidateList, hosts: np.ndarray) -> list[int]:
        """Candidate check for hosts that received a sampled pair, lowest address first."""
        hosts = np.unique(np.asarray(hosts, dtype=np.uint32))
        if hosts.size == 0:
            return []
        w = self.union_sre_weights(hosts)
        qualified = hosts[w >= self.params.threshold]
        added = []
        if qualified.size == 0:
            return added
        cols = self.columns(qualified)
        bits = self.si_bit(qualified)
        rows = np.arange(self.u)
        for j, host in enumerate(qualified.tolist()):
            c = cols[:, j]
            bit = np.uint16(1 << int(bits[j]))
            if np.bitwise_and.reduce(self.si[rows, c]) & bit:
                continue
            csip.add(host)
            self.si[rows, c] |= bit
            added.append(host)
        return added

    # ---- union views and weights -----------------------------------------

    def union_view(self, aip: int, include_ule: bool = False) -> UnionView:
        cols = self.columns(int(aip))
        rows = np.arange(self.u)
        usi = int(np.bitwise_and.reduce(self.si[rows, cols]))
        ure = self.re[rows, cols].max(axis=0)
        ule = self.le[rows, cols].max(axis=0) if include_ule else None
        return UnionView(usi, ure, ule)

    def union_sre_weights(self, hosts: np.ndarray, k: int | None = None) -> np.ndarray:
        k = self._k(k)
        hosts = np.asarray(hosts, dtype=np.uint32)
        cols = self.columns(hosts)
        ure = self.re[self._rows, cols].max(axis=0)
        return np.count_nonzero(ure < k, axis=-1)

    def union_sle_weights(self, hosts: np.ndarray, k: int | None = None) -> np.ndarray:
        k = self._k(k)
        hosts = np.asarray(hosts, dtype=np.uint32)
        out = np.empty(hosts.size, dtype=np.int64)
        for lo in range(0, hosts.size, _GATHER_BLOCK):
            block = hosts[lo:lo + _GATHER_BLOCK]
            cols = self.columns(block)
            ule = self.le[self._rows, cols].max(axis=0)
            out[lo:lo + block.size] = np.count_nonzero(ule < k, axis=-1)
        return out

    def row_fill_fraction(self, i: int, k: int | None = None) -> float:
        if not 0 <= i < self.u:
            raise IndexError(f"row {i} outside [0, {self.u})")
        k = self._k(k)
        return np.count_nonzero(self.le[i] < k) / (self.g_prime * self.v)

    def row_fill_fractions(self, k: int | None = None) -> np.ndarray:
        return np.array([self.row_fill_fraction(i, k) for i in range(self.u)])

    def contamination(self, k: int | None = None) -> float:
        """Probability that a union LE recorder was set by some other host."""
        return float(np.prod(self.row_fill_fractions(k)))

    # ---- estimation --------------------------------------------------------

    def raw_estimate(self, aip: int, k: int | None = None):
        """Plain linear-counting estimate on the union LE, no collision correction."""
        w = int(self.union_sle_weights(np.array([aip]), k)[0])
        return sle_estimate(w, self.g_prime)

    def corrected_estimate(self, aip: int, k: int | None = None, up: float | None = None):
        if up is None:
            up = self.contamination(k)
        w = int(self.union_sle_weights(np.array([aip]), k)[0])
        return corrected_le_estimate(w, self.g_prime, up)

    def estimate_many(self, hosts, k: int | None = None, up: float | None = None):
        """Corrected estimates and raw union weights for many hosts at once."""
        hosts = np.asarray(list(hosts), dtype=np.uint32)
        if up is None:
            up = self.contamination(k)
        weights = self.union_sle_weights(hosts, k)
        ests = [corrected_le_estimate(int(w), self.g_prime, up) for w in weights]
        return ests, weights

    def report_window(
        self, csip: CandidateList, t: int, k: int | None = None, c_u: float = 0.0
    ) -> WindowReport:
        """Estimate every candidate; call at slice end, before :meth:`slide`."""
        k = self._k(k)
        start = time.perf_counter()
        hosts = csip.sorted()
        entries = []
        if hosts:
            ests, weights = self.estimate_many(hosts, k)
            theta = self.params.theta
            for h, e, w in zip(hosts, ests, weights):
                sup = is_saturated(e) or e >= theta
                entries.append(ReportEntry(h, e, int(w), bool(sup)))
        c_e = time.perf_counter() - start
        return WindowReport(t=t, k=k, entries=entries, c_u=c_u, c_e=c_e)

    # ---- maintenance -------------------------------------------------------

    def slide(self, csip: CandidateList) -> CandidateList:
        """Advance one slice and return the candidates still above threshold."""
        self.si.fill(0)
        slide_inplace(self.re, self.z)
        slide_inplace(self.le, self.z)
        ncsip = CandidateList()
        hosts = np.fromiter(csip, dtype=np.uint32, count=len(csip))
        if hosts.size == 0:
            return ncsip
        w = self.union_sre_weights(hosts)
        keep = hosts[w >= self.params.threshold]
        if keep.size:
            cols = self.columns(keep)
            bits = self.si_bit(keep)
            rows = np.arange(self.u)
            for j, host in enumerate(keep.tolist()):
                ncsip.add(host)
                self.si[rows, cols[:, j]] |= np.uint16(1 << int(bits[j]))
        return ncsip

    def state_equal(self, other: "SEArray") -> bool:
        return (
            self.same_shape(other)
            and self.params == other.params
            and self.seed == other.seed
            and np.array_equal(self.si, other.si)
            and np.array_equal(self.re, other.re)
            and np.array_equal(self.le, other.le)
        )
