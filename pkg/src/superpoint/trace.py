"""IP-pair traces: file formats, direction normalisation, slicing, synthetic generation.

Formats
-------
CSV
    header-less ``epoch_seconds,src_dotted_quad,dst_dotted_quad`` lines, LF endings.
Binary
    ``b"SRLT"``, one version byte, then 12-byte little-endian records
    ``(u32 ts, u32 src, u32 dst)``.

Timestamps must be non-decreasing in both.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .addr import in_network, int_to_ip, ip_to_int, parse_cidr
from .recorders import check_window

MAGIC = b"SRLT"
VERSION = 1
_RECORD = np.dtype([("ts", "<u4"), ("src", "<u4"), ("dst", "<u4")])


class TraceFormatError(ValueError):
    """Unparseable or out-of-order trace input, with its position."""

    def __init__(self, path, position: str, msg: str):
        super().__init__(f"{path}:{position}: {msg}")
        self.path = path
        self.position = position


class TraceRecord(NamedTuple):
    timestamp: int
    src: int
    dst: int


@dataclass
class Trace:
    ts: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    def __post_init__(self) -> None:
        self.ts = np.asarray(self.ts, dtype=np.uint32)
        self.src = np.asarray(self.src, dtype=np.uint32)
        self.dst = np.asarray(self.dst, dtype=np.uint32)
        if not (self.ts.shape == self.src.shape == self.dst.shape):
            raise ValueError("ts, src and dst must have equal length")

    def __len__(self) -> int:
        return self.ts.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.ts, other.ts)
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
        )

    def records(self) -> Iterator[TraceRecord]:
        for t, s, d in zip(self.ts.tolist(), self.src.tolist(), self.dst.tolist()):
            yield TraceRecord(t, s, d)

    @classmethod
    def from_records(cls, records) -> "Trace":
        recs = list(records)
        if not recs:
            return cls.empty()
        ts, src, dst = zip(*recs)
        return cls(np.array(ts), np.array(src), np.array(dst))

    @classmethod
    def empty(cls) -> "Trace":
        z = np.empty(0, dtype=np.uint32)
        return cls(z, z.copy(), z.copy())


# ---- file formats -----------------------------------------------------------

def detect_format(path) -> str:
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return "binary"
    return "csv"


def _parse_csv_line(path, lineno: int, line: str) -> TraceRecord:
    fields = line.split(",")
    if len(fields) != 3:
        raise TraceFormatError(path, f"line {lineno}", f"expected 3 fields, got {len(fields)}")
    try:
        ts = int(fields[0])
        src = ip_to_int(fields[1].strip())
        dst = ip_to_int(fields[2].strip())
    except ValueError as exc:
        raise TraceFormatError(path, f"line {lineno}", str(exc)) from None
    if not 0 <= ts < 2**32:
        raise TraceFormatError(path, f"line {lineno}", f"timestamp {ts} out of u32 range")
    return TraceRecord(ts, src, dst)


def iter_records(path, fmt: str | None = None) -> Iterator[TraceRecord]:
    """Stream records from ``path``, validating order as it goes."""
    fmt = fmt or detect_format(path)
    if fmt == "binary":
        yield from read_trace(path, "binary").records()
        return
    if fmt != "csv":
        raise ValueError(f"unknown trace format {fmt!r}")
    last = -1
    with open(path, "r", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            rec = _parse_csv_line(path, lineno, line)
            if rec.timestamp < last:
                raise TraceFormatError(
                    path, f"line {lineno}", f"timestamp regression {rec.timestamp} < {last}"
                )
            last = rec.timestamp
            yield rec


def read_trace(path, fmt: str | None = None) -> Trace:
    fmt = fmt or detect_format(path)
    if fmt == "csv":
        return Trace.from_records(iter_records(path, "csv"))
    if fmt != "binary":
        raise ValueError(f"unknown trace format {fmt!r}")
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise TraceFormatError(path, "byte 0", "missing SRLT magic")
    if len(data) < 5 or data[4] != VERSION:
        raise TraceFormatError(path, "byte 4", "unsupported binary trace version")
    body = len(data) - 5
    if body % _RECORD.itemsize:
        raise TraceFormatError(
            path, f"record {body // _RECORD.itemsize}", "truncated 12-byte record"
        )
    recs = np.frombuffer(data, dtype=_RECORD, offset=5)
    ts = recs["ts"].astype(np.uint32)
    back = np.flatnonzero(np.diff(ts.astype(np.int64)) < 0)
    if back.size:
        i = int(back[0]) + 1
        raise TraceFormatError(path, f"record {i}", f"timestamp regression {ts[i]} < {ts[i - 1]}")
    return Trace(ts, recs["src"].astype(np.uint32), recs["dst"].astype(np.uint32))


def write_trace(path, trace: Trace, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "binary"
    if fmt == "binary":
        recs = np.empty(len(trace), dtype=_RECORD)
        recs["ts"], recs["src"], recs["dst"] = trace.ts, trace.src, trace.dst
        path.write_bytes(MAGIC + bytes([VERSION]) + recs.tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="\n") as fh:
            for r in trace.records():
                fh.write(f"{r.timestamp},{int_to_ip(r.src)},{int_to_ip(r.dst)}\n")
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


# ---- windows and slices -----------------------------------------------------

@dataclass(frozen=True)
class WindowConfig:
    slice_seconds: int = 1
    k: int = 1
    z: int = 1

    def __post_init__(self) -> None:
        if self.slice_seconds < 1:
            raise ValueError("slice_seconds must be >= 1")
        check_window(self.k, self.z)


@dataclass
class Pairs:
    """Direction-normalised pairs: ``aip`` inside the monitored network."""

    ts: np.ndarray
    aip: np.ndarray
    bip: np.ndarray
    flipped: int = 0
    dropped: int = 0

    def __len__(self) -> int:
        return self.ts.size


def normalize_direction(trace: Trace, a_network: str) -> Pairs:
    """Orient every record as (A-side, B-side); drop records with both or neither in A."""
    src_in = in_network(trace.src, a_network)
    dst_in = in_network(trace.dst, a_network)
    keep = src_in ^ dst_in
    flip = ~src_in & dst_in
    aip = np.where(flip, trace.dst, trace.src)[keep]
    bip = np.where(flip, trace.src, trace.dst)[keep]
    return Pairs(
        ts=trace.ts[keep],
        aip=aip.astype(np.uint32),
        bip=bip.astype(np.uint32),
        flipped=int(np.count_nonzero(flip)),
        dropped=int(np.count_nonzero(~keep)),
    )


def default_t0(ts: np.ndarray, slice_seconds: int) -> int:
    """Slices are aligned to multiples of ``slice_seconds`` since the epoch."""
    return int(ts[0]) // slice_seconds * slice_seconds


def slice_bounds(ts: np.ndarray, slice_seconds: int, t0: int | None = None):
    """Yield ``(slice_id, start, stop)`` index ranges, including empty slices."""
    ts = np.asarray(ts)
    if ts.size == 0:
        return
    if t0 is None:
        t0 = default_t0(ts, slice_seconds)
    if int(ts[0]) < t0:
        raise ValueError(f"record at {int(ts[0])} precedes t0={t0}")
    ids = (ts.astype(np.int64) - t0) // slice_seconds
    last = int(ids[-1])
    edges = np.searchsorted(ids, np.arange(last + 2), side="left")
    for s in range(last + 1):
        yield s, int(edges[s]), int(edges[s + 1])


def slice_partition(pairs, config: WindowConfig, t0: int | None = None):
    """Yield ``(slice_id, view)`` for :class:`Pairs` or :class:`Trace` input."""
    for s, lo, hi in slice_bounds(pairs.ts, config.slice_seconds, t0):
        if isinstance(pairs, Pairs):
            yield s, Pairs(pairs.ts[lo:hi], pairs.aip[lo:hi], pairs.bip[lo:hi])
        else:
            yield s, Trace(pairs.ts[lo:hi], pairs.src[lo:hi], pairs.dst[lo:hi])


# ---- synthetic generator ----------------------------------------------------

class PlantSpecError(ValueError):
    pass


@dataclass
class PlantedHost:
    """A host contacting ``cardinality`` distinct B hosts while active.

    Destination ``j`` is contacted in the active slices ``s`` with
    ``(s - start) % period == j % period``, so any ``period`` consecutive
    active slices cover all of them exactly once.
    """

    cardinality: int
    start: int = 0
    stop: int | None = None
    period: int = 1
    address: str | None = None


@dataclass
class PlantSpec:
    planted: list[PlantedHost] = field(default_factory=list)
    n_slices: int = 1
    slice_seconds: int = 300
    start_time: int = 1508562000
    n_a_hosts: int = 100_000
    n_b_hosts: int = 1 << 20
    pairs_per_slice: int = 1_000_000
    skew: float = 1.0
    pool_shape: float = 1.2
    pool_min: int = 2
    pool_cap: int = 512
    a_network: str = "10.0.0.0/8"
    flip_fraction: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.n_slices < 1 or self.slice_seconds < 1:
            raise PlantSpecError("n_slices and slice_seconds must be >= 1")
        if self.n_a_hosts < 0 or self.n_b_hosts < 1 or self.pairs_per_slice < 0:
            raise PlantSpecError("host and pair counts must be non-negative")
        if self.n_a_hosts == 0 and self.pairs_per_slice > 0:
            raise PlantSpecError("background pairs need at least one A host")
        if not 1 <= self.pool_min <= self.pool_cap:
            raise PlantSpecError("need 1 <= pool_min <= pool_cap")
        if self.pool_cap > self.n_b_hosts:
            raise PlantSpecError("pool_cap exceeds the B-host pool")
        if self.start_time + self.n_slices * self.slice_seconds >= 2**32:
            raise PlantSpecError("trace would overflow u32 timestamps")
        for i, p in enumerate(self.planted):
            if p.cardinality < 1:
                raise PlantSpecError(f"planted[{i}]: cardinality must be >= 1")
            if p.cardinality > self.n_b_hosts:
                raise PlantSpecError(
                    f"planted[{i}]: cardinality {p.cardinality} exceeds B-host pool {self.n_b_hosts}"
                )
            stop = self.n_slices if p.stop is None else p.stop
            if not 0 <= p.start < stop <= self.n_slices or p.period < 1:
                raise PlantSpecError(f"planted[{i}]: bad active pattern")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "PlantSpec":
        d = dict(d)
        planted = [PlantedHost(**p) for p in d.pop("planted", [])]
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise PlantSpecError(f"unknown plant spec keys: {sorted(unknown)}")
        return cls(planted=planted, **d)


def load_plant_spec(path) -> PlantSpec:
    return PlantSpec.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Layout:
    """Concrete addresses and per-host parameters drawn from a spec's seed."""

    a_hosts: np.ndarray
    pools: np.ndarray
    offsets: np.ndarray
    b_hosts: np.ndarray
    planted: np.ndarray
    planted_offsets: np.ndarray


def _distinct(rng, lo: int, hi: int, n: int, exclude=None) -> np.ndarray:
    """``n`` distinct integers from [lo, hi) in random order, avoiding ``exclude``."""
    if n > hi - lo - (0 if exclude is None else len(exclude)):
        raise PlantSpecError("address range too small for requested hosts")
    out = np.empty(0, dtype=np.int64)
    banned = np.asarray([] if exclude is None else list(exclude), dtype=np.int64)
    while out.size < n:
        draw = rng.integers(lo, hi, size=max(16, 2 * (n - out.size)), dtype=np.int64)
        cand = np.concatenate([out, draw])
        _, first = np.unique(cand, return_index=True)
        cand = cand[np.sort(first)]
        if banned.size:
            cand = cand[~np.isin(cand, banned)]
        out = cand[:n]
    return out


def build_layout(spec: PlantSpec) -> Layout:
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0])
    base, size = parse_cidr(spec.a_network)
    fixed = [ip_to_int(p.address) for p in spec.planted if p.address is not None]
    for a in fixed:
        if not base <= a < base + size:
            raise PlantSpecError(f"planted address {int_to_ip(a)} outside {spec.a_network}")
    n_auto = sum(p.address is None for p in spec.planted)
    # skip network and broadcast addresses when the prefix has them
    lo, hi = (base + 1, base + size - 1) if size > 2 else (base, base + size)
    a_all = _distinct(rng, lo, hi, spec.n_a_hosts + n_auto, exclude=fixed)
    a_hosts, auto = a_all[: spec.n_a_hosts], iter(a_all[spec.n_a_hosts:].tolist())
    planted = np.array(
        [ip_to_int(p.address) if p.address is not None else next(auto) for p in spec.planted],
        dtype=np.int64,
    )
    # B side: anything outside A, excluding 0.0.0.0
    b_raw = _distinct(rng, 1, 2**32 - size, spec.n_b_hosts)
    b_hosts = np.where(b_raw >= base, b_raw + size, b_raw)
    u = rng.random(spec.n_a_hosts)
    pools = np.ceil(spec.pool_min * (1.0 - u) ** (-1.0 / spec.pool_shape))
    pools = np.minimum(pools, spec.pool_cap).astype(np.int64)
    offsets = rng.integers(0, spec.n_b_hosts, size=spec.n_a_hosts)
    planted_offsets = rng.integers(0, spec.n_b_hosts, size=len(spec.planted))
    return Layout(
        a_hosts.astype(np.uint32), pools, offsets,
        b_hosts.astype(np.uint32), planted.astype(np.uint32), planted_offsets,
    )


def _power_law_index(rng, pools: np.ndarray, skew: float) -> np.ndarray:
    """Index in [0, pool) with P(j) roughly proportional to (j + 1) ** -skew."""
    u = rng.random(pools.size)
    top = pools.astype(np.float64) + 1.0
    if skew == 0.0:
        x = 1.0 + u * (top - 1.0)
    elif skew == 1.0:
        x = np.exp(u * np.log(top))
    else:
        e = 1.0 - skew
        x = (1.0 + u * (top**e - 1.0)) ** (1.0 / e)
    j = np.floor(x).astype(np.int64) - 1
    return np.clip(j, 0, pools - 1)


def _planted_slice(p: PlantedHost, s: int, n_slices: int) -> np.ndarray:
    stop = n_slices if p.stop is None else p.stop
    if not p.start <= s < stop:
        return np.empty(0, dtype=np.int64)
    r = (s - p.start) % p.period
    return np.arange(r, p.cardinality, p.period, dtype=np.int64)


def generate(spec: PlantSpec, layout: Layout | None = None) -> Trace:
    """Deterministic synthetic trace for ``spec``."""
    layout = layout or build_layout(spec)
    nb = spec.n_b_hosts
    weights = layout.pools / layout.pools.sum() if spec.n_a_hosts else None
    ts_parts, a_parts, b_parts = [], [], []
    for s in range(spec.n_slices):
        rng = np.random.default_rng([spec.seed, 1, s])
        if spec.pairs_per_slice and spec.n_a_hosts:
            host = rng.choice(spec.n_a_hosts, size=spec.pairs_per_slice, p=weights)
            j = _power_law_index(rng, layout.pools[host], spec.skew)
            aip = [layout.a_hosts[host]]
            bidx = [(layout.offsets[host] + j) % nb]
        else:
            aip, bidx = [], []
        for h, p in enumerate(spec.planted):
            j = _planted_slice(p, s, spec.n_slices)
            if j.size:
                aip.append(np.full(j.size, layout.planted[h], dtype=np.uint32))
                bidx.append((layout.planted_offsets[h] + j) % nb)
        if not aip:
            continue
        aip = np.concatenate(aip).astype(np.uint32)
        bip = layout.b_hosts[np.concatenate(bidx)]
        n = aip.size
        perm = rng.permutation(n)
        aip, bip = aip[perm], bip[perm]
        ts = spec.start_time + s * spec.slice_seconds + rng.integers(0, spec.slice_seconds, size=n)
        order = np.argsort(ts, kind="stable")
        ts, aip, bip = ts[order], aip[order], bip[order]
        flip = rng.random(n) < spec.flip_fraction
        src = np.where(flip, bip, aip)
        dst = np.where(flip, aip, bip)
        ts_parts.append(ts.astype(np.uint32))
        a_parts.append(src.astype(np.uint32))
        b_parts.append(dst.astype(np.uint32))
    if not ts_parts:
        return Trace.empty()
    return Trace(np.concatenate(ts_parts), np.concatenate(a_parts), np.concatenate(b_parts))


def expected_cardinality(p: PlantedHost, t: int, k: int, n_slices: int) -> int:
    """Exact distinct-destination count of a planted host in window ``W(t, k)``."""
    stop = n_slices if p.stop is None else p.stop
    lo, hi = max(t, p.start), min(t + k, stop)
    residues = {(s - p.start) % p.period for s in range(lo, hi)}
    return sum(len(range(r, p.cardinality, p.period)) for r in residues)


def log_uniform_plants(
    rng, n: int, lo: int, hi: int, period: int = 1, n_slices: int | None = None,
    moving_fraction: float = 0.0, min_active: int | None = None,
) -> list[PlantedHost]:
    """Planted hosts with log-uniform cardinalities in [lo, hi].

    A ``moving_fraction`` of them start and/or stop inside the trace so
    windows see them appear and disappear.
    """
    cards = np.floor(np.exp(rng.uniform(math.log(lo), math.log(hi + 1), size=n))).astype(int)
    cards = np.clip(cards, lo, hi)
    out = []
    for c in cards.tolist():
        start, stop = 0, None
        if n_slices is not None and rng.random() < moving_fraction:
            span = min(n_slices, min_active or max(1, n_slices // 2))
            start = int(rng.integers(0, max(1, n_slices - span)))
            stop = int(min(n_slices, start + span + rng.integers(0, n_slices - start - span + 1)))
        out.append(PlantedHost(cardinality=c, start=start, stop=stop, period=period))
    return out
