"""Slice-by-slice drivers tying traces, the SEA and the exact oracle together."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
import time
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .addr import ip_to_int
from .config import RunConfig
from .oracle import EmptyTruthError, ExactDrMap, relative_error, score
from .sea import CandidateList, SEArray, WindowReport
from .trace import Pairs, Trace, WindowConfig, normalize_direction, slice_partition

log = logging.getLogger(__name__)


def build_sea(cfg: RunConfig) -> SEArray:
    return SEArray(
        u=cfg.u, v=cfg.v, g=cfg.g, g_prime=cfg.g_prime, z=cfg.z, k=cfg.k,
        theta=cfg.theta, rho=cfg.rho, seed=cfg.seed,
    )


class Detector:
    """Feeds one slice at a time and yields the report of the window it closes."""

    def __init__(self, cfg: RunConfig, sea: SEArray | None = None):
        self.cfg = cfg
        self.sea = sea if sea is not None else build_sea(cfg)
        self.csip = CandidateList()
        self.slice_id = 0
        self._c_u = 0.0

    def scan(self, aips, bips) -> float:
        """Scan (part of) the current slice; returns the elapsed time."""
        start = time.perf_counter()
        self.sea.scan_batch(self.csip, aips, bips, workers=self.cfg.workers)
        elapsed = time.perf_counter() - start
        self._c_u += elapsed
        return elapsed

    def close(self) -> WindowReport | None:
        """End the current slice: report its window if complete, then slide."""
        report = None
        if self.slice_id >= self.cfg.k - 1:
            report = self.sea.report_window(self.csip, t=self.slice_id - self.cfg.k + 1, c_u=self._c_u)
        self.csip = self.sea.slide(self.csip)
        self.slice_id += 1
        self._c_u = 0.0
        return report

    def process_slice(self, aips, bips) -> WindowReport | None:
        self.scan(aips, bips)
        return self.close()


def as_pairs(trace: Trace | Pairs, cfg: RunConfig) -> Pairs:
    if isinstance(trace, Pairs):
        return trace
    pairs = normalize_direction(trace, cfg.a_network)
    if pairs.dropped:
        log.warning("dropped %d records with both or neither address in %s",
                    pairs.dropped, cfg.a_network)
    return pairs


def window_config(cfg: RunConfig) -> WindowConfig:
    return WindowConfig(slice_seconds=cfg.slice_seconds, k=cfg.k, z=cfg.z)


def detect(trace: Trace | Pairs, cfg: RunConfig, detector: Detector | None = None) -> Iterator[WindowReport]:
    det = detector or Detector(cfg)
    for _, sl in slice_partition(as_pairs(trace, cfg), window_config(cfg), cfg.t0):
        report = det.process_slice(sl.aip, sl.bip)
        if report is not None:
            yield report


def exact_windows(trace: Trace | Pairs, cfg: RunConfig) -> Iterator[tuple[int, dict[int, int]]]:
    """``(t, {aip: exact cardinality})`` for every window the detector reports."""
    store = ExactDrMap(z=cfg.z)
    for s, sl in slice_partition(as_pairs(trace, cfg), window_config(cfg), cfg.t0):
        store.observe_many(sl.aip, sl.bip)
        if s >= cfg.k - 1:
            t = s - cfg.k + 1
            yield t, store.cardinalities(t, cfg.k)
        store.advance()


# ---- evaluation --------------------------------------------------------------

class UnmatchedWindowError(ValueError):
    pass


@dataclass
class WindowScore:
    t: int
    n: int
    n_detected: int
    n_plus: int
    n_minus: int
    fpr: float
    fnr: float
    tfr: float
    median_rel_error: float

    @property
    def defined(self) -> bool:
        return self.n > 0


def read_reports(lines: Iterable[str]) -> dict[int, WindowReport]:
    out = {}
    for i, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rep = WindowReport.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"report line {i}: {exc}") from None
        out[rep.t] = rep
    return out


def read_truth(lines: Iterable[str]) -> dict[int, dict[int, int]]:
    out: dict[int, dict[int, int]] = {}
    for i, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"truth line {i}: expected window_t,aip,exact_cardinality")
        try:
            t, aip, c = int(parts[0]), ip_to_int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ValueError(f"truth line {i}: {exc}") from None
        out.setdefault(t, {})[aip] = c
    return out


def score_window(report: WindowReport, cards: dict[int, int], theta: int) -> WindowScore:
    truth = {a for a, c in cards.items() if c >= theta}
    detected = report.detected()
    est = report.estimates()
    errs = [relative_error(est.get(a), cards[a]) for a in truth]
    med = statistics.median(errs) if errs else math.nan
    try:
        m = score(detected, truth)
    except EmptyTruthError:
        return WindowScore(report.t, 0, len(detected), len(detected), 0,
                           math.nan, math.nan, math.nan, med)
    return WindowScore(report.t, m.n, m.n_detected, m.n_plus, m.n_minus,
                       m.fpr, m.fnr, m.tfr, med)


def evaluate(reports: dict[int, WindowReport], truth: dict[int, dict[int, int]],
             theta: int) -> list[WindowScore]:
    missing = sorted(set(truth) - set(reports))
    if missing:
        raise UnmatchedWindowError(f"unmatched window(s) in report: {missing[:10]}")
    return [score_window(reports[t], truth.get(t, {}), theta) for t in sorted(reports)]


def summarize(scores: list[WindowScore]) -> dict[str, float]:
    defined = [s for s in scores if s.defined]
    if not defined:
        return {"windows": len(scores), "defined": 0}
    errs = [s.median_rel_error for s in defined if not math.isnan(s.median_rel_error)]
    return {
        "windows": len(scores),
        "defined": len(defined),
        "fpr": float(np.mean([s.fpr for s in defined])),
        "fnr": float(np.mean([s.fnr for s in defined])),
        "tfr": float(np.mean([s.tfr for s in defined])),
        "median_rel_error": float(np.median(errs)) if errs else math.nan,
    }


SCORE_FIELDS = ["window_t", "n", "n_detected", "n_plus", "n_minus", "fpr", "fnr", "tfr",
                "median_rel_error"]


def scores_csv(scores: list[WindowScore]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_FIELDS)
    for s in scores:
        w.writerow([s.t, s.n, s.n_detected, s.n_plus, s.n_minus,
                    f"{s.fpr:.6f}", f"{s.fnr:.6f}", f"{s.tfr:.6f}", f"{s.median_rel_error:.6f}"])
    summ = summarize(scores)
    if summ.get("defined"):
        w.writerow(["mean", "", "", "", "", f"{summ['fpr']:.6f}", f"{summ['fnr']:.6f}",
                    f"{summ['tfr']:.6f}", f"{summ['median_rel_error']:.6f}"])
    return buf.getvalue()


def scores_table(scores: list[WindowScore]) -> str:
    head = f"{'window':>8} {'N':>5} {'N+':>5} {'N-':>5} {'FPR':>8} {'FNR':>8} {'TFR':>8} {'relerr':>8}"
    rows = [head]
    for s in scores:
        rows.append(f"{s.t:>8} {s.n:>5} {s.n_plus:>5} {s.n_minus:>5} "
                    f"{s.fpr:>8.4f} {s.fnr:>8.4f} {s.tfr:>8.4f} {s.median_rel_error:>8.4f}")
    summ = summarize(scores)
    if summ.get("defined"):
        rows.append(f"{'mean':>8} {'':>5} {'':>5} {'':>5} {summ['fpr']:>8.4f} "
                    f"{summ['fnr']:>8.4f} {summ['tfr']:>8.4f} {summ['median_rel_error']:>8.4f}")
    return "\n".join(rows)
