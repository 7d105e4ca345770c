"""Exact detection probability of the sampled rough estimator.

Balls-in-boxes model: a host with ``n`` distinct opposite hosts contributes a
Binomial(n, 2**-tau) number ``alpha`` of sampled hosts, each landing in one of
``g`` recorders uniformly.  ``pr_weight_at_least`` is the chance that at least
``w`` recorders end up occupied.
"""

from __future__ import annotations

import math
from functools import lru_cache

TABLE_ALPHA_MAX = 512
TAIL_EPS = 1e-12


@lru_cache(maxsize=None)
def fn_surjections(alpha: int, g: int) -> int:
    """Ways to throw ``alpha`` labelled balls into ``g`` labelled boxes, none empty.

    ``FN(alpha, g) = g**alpha - sum_{i=1}^{g-1} C(g, i) FN(alpha, i)``.
    """
    if alpha < 0 or g < 0:
        raise ValueError("alpha and g must be non-negative")
    if g == 0:
        return 1 if alpha == 0 else 0
    if alpha == 0:
        return 0
    if g == 1:
        return 1
    if alpha < g:
        return 0
    total = g**alpha
    for i in range(1, g):
        total -= math.comb(g, i) * fn_surjections(alpha, i)
    return total


def fn_nonempty(alpha: int, g: int, g1: int) -> int:
    """Ways to throw ``alpha`` balls into ``g`` boxes occupying exactly ``g1`` of them."""
    if not 0 <= g1 <= g:
        raise ValueError(f"g1={g1} outside [0, {g}]")
    return math.comb(g, g1) * fn_surjections(alpha, g1)


def _pr_occupied_series(alpha: int, g: int, g1: int) -> float:
    # inclusion-exclusion in floats; only used past the exact table where
    # the leading term dominates
    total = 0.0
    for j in range(g1 + 1):
        base = (g1 - j) / g
        if base == 0.0:
            term = 1.0 if alpha == 0 else 0.0
        else:
            term = math.exp(alpha * math.log(base))
        total += (-1) ** j * math.comb(g1, j) * term
    return max(0.0, min(1.0, math.comb(g, g1) * total))


def pr_occupied(alpha: int, g: int, g1: int) -> float:
    """Probability that ``alpha`` uniform throws occupy exactly ``g1`` of ``g`` boxes."""
    if not 0 <= g1 <= g:
        raise ValueError(f"g1={g1} outside [0, {g}]")
    if alpha <= TABLE_ALPHA_MAX:
        # int / int is correctly rounded even for huge operands
        return fn_nonempty(alpha, g, g1) / g**alpha
    return _pr_occupied_series(alpha, g, g1)


def _log_binom_pmf(n: int, a: int, p: float) -> float:
    if p == 1.0:
        return 0.0 if a == n else -math.inf
    if p == 0.0:
        return 0.0 if a == 0 else -math.inf
    return (
        math.lgamma(n + 1) - math.lgamma(a + 1) - math.lgamma(n - a + 1)
        + a * math.log(p) + (n - a) * math.log1p(-p)
    )


def pr_sampled_count(n: int, tau: int, alpha: int) -> float:
    """``P[alpha of n hosts pass the LSB sampling test]``; p = 2**-tau."""
    if not 0 <= alpha <= n:
        return 0.0
    return math.exp(_log_binom_pmf(n, alpha, 2.0**-tau))


def _alpha_range(n: int, tau: int):
    """Alphas carrying all but ~TAIL_EPS of the binomial mass, with their pmf."""
    p = 2.0**-tau
    mode = min(n, int((n + 1) * p))
    out = []
    # walk outward from the mode until each tail is negligible
    a = mode
    while a >= 0:
        pm = pr_sampled_count(n, tau, a)
        out.append((a, pm))
        if pm < TAIL_EPS * 1e-3 and a < mode:
            break
        a -= 1
    a = mode + 1
    while a <= n:
        pm = pr_sampled_count(n, tau, a)
        out.append((a, pm))
        if pm < TAIL_EPS * 1e-3:
            break
        a += 1
    return out


def pr_weight(n: int, g: int, tau: int, g1: int) -> float:
    """Probability that exactly ``g1`` rough-estimator recorders are active."""
    if not 0 <= g1 <= g:
        return 0.0
    return sum(pm * pr_occupied(a, g, g1) for a, pm in _alpha_range(n, tau) if a >= g1 or g1 == 0)


def pr_weight_at_least(n: int, g: int, tau: int, w: int) -> float:
    """Probability that at least ``w`` recorders are active (the detection probability)."""
    if w <= 0:
        return 1.0
    if w > g:
        return 0.0
    total = 0.0
    for a, pm in _alpha_range(n, tau):
        if a < w:
            continue
        total += pm * sum(pr_occupied(a, g, g1) for g1 in range(w, min(g, a) + 1))
    return min(1.0, total)


def calibration_table(ns, g: int, tau: int, w: int) -> list[tuple[int, float]]:
    return [(n, pr_weight_at_least(n, g, tau, w)) for n in ns]
