"""Scores for executed orderings: intra-block volatility, post-trade Gini, min-max scores."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from clvr.amm import ExecutionTrace, Pool, Side, log_deviation
from clvr.errors import UndefinedMetricError


@dataclass(frozen=True)
class VolatilityReport:
    volatility: float
    n: int
    status_quo_price: float


@dataclass(frozen=True)
class RelativeScore:
    value_pct: float
    global_min: float
    global_max: float


def log_deviations(trace: ExecutionTrace, quote: str = "y_per_x", reference: Pool | None = None) -> list[float]:
    """Per-step ``ln p0 - ln P`` with the price quoted as ``quote``.

    ``p0`` is the block's opening price unless a ``reference`` pool is given.
    """
    ref = trace.initial_pool if reference is None else reference
    x0, y0 = ref.reserve_x, ref.reserve_y
    if quote == "y_per_x":
        return [log_deviation(x0, y0, s.reserve_x, s.reserve_y) for s in trace.steps]
    if quote == "x_per_y":
        return [log_deviation(y0, x0, s.reserve_y, s.reserve_x) for s in trace.steps]
    raise ValueError(f"unknown quote direction {quote!r}")


def volatility(trace: ExecutionTrace, quote: str = "y_per_x", reference: Pool | None = None) -> VolatilityReport:
    """Mean squared log deviation of every post-step price from the opening price.

    Failed steps count too; they repeat the previous price.
    """
    n = len(trace.steps)
    if n == 0:
        raise UndefinedMetricError("volatility of an empty block is undefined")
    total = 0.0
    for d in log_deviations(trace, quote, reference):
        total += d * d
    p0 = trace.initial_price if reference is None else reference.price
    return VolatilityReport(total / n, n, p0)


def volatility_is_quote_invariant(trace: ExecutionTrace, rel_tol: float = 1e-12) -> bool:
    a = volatility(trace, "y_per_x").volatility
    b = volatility(trace, "x_per_y").volatility
    return math.isclose(a, b, rel_tol=rel_tol, abs_tol=1e-300)


def wealth(trace: ExecutionTrace, status_quo_price: float | None = None) -> list[float]:
    """Per-trade received amounts in Y units; X received by buys is valued at ``status_quo_price``."""
    p0 = trace.initial_price if status_quo_price is None else status_quo_price
    return [s.amount_out * p0 if s.side is Side.BUY else s.amount_out for s in trace.steps]


def gini_of(values: Iterable[float]) -> float:
    w = sorted(values)
    n = len(w)
    if n == 0:
        raise UndefinedMetricError("Gini coefficient of an empty population is undefined")
    if any(v < 0 for v in w):
        raise ValueError("wealth must be non-negative")
    total = 0.0
    weighted = 0.0
    for i, v in enumerate(w, start=1):
        total += v
        weighted += i * v
    if total == 0:
        raise UndefinedMetricError("Gini coefficient of all-zero wealth is undefined")
    return 2.0 * weighted / (n * total) - (n + 1.0) / n


def gini(trace: ExecutionTrace, status_quo_price: float | None = None) -> float:
    """Gini coefficient of post-trade wealth; failed trades hold zero."""
    return gini_of(wealth(trace, status_quo_price))


def relative_score(raw: float, all_values: Sequence[float] | Iterable[float]) -> RelativeScore:
    """Min-max normalise ``raw`` against ``all_values`` onto [0, 100]."""
    values = list(all_values)
    if not values:
        raise ValueError("relative_score needs at least one reference value")
    lo = min(min(values), raw)
    hi = max(max(values), raw)
    if hi == lo:
        return RelativeScore(0.0, lo, hi)
    pct = 100.0 * (raw - lo) / (hi - lo)
    return RelativeScore(min(100.0, max(0.0, pct)), lo, hi)
