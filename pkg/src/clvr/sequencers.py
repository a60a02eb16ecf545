"""Ordering rules for a block of pending trades.

Every rule is deterministic given its inputs. Wherever a rule leaves a
choice open, the trade with the smallest id wins, so any observer can
replay the rule and check a block builder's ordering.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from clvr import _search
from clvr.amm import Ordering, Pool, Side, Trade, log_deviation, swap
from clvr.errors import TractabilityError, UndefinedMetricError

DEFAULT_FACTORIAL_CAP = 12

RULES = (
    "fcfs",
    "random",
    "brute_force_min",
    "brute_force_max",
    "gsr",
    "vhgsr",
    "vhgsr_slippage_aware",
    "clvr",
    "clvr_slippage_aware",
)

METRICS = ("volatility", "gini")


@dataclass(frozen=True)
class SequencerKind:
    """A rule name plus the parameters some rules need."""

    rule: str
    seed: int = 0
    metric: str = "volatility"
    cap: int = DEFAULT_FACTORIAL_CAP

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"unknown sequencing rule {self.rule!r}; choose from {', '.join(RULES)}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def order(self, pool: Pool, trades: Sequence[Trade]) -> Ordering:
        return order_trades(self.rule, pool, trades, seed=self.seed, metric=self.metric, cap=self.cap)


def _by_id(trades: Sequence[Trade]) -> list[Trade]:
    return sorted(trades, key=lambda t: t.id)


def fcfs(trades: Sequence[Trade]) -> Ordering:
    return Ordering(tuple(t.id for t in trades))


def random_ordering(trades: Sequence[Trade], seed: int | np.random.Generator) -> Ordering:
    """Uniform permutation of the id-sorted block, reproducible from ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = _by_id(trades)
    perm = rng.permutation(len(base))
    return Ordering(tuple(base[i].id for i in perm))


def _viable(out: float, trade: Trade) -> bool:
    return trade.min_amount_out is None or out >= trade.min_amount_out


def _clvr(pool: Pool, trades: Sequence[Trade], slippage_aware: bool) -> Ordering:
    x0, y0, fee = pool.reserve_x, pool.reserve_y, pool.fee_rate
    x, y = x0, y0
    remaining = _by_id(trades)
    sequence: list[str] = []
    while remaining:
        best = -1
        best_dev = math.inf
        best_state = (x, y)
        for k, trade in enumerate(remaining):
            nx, ny, out = swap(x, y, fee, trade.side, trade.amount_in)
            if slippage_aware and not _viable(out, trade):
                continue
            d = log_deviation(x0, y0, nx, ny)
            dev = d * d
            if dev < best_dev:
                best, best_dev, best_state = k, dev, (nx, ny)
        if best < 0:
            failed = [t.id for t in remaining]
            return Ordering(tuple(sequence + failed), frozenset(failed))
        sequence.append(remaining.pop(best).id)
        x, y = best_state
    return Ordering(tuple(sequence))


def clvr(pool: Pool, trades: Sequence[Trade]) -> Ordering:
    """Greedy look-ahead: at each step run the trade whose post-trade log price
    lands closest to the block's opening log price."""
    return _clvr(pool, trades, slippage_aware=False)


def clvr_slippage_aware(pool: Pool, trades: Sequence[Trade]) -> Ordering:
    """CLVR that passes over trades which would fail their minimum output if run now.

    Skipped trades are reconsidered at every later step. Once nothing left
    is viable, the rest are appended in id order and marked failed.
    """
    return _clvr(pool, trades, slippage_aware=True)


def _common_size(trade: Trade, p0: float) -> float:
    # measured in X units; buy inputs are Y
    return trade.amount_in if trade.side is Side.SELL else trade.amount_in / p0


def _gsr(pool: Pool, trades: Sequence[Trade], smallest_first: bool, slippage_aware: bool) -> Ordering:
    x, y, fee = pool.reserve_x, pool.reserve_y, pool.fee_rate
    p0 = y / x
    if smallest_first:
        remaining = sorted(trades, key=lambda t: (_common_size(t, p0), t.id))
    else:
        remaining = _by_id(trades)
    sequence: list[str] = []
    while remaining:
        price = y / x
        if price > p0:
            eligible = [t for t in remaining if t.side is Side.SELL]
        elif price < p0:
            eligible = [t for t in remaining if t.side is Side.BUY]
        else:
            eligible = []
        # one side exhausted (or price at p0): every remaining trade is eligible
        if not eligible:
            eligible = remaining
        chosen = None
        for pool_pass in (eligible, remaining):
            for trade in pool_pass:
                nx, ny, out = swap(x, y, fee, trade.side, trade.amount_in)
                if not slippage_aware or _viable(out, trade):
                    chosen = (trade, nx, ny)
                    break
            if chosen is not None or not slippage_aware:
                break
        if chosen is None:
            failed = sorted(t.id for t in remaining)
            return Ordering(tuple(sequence + failed), frozenset(failed))
        trade, x, y = chosen
        remaining.remove(trade)
        sequence.append(trade.id)
    return Ordering(tuple(sequence))


def gsr(pool: Pool, trades: Sequence[Trade]) -> Ordering:
    """Greedy sequencing: above the opening price run a sell, below it a buy.

    Within the eligible side trades go in id order.
    """
    return _gsr(pool, trades, smallest_first=False, slippage_aware=False)


def vhgsr(pool: Pool, trades: Sequence[Trade]) -> Ordering:
    """GSR that picks the smallest eligible trade, buys valued at the opening price."""
    return _gsr(pool, trades, smallest_first=True, slippage_aware=False)


def vhgsr_slippage_aware(pool: Pool, trades: Sequence[Trade]) -> Ordering:
    return _gsr(pool, trades, smallest_first=True, slippage_aware=True)


@dataclass(frozen=True)
class SearchResult:
    """Extremes over every ordering of a block."""

    volatility_min: tuple[Ordering, float]
    volatility_max: tuple[Ordering, float]
    gini_min: tuple[Ordering, float] | None = None
    gini_max: tuple[Ordering, float] | None = None


def exhaustive_search(
    pool: Pool, trades: Sequence[Trade], with_gini: bool = False, cap: int = DEFAULT_FACTORIAL_CAP
) -> SearchResult:
    """Evaluate all ``n!`` orderings; ties go to the lexicographically smallest id sequence."""
    n = len(trades)
    if n == 0:
        raise UndefinedMetricError("no ordering metric is defined for an empty block")
    if n > cap:
        raise TractabilityError(f"exhaustive search over {n}! orderings exceeds the cap of {cap} trades")
    base = _by_id(trades)
    sides = np.array([_search.SELL if t.side is Side.SELL else _search.BUY for t in base], dtype=np.int8)
    amounts = np.array([t.amount_in for t in base], dtype=np.float64)
    values, paths = _search.enumerate_orderings(
        sides, amounts, pool.reserve_x, pool.reserve_y, pool.fee_rate, pool.price, with_gini
    )

    def pick(row: int) -> tuple[Ordering, float]:
        return Ordering(tuple(base[i].id for i in paths[row])), float(values[row])

    gini_min = gini_max = None
    if with_gini:
        if math.isnan(values[2]):
            raise UndefinedMetricError("every ordering leaves all-zero wealth")
        gini_min, gini_max = pick(2), pick(3)
    return SearchResult(pick(0), pick(1), gini_min, gini_max)


def brute_force(
    pool: Pool,
    trades: Sequence[Trade],
    metric: str = "volatility",
    objective: str = "min",
    cap: int = DEFAULT_FACTORIAL_CAP,
) -> tuple[Ordering, float]:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if objective not in ("min", "max"):
        raise ValueError(f"objective must be 'min' or 'max', got {objective!r}")
    result = exhaustive_search(pool, trades, with_gini=metric == "gini", cap=cap)
    return getattr(result, f"{metric}_{objective}")


def order_trades(
    rule: str,
    pool: Pool,
    trades: Sequence[Trade],
    *,
    seed: int | np.random.Generator = 0,
    metric: str = "volatility",
    cap: int = DEFAULT_FACTORIAL_CAP,
) -> Ordering:
    """Dispatch to a named rule."""
    if rule == "fcfs":
        return fcfs(trades)
    if rule == "random":
        return random_ordering(trades, seed)
    if rule in ("brute_force_min", "brute_force_max"):
        if not trades:
            return Ordering(())
        return brute_force(pool, trades, metric, rule.rsplit("_", 1)[1], cap)[0]
    simple = {
        "gsr": gsr,
        "vhgsr": vhgsr,
        "vhgsr_slippage_aware": vhgsr_slippage_aware,
        "clvr": clvr,
        "clvr_slippage_aware": clvr_slippage_aware,
    }
    if rule not in simple:
        raise ValueError(f"unknown sequencing rule {rule!r}; choose from {', '.join(RULES)}")
    return simple[rule](pool, trades)
