"""Constant-product pool state and sequential swap execution.

Token X is the base asset and token Y the quote asset, so the spot price
``reserve_y / reserve_x`` is the number of Y units per X unit. A ``sell``
trade pays X into the pool and receives Y (pushing the price down); a
``buy`` trade pays Y and receives X (pushing the price up).

Fees are taken from the input before the invariant is applied and stay in
the pool, so ``x * y`` is constant when ``fee_rate == 0`` and grows otherwise.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from clvr.errors import ExecutionError, InvalidOrderingError


class Side(str, enum.Enum):
    SELL = "sell"  # pay X, receive Y
    BUY = "buy"  # pay Y, receive X

    @classmethod
    def parse(cls, text: str) -> "Side":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"direction must be 'sell' or 'buy', got {text!r}") from None


@dataclass(frozen=True)
class Pool:
    reserve_x: float
    reserve_y: float
    fee_rate: float = 0.0

    def __post_init__(self) -> None:
        if not (self.reserve_x > 0 and self.reserve_y > 0):
            raise ValueError(f"reserves must be positive, got ({self.reserve_x}, {self.reserve_y})")
        if not (math.isfinite(self.reserve_x) and math.isfinite(self.reserve_y)):
            raise ValueError("reserves must be finite")
        if not 0.0 <= self.fee_rate < 1.0:
            raise ValueError(f"fee_rate must lie in [0, 1), got {self.fee_rate}")

    @property
    def price(self) -> float:
        return self.reserve_y / self.reserve_x

    def scaled(self, factor: float) -> "Pool":
        return Pool(self.reserve_x * factor, self.reserve_y * factor, self.fee_rate)


@dataclass(frozen=True)
class Trade:
    id: str
    side: Side
    amount_in: float
    min_amount_out: float | None = None
    owner: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.side, Side):
            object.__setattr__(self, "side", Side.parse(self.side))
        if not (self.amount_in > 0 and math.isfinite(self.amount_in)):
            raise ValueError(f"trade {self.id}: amount_in must be positive, got {self.amount_in}")
        if self.min_amount_out is not None and not self.min_amount_out >= 0:
            raise ValueError(f"trade {self.id}: min_amount_out must be >= 0")

    @property
    def holder(self) -> str:
        """Label that aggregates split children back to their parent."""
        return self.owner if self.owner is not None else self.id


@dataclass(frozen=True)
class Ordering:
    """A permutation of a block's trade ids.

    ``failed`` lists trades a slippage-aware rule has already given up on;
    they sit at the tail of ``sequence``.
    """

    sequence: tuple[str, ...]
    failed: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sequence", tuple(self.sequence))
        object.__setattr__(self, "failed", frozenset(self.failed))

    def __len__(self) -> int:
        return len(self.sequence)

    def __iter__(self):
        return iter(self.sequence)


@dataclass(frozen=True)
class Step:
    trade_id: str
    side: Side
    amount_out: float
    failed: bool
    reserve_x: float
    reserve_y: float

    @property
    def price_after(self) -> float:
        return self.reserve_y / self.reserve_x


@dataclass(frozen=True)
class ExecutionTrace:
    initial_pool: Pool
    steps: tuple[Step, ...]
    final_pool: Pool

    @property
    def initial_price(self) -> float:
        return self.initial_pool.price

    @property
    def prices(self) -> list[float]:
        return [s.price_after for s in self.steps]

    @property
    def outputs(self) -> dict[str, float]:
        return {s.trade_id: s.amount_out for s in self.steps}

    @property
    def failures(self) -> int:
        return sum(s.failed for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


def spot_price(pool: Pool) -> float:
    return pool.price


def swap(x: float, y: float, fee: float, side: Side, amount: float) -> tuple[float, float, float]:
    """Raw reserve update; returns ``(new_x, new_y, amount_out)``.

    Hot path for the sequencers, so it skips dataclass construction.
    """
    effective = amount * (1.0 - fee)
    if side is Side.SELL:
        out = effective * y / (x + effective)
        return x + amount, y - out, out
    out = effective * x / (y + effective)
    return x - out, y + amount, out


def log_deviation(x0: float, y0: float, x: float, y: float) -> float:
    """``ln(p0) - ln(p)`` for ``p = y / x``, accurate for tiny price moves.

    Written as ``ln(x / x0) - ln(y / y0)`` with ``log1p``: the two terms
    never cancel (reserves move in opposite directions), and quoting the
    price the other way negates the result exactly.
    """
    return math.log1p((x - x0) / x0) - math.log1p((y - y0) / y0)


def execute_trade(pool: Pool, trade: Trade) -> tuple[Pool, float]:
    """Execute one swap against ``pool`` with no slippage check."""
    x, y, out = swap(pool.reserve_x, pool.reserve_y, pool.fee_rate, trade.side, trade.amount_in)
    opposing = pool.reserve_y if trade.side is Side.SELL else pool.reserve_x
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(out)):
        raise ExecutionError(f"trade {trade.id}: non-finite swap result")
    if out >= opposing or x <= 0 or y <= 0:
        raise ExecutionError(f"trade {trade.id}: output {out} would drain the pool")
    return Pool(x, y, pool.fee_rate), out


def isolated_output(pool: Pool, trade: Trade) -> float:
    """Amount ``trade`` would receive if it executed alone against ``pool``."""
    return execute_trade(pool, trade)[1]


def resolve_ordering(trades: Sequence[Trade], ordering: Ordering | Iterable[str] | None) -> list[Trade]:
    """Map an ordering onto trade objects, checking it is a permutation."""
    if ordering is None:
        return list(trades)
    by_id = {t.id: t for t in trades}
    if len(by_id) != len(trades):
        raise InvalidOrderingError("trade ids within a block must be unique")
    seq = list(ordering)
    if len(seq) != len(by_id) or set(seq) != set(by_id):
        missing = sorted(set(by_id) - set(seq))
        extra = sorted(set(seq) - set(by_id))
        raise InvalidOrderingError(
            f"ordering is not a permutation of the block (missing={missing}, unknown={extra}, "
            f"length {len(seq)} vs {len(by_id)})"
        )
    return [by_id[i] for i in seq]


def execute_block(
    pool: Pool,
    trades: Sequence[Trade],
    ordering: Ordering | Iterable[str] | None = None,
    enforce_slippage: bool = False,
) -> ExecutionTrace:
    """Run ``trades`` sequentially in ``ordering`` (input order when omitted).

    With ``enforce_slippage`` a trade whose output falls below its
    ``min_amount_out`` fails and leaves the pool untouched.
    """
    sequence = resolve_ordering(trades, ordering)
    current = pool
    steps = []
    for trade in sequence:
        new_pool, out = execute_trade(current, trade)
        if enforce_slippage and trade.min_amount_out is not None and out < trade.min_amount_out:
            steps.append(Step(trade.id, trade.side, 0.0, True, current.reserve_x, current.reserve_y))
            continue
        current = new_pool
        steps.append(Step(trade.id, trade.side, out, False, current.reserve_x, current.reserve_y))
    return ExecutionTrace(pool, tuple(steps), current)
