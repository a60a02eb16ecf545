"""Transaction ordering rules for constant-product AMMs, with a simulator to compare them."""

from clvr.amm import ExecutionTrace, Ordering, Pool, Side, Step, Trade, execute_block, execute_trade, swap
from clvr.errors import (
    ClvrError,
    ExecutionError,
    IngestionError,
    InvalidOrderingError,
    TractabilityError,
    UndefinedMetricError,
)
from clvr.metrics import gini, relative_score, volatility
from clvr.sequencers import RULES, brute_force, clvr, exhaustive_search, order_trades

__version__ = "0.1.0"

__all__ = [
    "RULES",
    "ClvrError",
    "ExecutionError",
    "ExecutionTrace",
    "IngestionError",
    "InvalidOrderingError",
    "Ordering",
    "Pool",
    "Side",
    "Step",
    "TractabilityError",
    "Trade",
    "UndefinedMetricError",
    "brute_force",
    "clvr",
    "execute_block",
    "execute_trade",
    "exhaustive_search",
    "gini",
    "order_trades",
    "relative_score",
    "swap",
    "volatility",
]
