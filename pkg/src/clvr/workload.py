"""Synthetic pending-trade blocks, slippage limits and trade splitting."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from clvr.amm import Pool, Side, Trade, isolated_output

# Log-normal fit (natural-log parameters) to swap sizes on a USDC-USDT pool.
DEFAULT_MU = 4.93
DEFAULT_SIGMA = 2.05
DEFAULT_RESERVES = 2_000_000.0
LOW_LIQUIDITY_RESERVES = 100_000.0
DEFAULT_TOLERANCE = 0.005


@dataclass(frozen=True)
class LogNormal:
    mu: float = DEFAULT_MU
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("log-normal sigma must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.exp(self.mu + self.sigma * rng.standard_normal(n))


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 100_000.0

    def __post_init__(self) -> None:
        if not (0 <= self.lo < self.hi):
            raise ValueError("uniform bounds must satisfy 0 <= lo < hi")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        draws = rng.uniform(self.lo, self.hi, n)
        # the open interval excludes lo; a zero-size trade is invalid
        return np.where(draws > 0, draws, np.nextafter(self.lo, self.hi))


@dataclass(frozen=True)
class WorkloadSpec:
    n: int
    size_distribution: LogNormal | Uniform = field(default_factory=LogNormal)
    buy_probability: float = 0.5
    seed: int = 0
    split_factor: int = 1

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("block size must be non-negative")
        if self.split_factor < 1:
            raise ValueError("split_factor must be >= 1")
        if not 0.0 <= self.buy_probability <= 1.0:
            raise ValueError("buy_probability must lie in [0, 1]")


def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for one (experiment, parameter, trial) cell."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


def trade_ids(n: int, prefix: str = "t") -> list[str]:
    width = max(1, len(str(n - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def generate_block(spec: WorkloadSpec, rng: np.random.Generator | None = None) -> list[Trade]:
    """Draw ``spec.n`` trades; ids are zero-padded so string order equals arrival order."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.n == 0:
        return []
    buys = rng.random(spec.n) < spec.buy_probability
    sizes = spec.size_distribution.sample(rng, spec.n)
    trades = [
        Trade(tid, Side.BUY if b else Side.SELL, float(s))
        for tid, b, s in zip(trade_ids(spec.n), buys, sizes)
    ]
    if spec.split_factor > 1:
        trades = split_trades(trades, spec.split_factor)
    return trades


def assign_slippage(pool: Pool, trades: Sequence[Trade], tolerance: float = DEFAULT_TOLERANCE) -> list[Trade]:
    """Set each trade's minimum output to its stand-alone output less ``tolerance``."""
    if not 0.0 <= tolerance <= 1.0:
        raise ValueError("tolerance must lie in [0, 1]")
    return [replace(t, min_amount_out=(1.0 - tolerance) * isolated_output(pool, t)) for t in trades]


def split_trades(trades: Sequence[Trade], split_factor: int, target: str | None = None) -> list[Trade]:
    """Replace each targeted trade by ``split_factor`` equal children.

    ``target`` is a trade id, or ``None`` for every trade. Children keep the
    parent's direction and owner label (the parent id when it had none).
    """
    if split_factor < 1:
        raise ValueError("split_factor must be >= 1")
    if split_factor == 1:
        return list(trades)
    if target is not None and target not in {t.id for t in trades}:
        raise ValueError(f"no trade with id {target!r}")
    width = len(str(split_factor - 1))
    out: list[Trade] = []
    for t in trades:
        if target is not None and t.id != target:
            out.append(t)
            continue
        part = t.amount_in / split_factor
        floor = None if t.min_amount_out is None else t.min_amount_out / split_factor
        out.extend(
            Trade(f"{t.id}.{k:0{width}d}", t.side, part, floor, t.holder) for k in range(split_factor)
        )
    return out
