"""Monte Carlo experiment suite.

Each experiment returns a plain ``dict`` report (JSON-ready, no timestamps)
so that reruns with the same seed serialise byte for byte. Trials are
independent: every trial draws from its own generator keyed by
``(seed, stream, parameter, trial)``, and results are folded in trial order
whatever the worker scheduling.
"""

from __future__ import annotations

import hashlib
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from clvr.amm import ExecutionTrace, Ordering, Pool, Side, Trade, execute_block
from clvr.errors import TractabilityError
from clvr.metrics import gini, relative_score, volatility
from clvr.sequencers import DEFAULT_FACTORIAL_CAP, exhaustive_search, order_trades
from clvr.stats import paired_t_test
from clvr.workload import (
    DEFAULT_TOLERANCE,
    DEFAULT_RESERVES,
    LogNormal,
    Uniform,
    WorkloadSpec,
    assign_slippage,
    generate_block,
    split_trades,
    trial_rng,
)

TIE_RTOL = 1e-12

# generator stream tags, so experiments sharing a seed never share draws
_BLOCK, _RANDOM_ORDER, _SPLIT, _SWEEP, _CONFLICT = 1, 2, 3, 4, 5


def default_pool() -> Pool:
    return Pool(DEFAULT_RESERVES, DEFAULT_RESERVES)


def resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def map_trials(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """``list(map(fn, items))``, optionally across processes; output order is input order."""
    workers = resolve_threads(threads)
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def ordering_digest(ordering: Ordering) -> str:
    return hashlib.sha256("\x1f".join(ordering.sequence).encode()).hexdigest()[:16]


def is_tie(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def _pick_winner(values: dict[str, float]) -> str | None:
    """Rule with strictly lowest value, or ``None`` when the lowest is tied."""
    best = min(values.values())
    leaders = [rule for rule, v in values.items() if is_tie(v, best)]
    return leaders[0] if len(leaders) == 1 else None


def _sequence(rule: str, pool: Pool, trades: list[Trade], rng_keys: tuple[int, ...], seed: int, cap: int) -> Ordering:
    rng = trial_rng(seed, _RANDOM_ORDER, *rng_keys) if rule == "random" else 0
    return order_trades(rule, pool, trades, seed=rng, cap=cap)


# --------------------------------------------------------------------------
# sequencer comparison


@dataclass(frozen=True)
class SequencerOutcome:
    digest: str
    volatility: float
    relative_volatility: float | None
    failures: int
    gini: float


@dataclass(frozen=True)
class TrialResult:
    trial_id: int
    n: int
    outcomes: dict[str, SequencerOutcome]
    winner: str | None
    volatility_min: float | None = None
    volatility_max: float | None = None


def _compare_trial(
    key: tuple[int, int],
    seed: int,
    pool: Pool,
    dist: LogNormal | Uniform,
    sequencers: tuple[str, ...],
    cap: int,
) -> TrialResult:
    n, trial = key
    trades = generate_block(WorkloadSpec(n, dist), trial_rng(seed, _BLOCK, n, trial))
    traces: dict[str, tuple[Ordering, ExecutionTrace]] = {}
    for rule in sequencers:
        ordering = _sequence(rule, pool, trades, (n, trial), seed, cap)
        traces[rule] = ordering, execute_block(pool, trades, ordering)
    lo = hi = None
    if n <= cap:
        search = exhaustive_search(pool, trades, cap=cap)
        lo, hi = search.volatility_min[1], search.volatility_max[1]
    outcomes = {}
    for rule, (ordering, trace) in traces.items():
        vol = volatility(trace).volatility
        rel = relative_score(vol, [lo, hi]).value_pct if lo is not None else None
        outcomes[rule] = SequencerOutcome(ordering_digest(ordering), vol, rel, trace.failures, gini(trace))
    winner = _pick_winner({r: o.volatility for r, o in outcomes.items()})
    return TrialResult(trial, n, outcomes, winner, lo, hi)


def compare_sequencers(
    block_sizes: Sequence[int] = (2, 5, 10),
    trials: int = 100,
    *,
    pool: Pool | None = None,
    size_distribution: LogNormal | Uniform | None = None,
    sequencers: Sequence[str] = ("clvr", "vhgsr"),
    seed: int = 0,
    cap: int = DEFAULT_FACTORIAL_CAP,
    threads: int = 1,
    include_trials: bool = False,
) -> dict:
    """Winner counts, mean (relative) volatility and a paired t-test per block size.

    The t-test asks whether the first sequencer's volatility is lower than
    the second's. Relative volatility needs exhaustive search and is
    ``None`` above ``cap``.
    """
    pool = pool or default_pool()
    dist = size_distribution or LogNormal()
    sequencers = tuple(sequencers)
    if len(sequencers) < 1 or len(set(sequencers)) != len(sequencers):
        raise ValueError("sequencers must be a non-empty list of distinct rules")
    fn = partial(_compare_trial, seed=seed, pool=pool, dist=dist, sequencers=sequencers, cap=cap)
    rows = []
    all_trials = []
    for n in block_sizes:
        results: list[TrialResult] = map_trials(fn, [(n, t) for t in range(trials)], threads)
        wins = {rule: sum(r.winner == rule for r in results) for rule in sequencers}
        ties = sum(r.winner is None for r in results)
        mean_vol = {rule: _mean([r.outcomes[rule].volatility for r in results]) for rule in sequencers}
        tractable = n <= cap
        mean_rel = (
            {rule: _mean([r.outcomes[rule].relative_volatility for r in results]) for rule in sequencers}
            if tractable
            else None
        )
        p_value = None
        if len(sequencers) >= 2 and trials >= 2:
            a, b = sequencers[0], sequencers[1]
            diffs = [r.outcomes[a].volatility - r.outcomes[b].volatility for r in results]
            p_value = paired_t_test(diffs, "less")
        rows.append(
            {
                "n": n,
                "trials": trials,
                "wins": wins,
                "ties": ties,
                "mean_volatility": mean_vol,
                "mean_relative_volatility": mean_rel,
                "p_value": p_value,
            }
        )
        if include_trials:
            all_trials.extend(asdict(r) for r in results)
    report = {
        "experiment": "compare",
        "config": {
            "block_sizes": list(block_sizes),
            "trials": trials,
            "pool": asdict(pool),
            "size_distribution": _dist_config(dist),
            "sequencers": list(sequencers),
            "seed": seed,
            "cap": cap,
        },
        "rows": rows,
    }
    if include_trials:
        report["trials"] = all_trials
    return report


def _dist_config(dist: LogNormal | Uniform) -> dict:
    return {"kind": type(dist).__name__.lower(), **asdict(dist)}


# --------------------------------------------------------------------------
# slippage failures


def _failure_trial(
    key: tuple[int, int], seed: int, pool: Pool, dist: LogNormal | Uniform, tolerance: float
) -> dict[str, int]:
    n, trial = key
    trades = generate_block(WorkloadSpec(n, dist), trial_rng(seed, _BLOCK, n, trial))
    trades = assign_slippage(pool, trades, tolerance)
    counts = {}
    for label, rule in (("random", "random"), ("vhgsr", "vhgsr_slippage_aware"), ("clvr", "clvr_slippage_aware")):
        ordering = _sequence(rule, pool, trades, (n, trial), seed, DEFAULT_FACTORIAL_CAP)
        counts[label] = execute_block(pool, trades, ordering, enforce_slippage=True).failures
    return counts


def failure_rate_experiment(
    block_sizes: Sequence[int] = (3, 5, 8, 10, 15, 25, 50, 100),
    trials: int = 1000,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    pool: Pool | None = None,
    size_distribution: LogNormal | Uniform | None = None,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """Mean percentage of failed trades under random, VHGSR and CLVR ordering."""
    pool = pool or default_pool()
    dist = size_distribution or LogNormal()
    fn = partial(_failure_trial, seed=seed, pool=pool, dist=dist, tolerance=tolerance)
    rows = []
    for n in block_sizes:
        results = map_trials(fn, [(n, t) for t in range(trials)], threads)
        rates = {}
        for label in ("random", "vhgsr", "clvr"):
            total = sum(r[label] for r in results)
            rates[label] = 100.0 * total / (n * trials) if n and trials else 0.0
        reduction = 100.0 * (1.0 - rates["clvr"] / rates["random"]) if rates["random"] > 0 else 0.0
        rows.append({"n": n, "trials": trials, "failure_rate_pct": rates, "reduction_pct": reduction})
    return {
        "experiment": "failure_rates",
        "config": {
            "block_sizes": list(block_sizes),
            "trials": trials,
            "tolerance": tolerance,
            "pool": asdict(pool),
            "size_distribution": _dist_config(dist),
            "seed": seed,
        },
        "rows": rows,
    }


# --------------------------------------------------------------------------
# block-size sweep


STATUS_QUO = ("block", "stream")


def run_stream(
    pool: Pool, trades: Sequence[Trade], block_size: int, rule: str = "clvr", status_quo: str = "block"
) -> tuple[float, Pool]:
    """Sequence consecutive chunks of ``trades`` as blocks, carrying the pool across them.

    Returns the mean of per-block volatilities and the closing pool. Each
    block is measured against its own opening price, or with
    ``status_quo="stream"`` against the price the whole stream opened at.
    The rule itself always sequences against the block's opening price.
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    if status_quo not in STATUS_QUO:
        raise ValueError(f"status_quo must be one of {STATUS_QUO}")
    reference = pool if status_quo == "stream" else None
    vols = []
    current = pool
    for start in range(0, len(trades), block_size):
        block = list(trades[start : start + block_size])
        trace = execute_block(current, block, order_trades(rule, current, block))
        vols.append(volatility(trace, reference=reference).volatility)
        current = trace.final_pool
    return math.fsum(vols) / len(vols), current


def _sweep_trial(
    trial: int, seed: int, pool: Pool, dist, total: int, block_sizes: tuple[int, ...], rule: str, status_quo: str
) -> list[float]:
    trades = generate_block(WorkloadSpec(total, dist), trial_rng(seed, _SWEEP, total, trial))
    return [run_stream(pool, trades, b, rule, status_quo)[0] for b in block_sizes]


def block_size_sweep(
    block_sizes: Sequence[int] = (1, 2, 5, 10, 20, 25, 50, 100),
    trials: int = 1000,
    *,
    total_trades: int = 100,
    rule: str = "clvr",
    status_quo: str = "block",
    pool: Pool | None = None,
    size_distribution: LogNormal | Uniform | None = None,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """Median and quartiles of stream volatility when ``total_trades`` are batched per block size.

    The same trade stream is reused for every block size within a trial.
    See ``run_stream`` for ``status_quo``.
    """
    if status_quo not in STATUS_QUO:
        raise ValueError(f"status_quo must be one of {STATUS_QUO}")
    for b in block_sizes:
        if b < 1 or total_trades % b:
            raise ValueError(f"block size {b} does not partition {total_trades} trades")
    pool = pool or default_pool()
    dist = size_distribution or LogNormal()
    sizes = tuple(block_sizes)
    fn = partial(
        _sweep_trial, seed=seed, pool=pool, dist=dist, total=total_trades, block_sizes=sizes, rule=rule, status_quo=status_quo
    )
    per_trial = np.array(map_trials(fn, list(range(trials)), threads))
    rows = []
    for j, b in enumerate(sizes):
        col = per_trial[:, j]
        p25, med, p75 = np.percentile(col, [25, 50, 75])
        rows.append(
            {
                "block_size": b,
                "blocks": total_trades // b,
                "median": float(med),
                "p25": float(p25),
                "p75": float(p75),
                "mean": float(col.mean()),
            }
        )
    return {
        "experiment": "block_size",
        "config": {
            "block_sizes": list(sizes),
            "trials": trials,
            "total_trades": total_trades,
            "rule": rule,
            "status_quo": status_quo,
            "pool": asdict(pool),
            "size_distribution": _dist_config(dist),
            "seed": seed,
        },
        "rows": rows,
    }


# --------------------------------------------------------------------------
# trade splitting


def holder_outputs(trace: ExecutionTrace, trades: Sequence[Trade]) -> dict[str, float]:
    """Total received per owner label, summed over split children."""
    holder = {t.id: t.holder for t in trades}
    totals: dict[str, float] = {}
    for step in trace.steps:
        h = holder[step.trade_id]
        totals[h] = totals.get(h, 0.0) + step.amount_out
    return totals


def clvr_outputs(pool: Pool, trades: Sequence[Trade]) -> tuple[dict[str, float], ExecutionTrace]:
    trace = execute_block(pool, trades, order_trades("clvr", pool, trades))
    return holder_outputs(trace, trades), trace


def split_pair_example(
    reserves: float = 100_000.0, size: float = 1_000.0, split_factor: int = 1_000
) -> dict[str, float]:
    """Volatility of ``{buy size, sell size}`` unsplit and with both trades split, CLVR-ordered."""
    pool = Pool(reserves, reserves)
    trades = [Trade("alpha", Side.BUY, size), Trade("beta", Side.SELL, size)]
    unsplit = volatility(clvr_outputs(pool, trades)[1]).volatility
    split = volatility(clvr_outputs(pool, split_trades(trades, split_factor))[1]).volatility
    return {"unsplit_volatility": unsplit, "split_volatility": split, "split_factor": split_factor}


def _one_splits_trial(trial: int, seed: int, pool: Pool, dist, sizes, factors, others: int) -> list[list[float]]:
    base = generate_block(WorkloadSpec(others, dist), trial_rng(seed, _SPLIT, 0, trial))
    grid = []
    for s in sizes:
        trades = base + [Trade("tstar", Side.BUY, float(s))]
        before = clvr_outputs(pool, trades)[0]["tstar"]
        row = []
        for k in factors:
            after = clvr_outputs(pool, split_trades(trades, k, "tstar"))[0]["tstar"]
            row.append(100.0 * (after / before - 1.0))
        grid.append(row)
    return grid


def _all_split_trial(trial: int, seed: int, pool: Pool, dist, factors, n: int) -> list[float]:
    trades = generate_block(WorkloadSpec(n, dist), trial_rng(seed, _SPLIT, 1, trial))
    before = clvr_outputs(pool, trades)[0]
    row = []
    for k in factors:
        after = clvr_outputs(pool, split_trades(trades, k))[0]
        row.append(math.fsum(100.0 * (after[h] / before[h] - 1.0) for h in before) / len(before))
    return row


def splitting_experiment(
    mode: str = "one_splits",
    *,
    sizes: Sequence[float] = tuple(float(v) for v in np.logspace(1, 7, 10)),
    split_factors: Sequence[int] = (1, 2, 3, 5, 10),
    trials: int = 1000,
    block_size: int = 10,
    pool: Pool | None = None,
    size_distribution: LogNormal | Uniform | None = None,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """Mean % change in amount received from splitting, CLVR-ordered.

    ``one_splits``: a buy ``t*`` of each size joins ``block_size - 1`` random
    trades and alone is split. ``all_split``: every trade in a random block
    is split and the change is averaged over the original traders.
    """
    pool = pool or default_pool()
    dist = size_distribution or LogNormal()
    factors = tuple(int(k) for k in split_factors)
    if any(k < 1 for k in factors):
        raise ValueError("split factors must be >= 1")
    rows = []
    if mode == "one_splits":
        sizes = tuple(float(s) for s in sizes)
        fn = partial(_one_splits_trial, seed=seed, pool=pool, dist=dist, sizes=sizes, factors=factors, others=block_size - 1)
        cube = np.array(map_trials(fn, list(range(trials)), threads))  # trial x size x factor
        means = cube.mean(axis=0)
        for i, s in enumerate(sizes):
            for j, k in enumerate(factors):
                rows.append({"size": s, "split_factor": k, "mean_gain_pct": float(means[i, j])})
    elif mode == "all_split":
        fn = partial(_all_split_trial, seed=seed, pool=pool, dist=dist, factors=factors, n=block_size)
        grid = np.array(map_trials(fn, list(range(trials)), threads))
        for j, k in enumerate(factors):
            rows.append({"size": None, "split_factor": k, "mean_gain_pct": float(grid[:, j].mean())})
    else:
        raise ValueError("mode must be 'one_splits' or 'all_split'")
    return {
        "experiment": "splitting",
        "config": {
            "mode": mode,
            "sizes": list(sizes) if mode == "one_splits" else None,
            "split_factors": list(factors),
            "trials": trials,
            "block_size": block_size,
            "pool": asdict(pool),
            "size_distribution": _dist_config(dist),
            "seed": seed,
        },
        "rows": rows,
    }


# --------------------------------------------------------------------------
# volatility vs inequality


@dataclass(frozen=True)
class ConflictTrial:
    gini_of_vol_min: float
    gini_of_vol_max: float
    vol_of_gini_min: float
    vol_of_gini_max: float


def _conflict_trial(key: tuple[int, int], seed: int, pool: Pool, dist, cap: int) -> ConflictTrial:
    n, trial = key
    trades = generate_block(WorkloadSpec(n, dist), trial_rng(seed, _CONFLICT, n, trial))
    s = exhaustive_search(pool, trades, with_gini=True, cap=cap)
    g_lo, g_hi = s.gini_min[1], s.gini_max[1]
    v_lo, v_hi = s.volatility_min[1], s.volatility_max[1]

    def gini_pct(ordering: Ordering) -> float:
        return relative_score(gini(execute_block(pool, trades, ordering)), [g_lo, g_hi]).value_pct

    def vol_pct(ordering: Ordering) -> float:
        return relative_score(volatility(execute_block(pool, trades, ordering)).volatility, [v_lo, v_hi]).value_pct

    return ConflictTrial(
        gini_pct(s.volatility_min[0]),
        gini_pct(s.volatility_max[0]),
        vol_pct(s.gini_min[0]),
        vol_pct(s.gini_max[0]),
    )


def objective_conflict(
    block_sizes: Sequence[int] = (3, 5, 10),
    trials: int = 100,
    *,
    pool: Pool | None = None,
    size_distribution: LogNormal | Uniform | None = None,
    seed: int = 0,
    cap: int = DEFAULT_FACTORIAL_CAP,
    threads: int = 1,
) -> dict:
    """Relative Gini of volatility-optimal orderings and relative volatility of Gini-optimal ones."""
    for n in block_sizes:
        if n > cap:
            raise TractabilityError(f"objective conflict needs exhaustive search; n={n} exceeds cap {cap}")
    pool = pool or default_pool()
    dist = size_distribution or LogNormal()
    fn = partial(_conflict_trial, seed=seed, pool=pool, dist=dist, cap=cap)
    rows = []
    for n in block_sizes:
        results = map_trials(fn, [(n, t) for t in range(trials)], threads)
        rows.append(
            {
                "n": n,
                "trials": trials,
                "relative_gini_vol_min": _mean([r.gini_of_vol_min for r in results]),
                "relative_gini_vol_max": _mean([r.gini_of_vol_max for r in results]),
                "relative_vol_gini_min": _mean([r.vol_of_gini_min for r in results]),
                "relative_vol_gini_max": _mean([r.vol_of_gini_max for r in results]),
            }
        )
    return {
        "experiment": "objective_conflict",
        "config": {
            "block_sizes": list(block_sizes),
            "trials": trials,
            "pool": asdict(pool),
            "size_distribution": _dist_config(dist),
            "seed": seed,
            "cap": cap,
        },
        "rows": rows,
    }
