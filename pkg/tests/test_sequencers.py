import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from clvr.amm import Pool, Side, Trade, execute_block, log_deviation, swap
from clvr.errors import TractabilityError, UndefinedMetricError
from clvr.metrics import gini, volatility
from clvr.sequencers import (
    RULES,
    SequencerKind,
    brute_force,
    clvr,
    clvr_slippage_aware,
    exhaustive_search,
    gsr,
    order_trades,
    random_ordering,
    vhgsr,
    vhgsr_slippage_aware,
)
from clvr.workload import assign_slippage

from conftest import all_volatilities, random_block

ORDER_RULES = ("fcfs", "random", "gsr", "vhgsr", "vhgsr_slippage_aware", "clvr", "clvr_slippage_aware")


def vol_of(pool, trades, ordering):
    return volatility(execute_block(pool, trades, ordering)).volatility


# -- worked examples ---------------------------------------------------------


def test_clvr_starts_with_small_sell(pool100, greedy_trap):
    assert clvr(pool100, greedy_trap).sequence == ("alpha", "beta", "gamma")


def test_brute_force_counterexample(pool100, greedy_trap):
    ordering, v = brute_force(pool100, greedy_trap)
    assert ordering.sequence == ("beta", "gamma", "alpha")
    assert abs(v - 7.9e-3) <= 0.05e-3


def test_brute_force_agrees_with_naive_oracle(pool100, greedy_trap):
    table = all_volatilities(pool100, greedy_trap)
    lo = min(table, key=table.get)
    hi = max(table, key=table.get)
    assert brute_force(pool100, greedy_trap)[0].sequence == lo
    assert brute_force(pool100, greedy_trap, objective="max")[0].sequence == hi
    assert brute_force(pool100, greedy_trap, objective="max")[1] == pytest.approx(table[hi], rel=1e-12)


def test_single_trade_every_rule(pool100):
    trades = [Trade("only", Side.BUY, 4.0)]
    for rule in RULES:
        assert order_trades(rule, pool100, trades).sequence == ("only",)


def test_mirrored_pair_first_pick(pool100):
    trades = [Trade("b", Side.SELL, 10.0), Trade("a", Side.BUY, 10.0)]
    devs = {}
    for t in trades:
        nx, ny, _ = swap(100.0, 100.0, 0.0, t.side, t.amount_in)
        devs[t.id] = log_deviation(100.0, 100.0, nx, ny) ** 2
    expected = min(sorted(devs), key=devs.get)
    assert clvr(pool100, trades).sequence[0] == expected


# -- structural properties ----------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 9), st.sampled_from(ORDER_RULES))
def test_every_rule_returns_a_permutation(seed, n, rule):
    pool = Pool(2e6, 2e6)
    trades = assign_slippage(pool, random_block(seed, n))
    ordering = order_trades(rule, pool, trades, seed=seed)
    assert sorted(ordering.sequence) == sorted(t.id for t in trades)
    assert ordering.failed <= set(ordering.sequence)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.floats(1e3, 1e7))
def test_clvr_step_optimality(seed, n, reserves):
    pool = Pool(reserves, reserves * 1.5)
    trades = random_block(seed, n)
    by_id = {t.id: t for t in trades}
    seq = clvr(pool, trades).sequence
    x, y = pool.reserve_x, pool.reserve_y
    remaining = set(by_id)
    for tid in seq:
        cands = {}
        for rid in remaining:
            nx, ny, _ = swap(x, y, 0.0, by_id[rid].side, by_id[rid].amount_in)
            cands[rid] = (log_deviation(pool.reserve_x, pool.reserve_y, nx, ny) ** 2, rid)
        assert cands[tid] == min(cands.values())
        x, y, _ = swap(x, y, 0.0, by_id[tid].side, by_id[tid].amount_in)
        remaining.remove(tid)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.booleans())
def test_gsr_alternation(seed, n, smallest):
    pool = Pool(1e4, 1e4)
    trades = random_block(seed, n)
    by_id = {t.id: t for t in trades}
    seq = (vhgsr if smallest else gsr)(pool, trades).sequence
    x, y = pool.reserve_x, pool.reserve_y
    remaining = set(by_id)
    for tid in seq:
        price = y / x
        sides = {by_id[r].side for r in remaining}
        if price > pool.price and Side.SELL in sides:
            assert by_id[tid].side is Side.SELL
        if price < pool.price and Side.BUY in sides:
            assert by_id[tid].side is Side.BUY
        x, y, _ = swap(x, y, 0.0, by_id[tid].side, by_id[tid].amount_in)
        remaining.remove(tid)


def test_gsr_id_order_and_vhgsr_smallest():
    pool = Pool(100.0, 100.0)
    trades = [Trade("t1", Side.SELL, 5.0), Trade("t2", Side.SELL, 1.0), Trade("t3", Side.BUY, 50.0)]
    assert gsr(pool, trades).sequence[0] == "t1"
    assert vhgsr(pool, trades).sequence[0] == "t2"


def test_vhgsr_compares_buys_at_opening_price():
    # at p0 = 4 a buy paying 20 Y is worth 5 X, smaller than a 6 X sell
    pool = Pool(100.0, 400.0)
    trades = [Trade("s", Side.SELL, 6.0), Trade("b", Side.BUY, 20.0)]
    assert vhgsr(pool, trades).sequence[0] == "b"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_brute_force_bounds_every_rule(seed, n):
    pool = Pool(2e6, 2e6)
    trades = random_block(seed, n)
    s = exhaustive_search(pool, trades)
    lo, hi = s.volatility_min[1], s.volatility_max[1]
    for rule in ("fcfs", "random", "gsr", "vhgsr", "clvr"):
        v = vol_of(pool, trades, order_trades(rule, pool, trades, seed=seed))
        assert lo <= v <= hi


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.floats(0.0, 0.01))
def test_compiled_search_matches_python_bitwise(seed, n, fee):
    pool = Pool(1e4, 2e4, fee)
    trades = sorted(random_block(seed, n), key=lambda t: t.id)
    best = {"vmin": (np.inf, None), "vmax": (-np.inf, None), "gmin": (np.inf, None), "gmax": (-np.inf, None)}
    for perm in itertools.permutations(trades):
        trace = execute_block(pool, trades, [t.id for t in perm])
        v, g = volatility(trace).volatility, gini(trace)
        ids = tuple(t.id for t in perm)
        if v < best["vmin"][0]:
            best["vmin"] = (v, ids)
        if v > best["vmax"][0]:
            best["vmax"] = (v, ids)
        if g < best["gmin"][0]:
            best["gmin"] = (g, ids)
        if g > best["gmax"][0]:
            best["gmax"] = (g, ids)
    s = exhaustive_search(pool, trades, with_gini=True)
    got = {"vmin": s.volatility_min, "vmax": s.volatility_max, "gmin": s.gini_min, "gmax": s.gini_max}
    for key, (value, ids) in best.items():
        assert got[key][1] == value  # bit for bit
        assert got[key][0].sequence == ids


def test_brute_force_result_replays_exactly():
    pool = Pool(2e6, 2e6)
    trades = random_block(7, 9)
    ordering, v = brute_force(pool, trades)
    assert vol_of(pool, trades, ordering) == v


def test_tractability_and_empty():
    trades = random_block(0, 13)
    with pytest.raises(TractabilityError):
        exhaustive_search(Pool(1e6, 1e6), trades)
    with pytest.raises(TractabilityError):
        order_trades("brute_force_min", Pool(1e6, 1e6), trades[:5], cap=4)
    with pytest.raises(UndefinedMetricError):
        exhaustive_search(Pool(1e6, 1e6), [])
    assert order_trades("brute_force_max", Pool(1e6, 1e6), []).sequence == ()


def test_brute_force_gini_metric(pool100, greedy_trap):
    ordering, g = brute_force(pool100, greedy_trap, metric="gini")
    assert gini(execute_block(pool100, greedy_trap, ordering)) == g


def test_random_ordering_is_uniform():
    trades = [Trade(i, Side.SELL, 1.0) for i in "abc"]
    draws = 6000
    counts = Counter(random_ordering(trades, s).sequence for s in range(draws))
    assert len(counts) == 6
    for c in counts.values():
        assert abs(c / draws - 1 / 6) <= 0.02
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3


def test_random_ordering_reproducible_and_input_order_free():
    trades = random_block(3, 8)
    assert random_ordering(trades, 42) == random_ordering(list(reversed(trades)), 42)


# -- slippage-aware variants --------------------------------------------------


def test_zero_floor_matches_plain_rules():
    pool = Pool(2e6, 2e6)
    for seed in range(30):
        trades = assign_slippage(pool, random_block(seed, 10), tolerance=1.0)
        assert clvr_slippage_aware(pool, trades) == clvr(pool, trades)
        assert vhgsr_slippage_aware(pool, trades) == vhgsr(pool, trades)


def test_zero_tolerance_first_trade_never_fails():
    pool = Pool(1e5, 1e5)
    for seed in range(30):
        trades = assign_slippage(pool, random_block(seed, 8), tolerance=0.0)
        for rule in ("clvr_slippage_aware", "vhgsr_slippage_aware", "fcfs"):
            trace = execute_block(pool, trades, order_trades(rule, pool, trades), enforce_slippage=True)
            assert not trace.steps[0].failed


def test_slippage_aware_skips_then_marks_failed():
    pool = Pool(100.0, 100.0)
    trades = [
        Trade("a", Side.SELL, 30.0, min_amount_out=0.0),
        Trade("b", Side.SELL, 10.0, min_amount_out=9.0),
        Trade("c", Side.SELL, 10.0, min_amount_out=9.05),
    ]
    ordering = clvr_slippage_aware(pool, trades)
    assert ordering.sequence[0] == "b"
    assert ordering.failed == {"c"} and ordering.sequence[-1] == "c"
    trace = execute_block(pool, trades, ordering, enforce_slippage=True)
    assert trace.failures == 1


def test_clvr_slippage_aware_never_worse_than_random_in_failures():
    pool = Pool(2e6, 2e6)
    for seed in range(60):
        trades = assign_slippage(pool, random_block(seed, 10))
        f_clvr = execute_block(pool, trades, clvr_slippage_aware(pool, trades), enforce_slippage=True).failures
        f_rand = execute_block(pool, trades, random_ordering(trades, seed), enforce_slippage=True).failures
        assert f_clvr <= f_rand


def test_sequencer_kind():
    pool = Pool(2e6, 2e6)
    trades = random_block(1, 5)
    assert SequencerKind("clvr").order(pool, trades) == clvr(pool, trades)
    with pytest.raises(ValueError):
        SequencerKind("fastest")
    with pytest.raises(ValueError):
        SequencerKind("clvr", metric="sharpe")
