import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clvr.amm import Pool, Side, Trade, execute_block
from clvr.errors import UndefinedMetricError
from clvr.metrics import gini, gini_of, log_deviations, relative_score, volatility, volatility_is_quote_invariant, wealth

from conftest import naive_volatility, random_block


def mean_abs_difference_gini(w):
    """Independent oracle: G = sum_ij |wi - wj| / (2 n^2 mean)."""
    w = np.asarray(w, dtype=float)
    return float(np.abs(w[:, None] - w[None, :]).sum() / (2 * len(w) ** 2 * w.mean()))


@pytest.mark.parametrize(
    "order, expected",
    [(("beta", "gamma", "alpha"), 7.9e-3), (("alpha", "beta", "gamma"), 8.2e-3)],
)
def test_counterexample_volatilities(pool100, greedy_trap, order, expected):
    v = volatility(execute_block(pool100, greedy_trap, order)).volatility
    assert abs(v - expected) <= 0.05e-3


def test_matches_naive_oracle(pool100, greedy_trap):
    for perm in itertools.permutations(greedy_trap):
        got = volatility(execute_block(pool100, greedy_trap, [t.id for t in perm])).volatility
        assert got == pytest.approx(naive_volatility(100.0, 100.0, perm), rel=1e-12)


def test_report_fields(pool100, greedy_trap):
    r = volatility(execute_block(pool100, greedy_trap))
    assert r.n == 3 and r.status_quo_price == 1.0


def test_empty_block_is_undefined(pool100):
    with pytest.raises(UndefinedMetricError):
        volatility(execute_block(pool100, []))


def test_volatility_vanishes_quadratically(pool100):
    def vol(a):
        trades = [Trade(f"t{i}", Side.SELL if i % 2 else Side.BUY, a) for i in range(6)]
        return volatility(execute_block(pool100, trades)).volatility

    assert vol(1e-9) < 1e-20
    assert vol(1e-9) / vol(1e-6) == pytest.approx(1e-6, rel=1e-3)


def test_failed_steps_repeat_previous_price(pool100):
    trades = [Trade("a", Side.SELL, 50), Trade("b", Side.SELL, 10, min_amount_out=9.0)]
    trace = execute_block(pool100, trades, enforce_slippage=True)
    d = log_deviations(trace)
    assert d[0] == d[1]
    assert volatility(trace).volatility == pytest.approx(d[0] ** 2)


def test_worked_block_quote_invariant(pool100):
    trades = [Trade("s1", Side.SELL, 10), Trade("s2", Side.SELL, 10), Trade("b1", Side.BUY, 10), Trade("b2", Side.BUY, 10)]
    trace = execute_block(pool100, trades, ["s1", "b1", "s2", "b2"])
    assert volatility_is_quote_invariant(trace)


def test_single_trade_quote_invariant_exactly(pool100):
    trace = execute_block(pool100, [Trade("t", Side.BUY, 3.0)])
    assert volatility(trace, "y_per_x").volatility == volatility(trace, "x_per_y").volatility


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.floats(1e2, 1e8), st.floats(0.1, 10))
def test_quote_invariance_random_blocks(seed, n, r, ratio):
    trades = random_block(seed, n)
    trace = execute_block(Pool(r, r * ratio), trades)
    assert volatility_is_quote_invariant(trace)


def test_unknown_quote():
    with pytest.raises(ValueError):
        log_deviations(execute_block(Pool(1, 1), [Trade("t", Side.SELL, 1)]), "eur")


# -- Gini ------------------------------------------------------------------


def test_gini_equal_and_concentrated():
    assert gini_of([5, 5, 5, 5]) == pytest.approx(0.0, abs=1e-15)
    assert gini_of([0, 0, 0, 7]) == pytest.approx(3 / 4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30).filter(lambda w: sum(w) > 0))
def test_gini_bounds_and_oracle(w):
    g = gini_of(w)
    n = len(w)
    assert -1e-12 <= g <= (n - 1) / n + 1e-12
    assert g == pytest.approx(mean_abs_difference_gini(w), abs=1e-9)


def test_gini_undefined():
    with pytest.raises(UndefinedMetricError):
        gini_of([])
    with pytest.raises(UndefinedMetricError):
        gini_of([0.0, 0.0])
    with pytest.raises(ValueError):
        gini_of([1.0, -1.0])


def test_wealth_values_buys_at_opening_price():
    pool = Pool(100.0, 200.0)
    trace = execute_block(pool, [Trade("s", Side.SELL, 10), Trade("b", Side.BUY, 10)])
    w = wealth(trace)
    assert w[0] == trace.outputs["s"]
    assert w[1] == trace.outputs["b"] * 2.0


def test_failed_trade_has_zero_wealth(pool100):
    trades = [Trade("a", Side.SELL, 50), Trade("b", Side.SELL, 10, min_amount_out=9.0)]
    trace = execute_block(pool100, trades, enforce_slippage=True)
    assert wealth(trace)[1] == 0.0
    assert gini(trace) == pytest.approx(0.5)


# -- relative score --------------------------------------------------------


def test_relative_score_anchors():
    vals = [3.0, 1.0, 2.0]
    assert relative_score(1.0, vals).value_pct == 0.0
    assert relative_score(3.0, vals).value_pct == 100.0
    assert relative_score(2.5, vals).value_pct == pytest.approx(75.0)


def test_relative_score_degenerate():
    assert relative_score(4.0, [4.0, 4.0]).value_pct == 0.0
    with pytest.raises(ValueError):
        relative_score(1.0, [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.integers(0, 19))
def test_relative_score_in_range(vals, k):
    r = relative_score(vals[k % len(vals)], vals).value_pct
    assert 0.0 <= r <= 100.0 and not math.isnan(r)
