import itertools
import math

import numpy as np
import pytest

from clvr.amm import Pool, Side, Trade
from clvr.workload import LogNormal, WorkloadSpec, generate_block, trial_rng


@pytest.fixture
def pool100():
    return Pool(100.0, 100.0)


@pytest.fixture
def greedy_trap():
    return [Trade("alpha", Side.SELL, 2.0), Trade("beta", Side.SELL, 5.0), Trade("gamma", Side.BUY, 10.0)]


def random_block(seed, n, *keys, dist=None):
    return generate_block(WorkloadSpec(n, dist or LogNormal()), trial_rng(seed, 99, n, *keys))


def naive_volatility(x, y, trades):
    """Independent CPMM + volatility, fee-free, using numpy logs."""
    lp0 = np.log(y / x)
    acc = []
    for t in trades:
        if t.side is Side.SELL:
            out = t.amount_in * y / (x + t.amount_in)
            x, y = x + t.amount_in, y - out
        else:
            out = t.amount_in * x / (y + t.amount_in)
            x, y = x - out, y + t.amount_in
        acc.append((lp0 - np.log(y / x)) ** 2)
    return float(np.mean(acc))


def all_volatilities(pool, trades):
    """{ordering ids: volatility} over every permutation, via the naive oracle."""
    return {
        tuple(t.id for t in perm): naive_volatility(pool.reserve_x, pool.reserve_y, perm)
        for perm in itertools.permutations(trades)
    }


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-300)
