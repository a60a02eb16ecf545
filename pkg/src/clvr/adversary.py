"""Three-transaction sandwich attacks and an executable check that CLVR defeats them.

The attacker's front-run trades in the victim's direction and the back-run
trades back. Profit is measured in the token the front-run pays in; the
attack is risk-free when the back-run spends no more of the intermediate
token than the front-run received.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from clvr.amm import Ordering, Pool, Side, Trade, execute_block, execute_trade
from clvr.sequencers import clvr

FRONT = "front"
VICTIM = "victim"
BACK = "back"
ATTACK_ORDER = (FRONT, VICTIM, BACK)


@dataclass(frozen=True)
class SandwichScenario:
    pool: Pool
    victim: Trade
    front_run_amount: float
    back_run_amount: float

    def __post_init__(self) -> None:
        if not (self.front_run_amount > 0 and self.back_run_amount > 0):
            raise ValueError("front- and back-run amounts must be positive")
        if self.victim.id != VICTIM:
            object.__setattr__(self, "victim", Trade(VICTIM, self.victim.side, self.victim.amount_in))

    @property
    def front(self) -> Trade:
        return Trade(FRONT, self.victim.side, self.front_run_amount)

    @property
    def back(self) -> Trade:
        opposite = Side.BUY if self.victim.side is Side.SELL else Side.SELL
        return Trade(BACK, opposite, self.back_run_amount)

    @property
    def trades(self) -> list[Trade]:
        return [self.front, self.victim, self.back]


@dataclass(frozen=True)
class SandwichOutcome:
    profit: float  # back-run proceeds minus front-run payment, in the front-run's input token
    risk_free: bool

    @property
    def profitable_risk_free(self) -> bool:
        return self.risk_free and self.profit > 0


def evaluate_sandwich(scenario: SandwichScenario, ordering: Ordering | Iterable[str] = ATTACK_ORDER) -> SandwichOutcome:
    """Execute the three trades in ``ordering`` and score the attacker's position."""
    trace = execute_block(scenario.pool, scenario.trades, ordering)
    out = trace.outputs
    profit = out[BACK] - scenario.front_run_amount
    return SandwichOutcome(profit, scenario.back_run_amount <= out[FRONT])


def first_step_prices(scenario: SandwichScenario) -> tuple[float, float, float]:
    """``(p0, p_f, p_b)``: opening price and prices after running front or back alone."""
    p_f = execute_trade(scenario.pool, scenario.front)[0].price
    p_b = execute_trade(scenario.pool, scenario.back)[0].price
    return scenario.pool.price, p_f, p_b


def clvr_blocks_sandwich(scenario: SandwichScenario) -> bool:
    """True unless CLVR both runs the trades in attack order and the attack pays risk-free."""
    ordering = clvr(scenario.pool, scenario.trades)
    if ordering.sequence != ATTACK_ORDER:
        return True
    return not evaluate_sandwich(scenario, ordering).profitable_risk_free


def price_product_holds(scenario: SandwichScenario) -> bool:
    """When CLVR runs the front-run before the back-run, ``p0**2 <= p_b * p_f``.

    For a buying victim the prices mirror and the inequality flips. Checked
    in log space with a few ulps of slack; vacuously true otherwise.
    """
    seq = clvr(scenario.pool, scenario.trades).sequence
    if seq.index(FRONT) > seq.index(BACK):
        return True
    p0, p_f, p_b = first_step_prices(scenario)
    lhs = 2.0 * math.log(p0)
    rhs = math.log(p_b) + math.log(p_f)
    slack = 8 * math.ulp(max(abs(lhs), abs(rhs), 1.0))
    if scenario.victim.side is Side.SELL:
        return lhs <= rhs + slack
    return rhs <= lhs + slack


def random_scenario(rng: np.random.Generator, victim_side: Side | None = None, risk_free: bool = True) -> SandwichScenario:
    """Draw a scenario on a pool with reserves in [100, 1e7].

    With ``risk_free`` the back-run spends a random fraction of what the
    front-run receives when run first, so the attack, if ordered, never
    loses the intermediate token.
    """
    side = victim_side or (Side.SELL if rng.random() < 0.5 else Side.BUY)
    x = 10 ** rng.uniform(2, 7)
    y = 10 ** rng.uniform(2, 7)
    pool = Pool(x, y)
    paid_reserve = x if side is Side.SELL else y
    front = paid_reserve * 10 ** rng.uniform(-4, 0)
    victim = Trade(VICTIM, side, paid_reserve * 10 ** rng.uniform(-4, 0))
    proceeds = execute_trade(pool, Trade(FRONT, side, front))[1]
    if risk_free:
        back = proceeds * rng.uniform(0.01, 1.0)
    else:
        back = proceeds * 10 ** rng.uniform(-2, 2)
    return SandwichScenario(pool, victim, front, back)


def sandwich_sweep(trials: int, seed: int = 0) -> dict:
    """Count attack orderings CLVR emits over seeded scenarios; ``violations`` must be 0."""
    rng = np.random.default_rng(seed)
    violations = 0
    profitable_if_ordered = 0
    for k in range(trials):
        sc = random_scenario(rng, risk_free=k % 4 != 3)
        profitable_if_ordered += evaluate_sandwich(sc).profitable_risk_free
        if not clvr_blocks_sandwich(sc):
            violations += 1
    return {
        "experiment": "sandwich",
        "config": {"trials": trials, "seed": seed},
        "trials": trials,
        "violations": violations,
        "profitable_in_attack_order": profitable_if_ordered,
    }
