"""Regenerate the bundled replay fixture and its oracle values.

The oracle re-implements the swap and volatility arithmetic with numpy and
enumerates every ordering of each block with itertools, so it shares no code
with the library's execution path. The library is used only to choose a
stream on which CLVR attains the per-block optimum, which makes the replay's
CLVR reduction equal to the oracle's optimal reduction.

    python scripts/make_replay_fixture.py
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

RESERVES = 2_000_000.0
BLOCKS = 3
PER_BLOCK = 10
OUT = Path(__file__).resolve().parents[1] / "src" / "clvr" / "data"


def block_volatilities(x0, y0, sells, amounts, perms):
    """Volatility and closing reserves of every ordering (rows of ``perms``)."""
    x = np.full(len(perms), x0)
    y = np.full(len(perms), y0)
    lp0 = np.log(y0 / x0)
    acc = np.zeros(len(perms))
    for col in perms.T:
        a = amounts[col]
        s = sells[col]
        out_y = a * y / (x + a)
        out_x = a * x / (y + a)
        x, y = np.where(s, x + a, x - out_x), np.where(s, y - out_y, y + a)
        acc += (lp0 - np.log(y / x)) ** 2
    return acc / perms.shape[1], x, y


def oracle(rows):
    perms = np.array(list(itertools.permutations(range(PER_BLOCK))), dtype=np.int64)
    observed = np.arange(PER_BLOCK)[None, :]
    obs_pool = opt_pool = (RESERVES, RESERVES)
    obs_vols, opt_vols = [], []
    for b in range(BLOCKS):
        blk = rows[b * PER_BLOCK : (b + 1) * PER_BLOCK]
        sells = np.array([r[1] == "sell" for r in blk])
        amounts = np.array([r[2] for r in blk])
        v, x, y = block_volatilities(*obs_pool, sells, amounts, observed)
        obs_vols.append(float(v[0]))
        obs_pool = (float(x[0]), float(y[0]))
        v, x, y = block_volatilities(*opt_pool, sells, amounts, perms)
        k = int(np.argmin(v))
        opt_vols.append(float(v[k]))
        opt_pool = (float(x[k]), float(y[k]))
    reduction = 100.0 * (1.0 - sum(opt_vols) / sum(obs_vols))
    return obs_vols, opt_vols, reduction


def candidate(seed):
    rng = np.random.default_rng(seed)
    rows = []
    t = 1_718_755_200  # 2024-06-19 00:00:00 UTC
    for b in range(BLOCKS):
        for _ in range(PER_BLOCK):
            side = "buy" if rng.random() < 0.5 else "sell"
            size = round(float(np.exp(4.93 + 2.05 * rng.standard_normal())), 6)
            rows.append((20_150_000 + b, side, size, t))
        t += 12
    return rows


def to_csv(rows):
    lines = ["block,direction,amount_in,timestamp"]
    lines += [f"{b},{d},{a!r},{t}" for b, d, a, t in rows]
    return "\n".join(lines) + "\n"


def main():
    from clvr.replay import parse_swaps, replay_empirical

    for seed in range(100):
        rows = candidate(seed)
        obs, opt, reduction = oracle(rows)
        report = replay_empirical(parse_swaps(to_csv(rows)), relative=False)
        if abs(report["reduction_pct"]["clvr"] - reduction) < 1e-9 and reduction > 0:
            break
    else:
        raise SystemExit("no seed in range gives a CLVR-optimal fixture")
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "replay_fixture.csv").write_text(to_csv(rows), encoding="utf-8")
    meta = {
        "generator_seed": seed,
        "reserves": RESERVES,
        "grouping": "native",
        "observed_block_volatility": obs,
        "optimal_block_volatility": opt,
        "optimal_reduction_pct": reduction,
    }
    (OUT / "replay_fixture_oracle.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"seed {seed}: reduction {reduction:.12f}%")


if __name__ == "__main__":
    main()
