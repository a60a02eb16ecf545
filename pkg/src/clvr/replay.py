"""Replay of recorded swap streams under alternative ordering rules.

Each rule runs in its own counterfactual world: the pool a block opens on
is whatever that rule's previous blocks left behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

from clvr.amm import Pool, Side, Trade, execute_block
from clvr.errors import IngestionError
from clvr.experiments import _pick_winner
from clvr.metrics import relative_score, volatility
from clvr.sequencers import DEFAULT_FACTORIAL_CAP, exhaustive_search, order_trades
from clvr.stats import paired_t_test
from clvr.workload import DEFAULT_RESERVES

SWAP_HEADER = ("block", "direction", "amount_in", "timestamp")
OBSERVED = "current"


@dataclass(frozen=True)
class SwapRecord:
    block_number: int
    side: Side
    amount_in: float
    timestamp: int


def parse_swaps(text: str | Iterable[str]) -> list[SwapRecord]:
    """Parse ``block,direction,amount_in,timestamp`` CSV; errors carry the 1-based line number."""
    lines = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError("empty swap file: missing header", 1) from None
    if tuple(h.strip() for h in header) != SWAP_HEADER:
        raise IngestionError(f"expected header {','.join(SWAP_HEADER)}, got {','.join(header)}", 1)
    records: list[SwapRecord] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise IngestionError(f"expected 4 fields, got {len(row)}", line)
        try:
            block = int(row[0])
            side = Side.parse(row[1])
            amount = float(row[2])
            timestamp = int(row[3])
        except ValueError as exc:
            raise IngestionError(str(exc), line) from None
        if not (amount > 0 and math.isfinite(amount)):
            raise IngestionError(f"amount_in must be positive, got {row[2]}", line)
        if records and block < records[-1].block_number:
            raise IngestionError(f"block {block} out of order after {records[-1].block_number}", line)
        records.append(SwapRecord(block, side, amount, timestamp))
    return records


def read_swaps(path: str | Path) -> list[SwapRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_swaps(fh)


def bundled_fixture() -> tuple[list[SwapRecord], dict]:
    """The packaged 30-swap stream and its independently computed expectations."""
    data = resources.files("clvr") / "data"
    swaps = parse_swaps((data / "replay_fixture.csv").read_text(encoding="utf-8"))
    oracle = json.loads((data / "replay_fixture_oracle.json").read_text(encoding="utf-8"))
    return swaps, oracle


def group_blocks(swaps: Sequence[SwapRecord], grouping: str | int = "native") -> list[list[Trade]]:
    """Split the stream into blocks of trades, preserving observed order.

    ``grouping`` is ``"native"`` (one block per block number) or a chunk
    size. Trade ids are zero-padded stream positions, so id order is
    observed order.
    """
    width = max(1, len(str(len(swaps) - 1)))
    trades = [Trade(f"s{i:0{width}d}", s.side, s.amount_in) for i, s in enumerate(swaps)]
    if grouping == "native":
        blocks: list[list[Trade]] = []
        last = None
        for rec, trade in zip(swaps, trades):
            if rec.block_number != last:
                blocks.append([])
                last = rec.block_number
            blocks[-1].append(trade)
        return blocks
    size = int(grouping)
    if size < 1:
        raise ValueError("chunk size must be >= 1")
    return [trades[i : i + size] for i in range(0, len(trades), size)]


def replay_empirical(
    swaps: Sequence[SwapRecord],
    *,
    reserves: float = DEFAULT_RESERVES,
    grouping: str | int = "native",
    sequencers: Sequence[str] = ("vhgsr", "clvr"),
    relative: bool = True,
    cap: int = DEFAULT_FACTORIAL_CAP,
) -> dict:
    """Volatility of the observed order against each rule, block by block.

    Reports per-block volatilities, winner counts and mean relative
    volatility grouped by swap count (relative scores only for blocks of at
    most ``cap`` swaps, when ``relative``), and the overall % reduction of
    summed block volatility versus the observed order. The p-value tests
    whether the last rule beats the first.
    """
    rules = [r for r in sequencers if r != OBSERVED]
    worlds = [OBSERVED, *rules]
    pools = {w: Pool(reserves, reserves) for w in worlds}
    totals = {w: 0.0 for w in worlds}
    block_rows = []
    by_count: dict[int, list[dict]] = {}
    for index, block in enumerate(group_blocks(swaps, grouping)):
        vols: dict[str, float] = {}
        rel: dict[str, float] = {}
        for world in worlds:
            pool = pools[world]
            ordering = order_trades("fcfs" if world == OBSERVED else world, pool, block)
            trace = execute_block(pool, block, ordering)
            vols[world] = volatility(trace).volatility
            if relative and len(block) <= cap:
                search = exhaustive_search(pool, block, cap=cap)
                rel[world] = relative_score(
                    vols[world], [search.volatility_min[1], search.volatility_max[1]]
                ).value_pct
            pools[world] = trace.final_pool
            totals[world] += vols[world]
        row = {"block": index, "size": len(block), "volatility": vols, "relative_volatility": rel or None}
        block_rows.append(row)
        by_count.setdefault(len(block), []).append(row)

    summary = []
    for count in sorted(by_count):
        rows = by_count[count]
        entry = {"swap_count": count, "blocks": len(rows)}
        if rules:
            winners = [_pick_winner({r: row["volatility"][r] for r in rules}) for row in rows]
            entry["wins"] = {r: sum(w == r for w in winners) for r in rules}
            entry["ties"] = sum(w is None for w in winners)
        if relative and count <= cap:
            entry["mean_relative_volatility"] = {
                w: math.fsum(row["relative_volatility"][w] for row in rows) / len(rows) for w in worlds
            }
        if len(rules) >= 2 and len(rows) >= 2:
            diffs = [row["volatility"][rules[-1]] - row["volatility"][rules[0]] for row in rows]
            entry["p_value"] = paired_t_test(diffs, "less")
        summary.append(entry)

    observed = totals[OBSERVED]
    reduction = {r: (100.0 * (1.0 - totals[r] / observed) if observed > 0 else 0.0) for r in rules}
    return {
        "experiment": "replay",
        "config": {
            "swaps": len(swaps),
            "reserves": reserves,
            "grouping": grouping,
            "sequencers": rules,
            "relative": relative,
            "cap": cap,
        },
        "total_volatility": totals,
        "reduction_pct": reduction,
        "by_swap_count": summary,
        "blocks": block_rows,
        "final_pools": {w: asdict(p) for w, p in pools.items()},
    }
