"""Command-line entry point: ``clvr sequence | verify | experiment | replay``.

Exit codes: 0 success, 1 verified ordering is non-compliant, 2 invalid
input, 3 I/O failure, 4 block too large for exhaustive search.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field, fields
from pathlib import Path

from clvr import experiments as ex
from clvr.adversary import sandwich_sweep
from clvr.amm import Pool, Side, Trade, execute_block
from clvr.errors import ClvrError, IngestionError, InvalidOrderingError, TractabilityError, UndefinedMetricError
from clvr.metrics import volatility
from clvr.replay import bundled_fixture, read_swaps, replay_empirical
from clvr.reports import render, to_csv
from clvr.sequencers import DEFAULT_FACTORIAL_CAP, RULES, order_trades
from clvr.workload import DEFAULT_MU, DEFAULT_RESERVES, DEFAULT_SIGMA, LogNormal, Uniform

EXIT_OK = 0
EXIT_NONCOMPLIANT = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_TRACTABILITY = 4

EXPERIMENTS = ("compare", "failure_rates", "block_size", "splitting", "objective_conflict", "sandwich")


# --------------------------------------------------------------------------
# trade list files


def parse_trades(text: str) -> list[Trade]:
    """Parse ``id,direction,amount_in[,min_amount_out]`` CSV with a header row."""
    reader = csv.reader(io.StringIO(text))
    rows = [(reader.line_num, row) for row in reader]
    rows = [(n, r) for n, r in rows if r and any(c.strip() for c in r)]
    if not rows:
        return []
    header = [h.strip() for h in rows[0][1]]
    if header[:3] != ["id", "direction", "amount_in"] or header[3:] not in ([], ["min_amount_out"]):
        raise IngestionError("expected header id,direction,amount_in[,min_amount_out]", rows[0][0])
    trades: list[Trade] = []
    seen: set[str] = set()
    for line, row in rows[1:]:
        if len(row) not in (3, 4):
            raise IngestionError(f"expected 3 or 4 fields, got {len(row)}", line)
        tid = row[0].strip()
        if not tid or tid in seen:
            raise IngestionError(f"missing or duplicate trade id {tid!r}", line)
        seen.add(tid)
        try:
            floor = float(row[3]) if len(row) == 4 and row[3].strip() else None
            trades.append(Trade(tid, Side.parse(row[1]), float(row[2]), floor))
        except ValueError as exc:
            raise IngestionError(str(exc), line) from None
    return trades


def parse_inline(text: str) -> list[Trade]:
    """``id:side:amount[:min_out]`` items separated by commas."""
    trades = []
    for pos, item in enumerate(filter(None, (s.strip() for s in text.split(","))), start=1):
        parts = item.split(":")
        if len(parts) not in (3, 4):
            raise IngestionError(f"inline trade {item!r} must be id:side:amount[:min_out]", pos)
        try:
            floor = float(parts[3]) if len(parts) == 4 else None
            trades.append(Trade(parts[0], Side.parse(parts[1]), float(parts[2]), floor))
        except ValueError as exc:
            raise IngestionError(str(exc), pos) from None
    if len({t.id for t in trades}) != len(trades):
        raise IngestionError("duplicate trade id in inline list")
    return trades


def _load_trades(args: argparse.Namespace) -> list[Trade]:
    if args.trades and args.inline:
        raise ValueError("give either --trades or --inline, not both")
    if args.inline is not None:
        return parse_inline(args.inline)
    if args.trades is None or args.trades == "-":
        return parse_trades(sys.stdin.read())
    return parse_trades(Path(args.trades).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    experiment: str = "compare"
    reserve_x: float = DEFAULT_RESERVES
    reserve_y: float = DEFAULT_RESERVES
    fee: float = 0.0
    distribution: str = "lognormal"
    mu: float = DEFAULT_MU
    sigma: float = DEFAULT_SIGMA
    lo: float = 0.0
    hi: float = 100_000.0
    sequencers: list[str] = field(default_factory=lambda: ["clvr", "vhgsr"])
    n: list[int] | None = None
    trials: int | None = None
    seed: int = 0
    threads: int = 1
    cap: int = DEFAULT_FACTORIAL_CAP
    tolerance: float = 0.005
    total_trades: int = 100
    mode: str = "one_splits"
    sizes: list[float] | None = None
    split_factors: list[int] | None = None
    rule: str = "clvr"
    status_quo: str = "block"
    include_trials: bool = False
    out: str | None = None
    csv_out: str | None = None
    format: str = "text"

    @classmethod
    def from_sources(cls, file_values: dict, overrides: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(file_values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged = {**file_values, **{k: v for k, v in overrides.items() if k in known and v is not None}}
        cfg = cls(**merged)
        if cfg.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        return cfg

    @property
    def pool(self) -> Pool:
        return Pool(self.reserve_x, self.reserve_y, self.fee)

    @property
    def size_distribution(self) -> LogNormal | Uniform:
        if self.distribution == "lognormal":
            return LogNormal(self.mu, self.sigma)
        if self.distribution == "uniform":
            return Uniform(self.lo, self.hi)
        raise ValueError(f"unknown distribution {self.distribution!r}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise ValueError("config must be a flat JSON object")
    return data


def run_experiment(cfg: RunConfig) -> dict:
    common = dict(pool=cfg.pool, size_distribution=cfg.size_distribution, seed=cfg.seed, threads=cfg.threads)
    name = cfg.experiment
    if name == "compare":
        return ex.compare_sequencers(
            cfg.n or [2, 5, 10], cfg.trials or 100, sequencers=cfg.sequencers, cap=cfg.cap,
            include_trials=cfg.include_trials, **common,
        )
    if name == "failure_rates":
        return ex.failure_rate_experiment(cfg.n or [3, 5, 8, 10, 15, 25, 50, 100], cfg.trials or 1000, tolerance=cfg.tolerance, **common)
    if name == "block_size":
        return ex.block_size_sweep(
            cfg.n or [1, 2, 5, 10, 20, 25, 50, 100], cfg.trials or 1000, total_trades=cfg.total_trades, rule=cfg.rule,
            status_quo=cfg.status_quo, **common
        )
    if name == "splitting":
        kwargs = {}
        if cfg.sizes:
            kwargs["sizes"] = cfg.sizes
        if cfg.split_factors:
            kwargs["split_factors"] = cfg.split_factors
        return ex.splitting_experiment(cfg.mode, trials=cfg.trials or 1000, **kwargs, **common)
    if name == "objective_conflict":
        return ex.objective_conflict(cfg.n or [3, 5, 10], cfg.trials or 100, cap=cfg.cap, **common)
    return sandwich_sweep(cfg.trials or 10_000, cfg.seed)


# --------------------------------------------------------------------------
# subcommands


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_sequence(args: argparse.Namespace) -> int:
    trades = _load_trades(args)
    pool = Pool(args.reserve_x, args.reserve_y, args.fee)
    ordering = order_trades(args.rule, pool, trades, seed=args.seed, metric=args.metric, cap=args.cap)
    trace = execute_block(pool, trades, ordering, enforce_slippage=args.enforce_slippage)
    vol = volatility(trace).volatility if trace.steps else None
    payload = {
        "rule": args.rule,
        "ordering": list(ordering.sequence),
        "initial_price": pool.price,
        "steps": [
            {"trade_id": s.trade_id, "side": s.side.value, "amount_out": s.amount_out,
             "price_after": s.price_after, "failed": s.failed}
            for s in trace.steps
        ],
        "volatility": vol,
    }
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = [f"rule: {args.rule}", f"ordering: {' '.join(ordering.sequence) or '(empty)'}", f"p0: {pool.price:.10g}"]
        lines += [
            f"{i:>4}  {s.trade_id:<12} {s.side.value:<4} out={s.amount_out:<22.12g} price={s.price_after:<22.12g}"
            + (" FAILED" if s.failed else "")
            for i, s in enumerate(trace.steps, start=1)
        ]
        lines.append(f"volatility: {vol:.6e}" if vol is not None else "volatility: undefined (empty block)")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    trades = _load_trades(args)
    claim = [c.strip() for c in args.claim.split(",") if c.strip()]
    ids = [t.id for t in trades]
    if sorted(claim) != sorted(ids):
        raise InvalidOrderingError("claimed ordering is not a permutation of the trade list")
    pool = Pool(args.reserve_x, args.reserve_y, args.fee)
    expected = order_trades(args.rule, pool, trades, seed=args.seed, metric=args.metric, cap=args.cap).sequence
    deviation = next((i for i, (a, b) in enumerate(zip(claim, expected)) if a != b), None)
    payload = {
        "rule": args.rule,
        "compliant": deviation is None,
        "first_deviation_step": None if deviation is None else deviation + 1,
        "expected": list(expected),
        "claimed": claim,
    }
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    elif deviation is None:
        text = f"compliant with {args.rule}\n"
    else:
        text = (
            f"NOT compliant with {args.rule}: first deviation at step {deviation + 1} "
            f"(claimed {claim[deviation]}, rule picks {expected[deviation]})\n"
        )
    _emit(text, args.out)
    return EXIT_OK if deviation is None else EXIT_NONCOMPLIANT


def cmd_experiment(args: argparse.Namespace) -> int:
    overrides = {k: v for k, v in vars(args).items() if k not in ("func", "config", "command")}
    cfg = RunConfig.from_sources(load_config(args.config), overrides)
    report = run_experiment(cfg)
    _write_report(report, cfg.format, cfg.out, cfg.csv_out)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    if args.fixture:
        swaps, _ = bundled_fixture()
    elif args.swaps:
        swaps = read_swaps(args.swaps)
    else:
        raise ValueError("give --swaps FILE or --fixture")
    grouping = args.grouping if args.grouping == "native" else int(args.grouping)
    report = replay_empirical(
        swaps, reserves=args.reserves, grouping=grouping, sequencers=args.sequencers,
        relative=not args.no_relative, cap=args.cap,
    )
    _write_report(report, args.format, args.out, args.csv_out)
    return EXIT_OK


def _write_report(report: dict, fmt: str, out: str | None, csv_out: str | None) -> None:
    text = render(report, fmt)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        if fmt != "text":
            sys.stdout.write(render(report, "text"))
    else:
        sys.stdout.write(text)
    if csv_out:
        Path(csv_out).write_text(to_csv(report), encoding="utf-8")


# --------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clvr", description="Transaction ordering for constant-product AMMs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def pool_args(p: argparse.ArgumentParser, reserves: float) -> None:
        p.add_argument("--reserve-x", type=float, default=reserves)
        p.add_argument("--reserve-y", type=float, default=reserves)
        p.add_argument("--fee", type=float, default=0.0)

    def trade_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--trades", help="CSV file id,direction,amount_in[,min_amount_out] ('-' for stdin)")
        p.add_argument("--inline", help="comma-separated id:side:amount[:min_out] items")
        p.add_argument("--rule", choices=RULES, default="clvr")
        p.add_argument("--metric", choices=("volatility", "gini"), default="volatility")
        p.add_argument("--cap", type=int, default=DEFAULT_FACTORIAL_CAP)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--out")
        pool_args(p, 100.0)

    p = sub.add_parser("sequence", help="order a trade list and print the execution trace")
    trade_args(p)
    p.add_argument("--enforce-slippage", action="store_true")
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("verify", help="check a claimed ordering against a rule")
    trade_args(p)
    p.add_argument("--claim", required=True, help="comma-separated trade ids in claimed order")
    p.set_defaults(func=cmd_verify)

    # experiment flags default to None so config-file values survive
    p = sub.add_parser("experiment", help="run one experiment of the suite")
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat JSON object of RunConfig fields; flags override it")
    p.add_argument("--n", type=_int_list, help="block sizes, e.g. 2,5,10")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes, 0 = one per CPU")
    p.add_argument("--reserve-x", dest="reserve_x", type=float)
    p.add_argument("--reserve-y", dest="reserve_y", type=float)
    p.add_argument("--fee", type=float)
    p.add_argument("--distribution", choices=("lognormal", "uniform"))
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--sequencers", type=_str_list)
    p.add_argument("--cap", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--total-trades", dest="total_trades", type=int)
    p.add_argument("--rule", choices=RULES)
    p.add_argument("--status-quo", dest="status_quo", choices=("block", "stream"),
                   help="block_size: measure each block against its own or the stream's opening price")
    p.add_argument("--mode", choices=("one_splits", "all_split"))
    p.add_argument("--sizes", type=_float_list)
    p.add_argument("--split-factors", dest="split_factors", type=_int_list)
    p.add_argument("--include-trials", dest="include_trials", action="store_true", default=None)
    p.add_argument("--format", choices=("text", "json", "csv"))
    p.add_argument("--out")
    p.add_argument("--csv-out", dest="csv_out", help="also write plot-ready CSV here")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("replay", help="replay a recorded swap stream under each rule")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--swaps", help="CSV block,direction,amount_in,timestamp")
    src.add_argument("--fixture", action="store_true", help="use the bundled 30-swap fixture")
    p.add_argument("--reserves", type=float, default=DEFAULT_RESERVES)
    p.add_argument("--grouping", default="native", help="'native' or a chunk size")
    p.add_argument("--sequencers", type=_str_list, default=["vhgsr", "clvr"])
    p.add_argument("--no-relative", action="store_true", help="skip exhaustive-search relative scores")
    p.add_argument("--cap", type=int, default=DEFAULT_FACTORIAL_CAP)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out")
    p.add_argument("--csv-out", dest="csv_out")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TractabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACTABILITY
    except (IngestionError, InvalidOrderingError, UndefinedMetricError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ClvrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
