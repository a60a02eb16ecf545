"""Render experiment reports as JSON, aligned text, or plot-ready CSV."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence


def to_json(report: dict) -> str:
    # sorted keys and repr floats keep reruns byte-identical
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if value == 0.0:
            return "0"
        if abs(value) >= 1e4 or abs(value) < 1e-3:
            return f"{value:.3e}"
        return f"{value:.4f}"
    return str(value)


def table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in headers]] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _flatten(row: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in row.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _rows(report: dict) -> list[dict]:
    if report["experiment"] == "replay":
        return report["by_swap_count"]
    return report.get("rows", [])


def to_csv(report: dict) -> str:
    rows = [_flatten(r) for r in _rows(report)]
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(dict.fromkeys(k for r in rows for k in r))
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def to_text(report: dict) -> str:
    kind = report["experiment"]
    rows = _rows(report)
    title = f"== {kind} (seed {report['config'].get('seed', '-')}) =="
    if kind == "compare":
        seqs = report["config"]["sequencers"]
        headers = ["n", *[f"wins:{s}" for s in seqs], "ties", *[f"relvol:{s}" for s in seqs], "p"]
        body = [
            [
                r["n"],
                *[r["wins"][s] for s in seqs],
                r["ties"],
                *[(r["mean_relative_volatility"] or {}).get(s) for s in seqs],
                r["p_value"],
            ]
            for r in rows
        ]
    elif kind == "failure_rates":
        headers = ["n", "random%", "vhgsr%", "clvr%", "reduction%"]
        body = [
            [r["n"], r["failure_rate_pct"]["random"], r["failure_rate_pct"]["vhgsr"], r["failure_rate_pct"]["clvr"], r["reduction_pct"]]
            for r in rows
        ]
    elif kind == "block_size":
        headers = ["block_size", "blocks", "p25", "median", "p75"]
        body = [[r["block_size"], r["blocks"], r["p25"], r["median"], r["p75"]] for r in rows]
    elif kind == "splitting":
        headers = ["size", "split_factor", "mean_gain%"]
        body = [[r["size"], r["split_factor"], r["mean_gain_pct"]] for r in rows]
    elif kind == "objective_conflict":
        headers = ["n", "gini|vol-min", "gini|vol-max", "vol|gini-min", "vol|gini-max"]
        body = [
            [r["n"], r["relative_gini_vol_min"], r["relative_gini_vol_max"], r["relative_vol_gini_min"], r["relative_vol_gini_max"]]
            for r in rows
        ]
    elif kind == "replay":
        rules = report["config"]["sequencers"]
        headers = ["swaps", "blocks", *[f"wins:{s}" for s in rules], "ties", *[f"relvol:{w}" for w in ["current", *rules]], "p"]
        body = [
            [
                r["swap_count"],
                r["blocks"],
                *[r.get("wins", {}).get(s) for s in rules],
                r.get("ties"),
                *[r.get("mean_relative_volatility", {}).get(w) for w in ["current", *rules]],
                r.get("p_value"),
            ]
            for r in rows
        ]
        reductions = ", ".join(f"{k} {v:.2f}%" for k, v in report["reduction_pct"].items())
        return f"{title}\n{table(headers, body)}\nvolatility reduction vs observed: {reductions}\n"
    elif kind == "sandwich":
        return f"{title}\ntrials {report['trials']}  violations {report['violations']}  profitable-if-ordered {report['profitable_in_attack_order']}\n"
    else:
        return to_json(report)
    return f"{title}\n{table(headers, body)}\n"


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "text":
        return to_text(report)
    if fmt == "csv":
        return to_csv(report)
    raise ValueError(f"unknown format {fmt!r}")
