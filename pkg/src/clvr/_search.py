"""Compiled depth-first enumeration of every ordering of a block.

Prefix states are shared between siblings, so a block of ``n`` trades costs
about ``e * n!`` swaps instead of ``n * n!``. Arithmetic follows
``clvr.amm.swap``, ``clvr.amm.log_deviation`` and ``clvr.metrics`` operation for operation so the
values agree bit for bit with the pure-Python path.

Candidates are visited in index order and only a strictly better leaf
replaces the incumbent, which makes the reported optimum the
lexicographically smallest optimal index sequence.
"""

from __future__ import annotations

import math

import numba
import numpy as np

SELL = 0
BUY = 1


@numba.njit(cache=True)
def _leaf_gini(w, n):
    s = np.sort(w[:n])
    total = 0.0
    weighted = 0.0
    for i in range(n):
        total += s[i]
        weighted += (i + 1) * s[i]
    if total == 0.0:
        return np.nan
    return 2.0 * weighted / (n * total) - (n + 1.0) / n


@numba.njit(cache=True)
def enumerate_orderings(sides, amounts, x0, y0, fee, p0_value, with_gini):
    """Return ``(values, paths)``.

    ``values`` is ``[vol_min, vol_max, gini_min, gini_max]`` and ``paths``
    holds the matching index sequences row by row. Gini entries are NaN when
    ``with_gini`` is false.
    """
    n = sides.shape[0]
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    sums = np.empty(n + 1)
    wealth = np.empty(n)
    path = np.empty(n, dtype=np.int64)
    nxt = np.zeros(n + 1, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    best = np.empty((4, n), dtype=np.int64)
    values = np.array([np.inf, -np.inf, np.inf, -np.inf])
    scale = 1.0 - fee

    xs[0] = x0
    ys[0] = y0
    sums[0] = 0.0
    depth = 0
    while depth >= 0:
        if depth == n:
            vol = sums[n] / n
            if vol < values[0]:
                values[0] = vol
                best[0, :] = path
            if vol > values[1]:
                values[1] = vol
                best[1, :] = path
            if with_gini:
                g = _leaf_gini(wealth, n)
                if g < values[2]:
                    values[2] = g
                    best[2, :] = path
                if g > values[3]:
                    values[3] = g
                    best[3, :] = path
            depth -= 1
            if depth >= 0:
                used[path[depth]] = False
            continue
        i = nxt[depth]
        while i < n and used[i]:
            i += 1
        if i == n:
            depth -= 1
            if depth >= 0:
                used[path[depth]] = False
            continue
        nxt[depth] = i + 1
        path[depth] = i
        used[i] = True
        x = xs[depth]
        y = ys[depth]
        a = amounts[i]
        eff = a * scale
        if sides[i] == SELL:
            out = eff * y / (x + eff)
            nx = x + a
            ny = y - out
            wealth[depth] = out
        else:
            out = eff * x / (y + eff)
            nx = x - out
            ny = y + a
            wealth[depth] = out * p0_value
        xs[depth + 1] = nx
        ys[depth + 1] = ny
        d = math.log1p((nx - x0) / x0) - math.log1p((ny - y0) / y0)
        sums[depth + 1] = sums[depth] + d * d
        depth += 1
        nxt[depth] = 0
    return values, best
