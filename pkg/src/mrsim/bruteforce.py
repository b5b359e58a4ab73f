"""All-pairs multi-search and sorting on an n x m comparison grid.

Queries replicate across rows and targets down columns by strided doubling
(every holder keeps its copy and spawns M-1 new ones per round, an M-fold
spread at exactly M sends per node).  Once each grid node holds its (x, y)
pair it emits one comparison bit into a per-row and a per-column reduction
tree; the row sums are the query ranks, the column sums the cumulative
counts of queries beyond each target.

Comparisons are tie-broken lexicographically by (value, index) so that
duplicate values still produce a permutation of ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .engine import KEEP, Algorithm, ExecutionReport, Item, Kind, NodeLabel, run

NS_GRID = "bf"
NS_ROW_TREE = "bfr"
NS_COL_TREE = "bfc"
NS_RANK = "bfk"
NS_COUNT = "bfq"


def _weight(value) -> int:
    return max(1, len(value)) if isinstance(value, tuple) else 1


def _spread_rounds(count: int, m_budget: int) -> int:
    if count <= 1:
        return 0
    return math.ceil(math.log(count, m_budget))


def _tree_levels(count: int, d: int) -> int:
    if count <= 1:
        return 1
    levels = max(1, math.ceil(math.log(count, d)))
    while d**levels < count:
        levels += 1
    while levels > 1 and d ** (levels - 1) >= count:
        levels -= 1
    return levels


class BruteForceGrid(Algorithm):
    """Engine algorithm for the comparison grid.

    ``replicate_only`` stops after the spread phase, leaving the populated
    grid as the outputs (used to test the replication pattern in isolation).
    """

    def __init__(self, n: int, m: int, m_budget: int, replicate_only: bool = False):
        self.n = n
        self.m = m
        self.m_budget = m_budget
        self.d = m_budget // 2
        self.rep_x = _spread_rounds(m, m_budget)  # x spreads across columns
        self.rep_y = _spread_rounds(n, m_budget)  # y spreads down rows
        self.rep = max(self.rep_x, self.rep_y)
        self.row_levels = _tree_levels(m, self.d)
        self.col_levels = _tree_levels(n, self.d)
        self.replicate_only = replicate_only
        self.compare_round = self.rep + 1
        self.last_round = self.compare_round + max(self.row_levels, self.col_levels) + 1

    def place_inputs(self, index, record, rng):
        axis, pos, value = record
        if axis == "x":
            yield NodeLabel(NS_GRID, (pos, 0)), Item(Kind.QUERY, (value,), _weight(value))
        else:
            yield NodeLabel(NS_GRID, (0, pos)), Item(Kind.VALUE, (value,), _weight(value))

    def _spread(self, node, item, axis, rnd):
        i, j = node.coords
        held, limit = (j, self.m) if axis == "x" else (i, self.n)
        stride = self.m_budget ** (rnd - 1)
        out = []
        for k in range(self.m_budget):
            target = held + stride * k
            if target >= limit:
                break
            dest = (i, target) if axis == "x" else (target, j)
            out.append((NodeLabel(NS_GRID, dest), item))
        return out

    def transition(self, node, r, items, rng):
        ns = node.namespace
        if ns == NS_GRID:
            if r <= self.rep:
                out = []
                for it in items:
                    if it.kind == Kind.QUERY and r <= self.rep_x:
                        out.extend(self._spread(node, it, "x", r))
                    elif it.kind == Kind.VALUE and r <= self.rep_y:
                        out.extend(self._spread(node, it, "y", r))
                    else:
                        out.append((node, it))
                return out
            if self.replicate_only:
                return KEEP
            # compare round: emit one bit into each reduction tree
            i, j = node.coords
            x = next(it.payload[0] for it in items if it.kind == Kind.QUERY)
            y = next(it.payload[0] for it in items if it.kind == Kind.VALUE)
            bit = 1 if (y, j) < (x, i) else 0
            d = self.d
            return [
                (NodeLabel(NS_ROW_TREE, (i, self.row_levels - 1, j // d)), Item(Kind.COUNT, (bit,))),
                (NodeLabel(NS_COL_TREE, (j, self.col_levels - 1, i // d)), Item(Kind.COUNT, (bit,))),
            ]

        # Reduction trees: level l acts at compare_round + (levels - l).
        key, level, pos = node.coords
        levels = self.row_levels if ns == NS_ROW_TREE else self.col_levels
        act = self.compare_round + (levels - level)
        if r < act:
            return KEEP
        total = sum(it.payload[0] for it in items)
        if level == 0:
            sink = NS_RANK if ns == NS_ROW_TREE else NS_COUNT
            return [(NodeLabel(sink, (key,)), Item(Kind.COUNT, (total,)))]
        return [(NodeLabel(ns, (key, level - 1, pos // self.d)), Item(Kind.COUNT, (total,)))]

    def done(self, r, quiescent):
        if self.replicate_only:
            return quiescent or r >= self.rep + 1
        return quiescent or r >= self.last_round


def replicate(x_items: Sequence, y_items: Sequence, m_budget: int, seed: int = 0):
    """Spread row and column inputs over the grid; returns (population, report).

    ``population`` maps (i, j) to the set of axis tags present at that node.
    """

    if m_budget < 2:
        raise ValueError("m_budget must be at least 2")
    n, m = len(x_items), len(y_items)
    alg = BruteForceGrid(n, m, max(m_budget, 4), replicate_only=True)
    records = [("x", i, v) for i, v in enumerate(x_items)]
    records += [("y", j, v) for j, v in enumerate(y_items)]
    report = run(alg, records, max(m_budget, 4), seed=seed)
    population = {}
    for node, items in report.outputs.items():
        tags = {("x" if it.kind == Kind.QUERY else "y") for it in items}
        population[node.coords] = tags
    return population, report


def brute_multisearch(
    x_items: Sequence, y_items: Sequence, m_budget: int, seed: int = 0, require_sorted: bool = True
) -> tuple[list[int], list[int], ExecutionReport]:
    """Rank every query against the sorted targets by comparing all pairs.

    Returns ``(k, c, report)`` where ``k[i]`` counts targets below query i
    under the tie-broken order and ``c[j]`` counts queries beyond target j.
    """

    if m_budget < 4:
        raise ValueError("m_budget must be at least 4")
    if not x_items or not y_items:
        raise ValueError("both item sets must be non-empty")
    y_list = list(y_items)
    if require_sorted and any(y_list[a] > y_list[a + 1] for a in range(len(y_list) - 1)):
        raise ValueError("targets must be sorted")
    n, m = len(x_items), len(y_list)
    alg = BruteForceGrid(n, m, m_budget)
    records = [("x", i, v) for i, v in enumerate(x_items)]
    records += [("y", j, v) for j, v in enumerate(y_list)]
    report = run(alg, records, m_budget, seed=seed)
    ranks = [0] * n
    counts = [0] * m
    for node, items in report.outputs.items():
        if node.namespace == NS_RANK:
            ranks[node.coords[0]] = items[0].payload[0]
        elif node.namespace == NS_COUNT:
            counts[node.coords[0]] = items[0].payload[0]
    return ranks, counts, report


def brute_sort(x_items: Sequence, m_budget: int, seed: int = 0) -> tuple[list[int], ExecutionReport]:
    """Sort by comparing every pair: the rank of each item is its bit sum.

    Duplicates are ordered by original position, so the ranks always form a
    permutation of 0..n-1.
    """

    ranks, _, report = brute_multisearch(
        x_items, list(x_items), m_budget, seed=seed, require_sorted=False
    )
    return ranks, report
