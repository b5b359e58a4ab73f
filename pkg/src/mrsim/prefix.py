"""All-prefix-sums over an implicit d-ary tree, and random indexing on top of it.

The tree is never stored: the k-th node on level l is the label (l, k), its
parent is (l-1, k//d), and its j-th child is (l+1, k*d+j).  Leaves sit on
level L-1 and hold up to d consecutive item slots each, so every node touches
at most d+1 items per round and the strict budget M = 2d is never exceeded.

Schedule for prefix sums (L = tree height):
  round 0                placement of the N values onto the leaves
  rounds 1 .. L-1        bottom-up: level L-1-j+1 ... each level sends its
                         subtree sum to its parent and keeps what it received
  rounds L .. 2L-1       top-down: each node forwards to child j the sum of
                         everything left of that child; leaves emit outputs
Total R = 1 + (L-1) + L rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .engine import KEEP, Algorithm, ExecutionReport, Item, Kind, NodeLabel, run

NS_TREE = "ps"
NS_OUT = "pso"
NS_INDEX_TREE = "ri"
NS_INDEX_OUT = "rio"


class DuplicateIndex(Exception):
    pass


class LeafOverflow(Exception):
    """A leaf drew more items than the budget allows; retry with a new seed."""


@dataclass(frozen=True)
class IndexedValue:
    index: int
    value: int


@dataclass(frozen=True)
class TreeGeometry:
    """Shape of the implicit reduction tree: branching d = M/2, height L."""

    d: int
    leaf_count: int  # N, the number of item slots
    levels: int      # L; root on level 0, leaves on level L-1

    @classmethod
    def for_items(cls, n: int, m_budget: int) -> "TreeGeometry":
        if m_budget < 4:
            raise ValueError("m_budget must be at least 4")
        d = m_budget // 2
        if n <= 1:
            return cls(d=d, leaf_count=max(n, 1), levels=1)
        levels = max(1, math.ceil(math.log(n, d)))
        # Guard against float rounding at exact powers.
        while d**levels < n:
            levels += 1
        while levels > 1 and d ** (levels - 1) >= n:
            levels -= 1
        return cls(d=d, leaf_count=n, levels=levels)


def parent_label(level: int, position: int, geom: TreeGeometry, namespace: str = NS_TREE) -> NodeLabel:
    """Label arithmetic for the parent of node (level, position)."""

    assert 1 <= level <= geom.levels - 1, "parent is defined for non-root levels only"
    assert position >= 0
    return NodeLabel(namespace, (level - 1, position // geom.d))


def child_label(level: int, position: int, j: int, geom: TreeGeometry, namespace: str = NS_TREE) -> NodeLabel:
    assert 0 <= j < geom.d
    return NodeLabel(namespace, (level + 1, position * geom.d + j))


class PrefixSums(Algorithm):
    """Engine algorithm computing inclusive prefix sums of N values.

    Inputs must arrive in index order; leaf k owns indices [k*d, (k+1)*d).
    Child sums travel positionally: populated children of any node form a
    left-aligned prefix of its child list, so no child tags are needed.
    """

    def __init__(self, n: int, m_budget: int):
        self.geom = TreeGeometry.for_items(n, m_budget)
        self.n = n

    def place_inputs(self, index, record, rng):
        leaf = index // self.geom.d
        yield NodeLabel(NS_TREE, (self.geom.levels - 1, leaf)), Item(Kind.VALUE, (record,))

    def transition(self, node, r, items, rng):
        geom = self.geom
        level, pos = node.coords
        last = 2 * geom.levels - 1

        if geom.levels == 1:
            # Root and leaf coincide; scan locally and emit.
            total = 0
            out = []
            for j, item in enumerate(items):
                total += item.payload[0]
                out.append((NodeLabel(NS_OUT, (j,)), Item(Kind.VALUE, (total,))))
            return out

        if level == geom.levels - 1:
            if r == 1:
                s = sum(it.payload[0] for it in items)
                out = [(parent_label(level, pos, geom), Item(Kind.PARTIAL_SUM, (s,)))]
                out.extend((node, it) for it in items)
                return out
            if r < last:  # only kept values are present until the last round
                return KEEP
            # r == last: parent prefix has arrived; emit final sums
            base = next(it.payload[0] for it in items if it.kind == Kind.CONTROL)
            running = base
            out = []
            j = 0
            for it in items:
                if it.kind != Kind.VALUE:
                    continue
                running += it.payload[0]
                out.append((NodeLabel(NS_OUT, (pos * geom.d + j,)), Item(Kind.VALUE, (running,))))
                j += 1
            return out

        up_round = geom.levels - level
        down_round = geom.levels + level
        if level == 0:
            out = []
            if r == down_round:  # == geom.levels
                running = 0
                for j, it in enumerate(items):
                    out.append((child_label(0, 0, j, geom), Item(Kind.CONTROL, (running,))))
                    running += it.payload[0]
            return out

        if r == up_round:
            s = sum(it.payload[0] for it in items)
            out = [(parent_label(level, pos, geom), Item(Kind.PARTIAL_SUM, (s,)))]
            out.extend((node, it) for it in items)
            return out
        if r < down_round:
            return KEEP
        if r == down_round:
            base = next(it.payload[0] for it in items if it.kind == Kind.CONTROL)
            running = base
            out = []
            j = 0
            for it in items:
                if it.kind != Kind.PARTIAL_SUM:
                    continue
                out.append((child_label(level, pos, j, geom), Item(Kind.CONTROL, (running,))))
                running += it.payload[0]
                j += 1
            return out
        return ()

    def done(self, r, quiescent):
        return quiescent or r >= 2 * self.geom.levels


def prefix_sums(
    values: Sequence[IndexedValue | tuple], m_budget: int, seed: int = 0
) -> tuple[list[IndexedValue], ExecutionReport]:
    """Compute b_i = sum of a_j for j <= i over an indexed collection.

    Returns the outputs in index order together with the execution report.
    """

    pairs = [(v.index, v.value) if isinstance(v, IndexedValue) else tuple(v) for v in values]
    if not pairs:
        raise ValueError("values must be non-empty")
    seen = set()
    for idx, _ in pairs:
        if idx in seen:
            raise DuplicateIndex(f"index {idx} appears more than once")
        seen.add(idx)
    n = len(pairs)
    if seen != set(range(n)):
        raise ValueError("indices must be exactly 0..N-1")
    pairs.sort()

    alg = PrefixSums(n, m_budget)
    report = run(alg, [v for _, v in pairs], m_budget, seed=seed)
    out = [
        IndexedValue(node.coords[0], items[0].payload[0])
        for node, items in report.outputs.items()
    ]
    out.sort(key=lambda iv: iv.index)
    return out, report


class RandomIndexing(Algorithm):
    """Assigns the N inputs distinct indices 0..N-1 uniformly at random.

    Every input picks a uniform slot in [0, N_hat^3); slots map onto leaf
    bins of the reduction tree, subtree counts flow up, offset bases flow
    down, and each leaf hands its items consecutive ranks in random order.
    Populated leaves are scattered, so count items carry their child position
    (tag and count share one machine word).
    """

    def __init__(self, n: int, n_hat: int, m_budget: int):
        if n_hat < n:
            raise ValueError("size estimate must be at least the input size")
        self.n = n
        self.slots = max(n_hat, 1) ** 3
        d = m_budget // 2
        # Leaf bins oversample the input 8x; per-bin load is Poisson with
        # mean <= 1/8, so exceeding any realistic budget is negligible while
        # the tree above the leaves compresses at every level.
        full = max(1, math.ceil(math.log(max(self.slots, 2), d)))
        depth = max(1, math.ceil(math.log(8 * max(n, 2), d)))
        self.bins_log = min(full, depth)
        self.bins = d**self.bins_log
        self.geom = TreeGeometry(d=d, leaf_count=self.bins, levels=self.bins_log + 1)
        self.m_budget = m_budget

    def place_inputs(self, index, record, rng):
        slot = rng.randrange(self.slots)
        leaf = slot * self.bins // self.slots
        yield NodeLabel(NS_INDEX_TREE, (self.geom.levels - 1, leaf)), Item(Kind.VALUE, (index,))

    def transition(self, node, r, items, rng):
        geom = self.geom
        level, pos = node.coords
        last = 2 * geom.levels - 1

        if level == geom.levels - 1:
            if r == 1:
                if len(items) + 1 > self.m_budget:
                    raise LeafOverflow(
                        f"leaf {node} drew {len(items)} items under budget {self.m_budget}"
                    )
                out = [
                    (
                        parent_label(level, pos, geom, NS_INDEX_TREE),
                        Item(Kind.COUNT, (len(items), pos % geom.d)),
                    )
                ]
                out.extend((node, it) for it in items)
                return out
            if r < last:
                return KEEP
            base = next(it.payload[0] for it in items if it.kind == Kind.CONTROL)
            ids = [it for it in items if it.kind == Kind.VALUE]
            order = list(range(len(ids)))
            rng.shuffle(order)
            return [
                (
                    NodeLabel(NS_INDEX_OUT, (ids[which].payload[0],)),
                    Item(Kind.VALUE, (base + offset,)),
                )
                for offset, which in enumerate(order)
            ]

        up_round = geom.levels - level
        down_round = geom.levels + level

        if level == 0:
            out = []
            if r == down_round:
                counts = sorted((it.payload[1], it.payload[0]) for it in items)
                running = 0
                for child_pos, count in counts:
                    out.append(
                        (
                            child_label(0, 0, child_pos, geom, NS_INDEX_TREE),
                            Item(Kind.CONTROL, (running,)),
                        )
                    )
                    running += count
            return out

        if r == up_round:
            total = sum(it.payload[0] for it in items)
            out = [
                (
                    parent_label(level, pos, geom, NS_INDEX_TREE),
                    Item(Kind.COUNT, (total, pos % geom.d)),
                )
            ]
            out.extend((node, it) for it in items)
            return out
        if r < down_round:
            return KEEP
        if r == down_round:
            base = next(it.payload[0] for it in items if it.kind == Kind.CONTROL)
            counts = sorted(
                (it.payload[1], it.payload[0]) for it in items if it.kind == Kind.COUNT
            )
            out = []
            running = base
            for child_pos, count in counts:
                out.append(
                    (
                        child_label(level, pos, child_pos, geom, NS_INDEX_TREE),
                        Item(Kind.CONTROL, (running,)),
                    )
                )
                running += count
            return out
        return ()

    def done(self, r, quiescent):
        return quiescent or r >= 2 * self.geom.levels


def random_indexing(
    n: int, n_hat: int, m_budget: int, seed: int = 0
) -> tuple[list[int], ExecutionReport]:
    """Assign the n inputs distinct random indices 0..n-1.

    Returns ``perm`` with ``perm[i]`` the index of input i, plus the report.
    Raises :class:`LeafOverflow` with probability n^(-Omega(M)); retry with a
    fresh seed in that case.
    """

    if n < 1:
        raise ValueError("n must be positive")
    alg = RandomIndexing(n, n_hat, m_budget)
    report = run(alg, list(range(n)), m_budget, seed=seed)
    perm = [-1] * n
    for node, items in report.outputs.items():
        perm[node.coords[0]] = items[0].payload[0]
    return perm, report
