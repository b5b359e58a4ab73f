"""Round-synchronous executor for message-passing computations over labeled nodes.

A computation is a set of nodes addressed by :class:`NodeLabel`.  Each round,
every node holding items applies a transition function that consumes those
items and emits messages; the shuffle delivers all messages before the next
round starts.  Node state only survives a round by being re-sent to the node
itself, so the per-round item budget ``M`` applies uniformly to everything a
node keeps, sends, or receives.

The engine records exact per-round metrics (send volume, fan-in/out, active
nodes) and can evaluate the latency/bandwidth cost model on them.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence


class Kind(IntEnum):
    """Tag for the payload carried by an item."""

    VALUE = 0
    QUERY = 1
    READ_REQUEST = 2
    WRITE_REQUEST = 3
    PARTIAL_SUM = 4
    COUNT = 5
    EDGE = 6
    CONTROL = 7


class NodeLabel(NamedTuple):
    """Structured address of a node: a namespace plus up to 4 integer coords.

    Labels compare structurally; the (namespace, coords) order fixes the total
    order used for deterministic routing and scheduling.
    """

    namespace: str
    coords: tuple

    def __repr__(self) -> str:  # compact form for logs and error messages
        return f"{self.namespace}{self.coords!r}"


class Item(NamedTuple):
    """Tagged payload moved between nodes.

    ``weight`` is the number of machine words the item counts as toward the
    budget ``M`` and the communication total; it never changes after creation.
    """

    kind: int
    payload: tuple
    weight: int = 1


class Message(NamedTuple):
    """A routed item: destination, payload, and provenance for ordering."""

    dest: NodeLabel
    item: Item
    origin: NodeLabel
    seq: int


class EngineError(Exception):
    pass


class BudgetViolation(EngineError):
    def __init__(self, round_index: int, node: NodeLabel, direction: str, weight: int, budget: int):
        self.round_index = round_index
        self.node = node
        self.direction = direction  # "in" or "out"
        self.weight = weight
        self.budget = budget
        super().__init__(
            f"round {round_index}: node {node} {direction}-weight {weight} exceeds budget {budget}"
        )


class RoundLimitExceeded(EngineError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"computation did not finish within {limit} rounds")


class MalformedMessage(EngineError):
    pass


@dataclass
class RoundStats:
    """Exact per-round metrics."""

    round: int
    sent: int = 0            # total item weight sent this round (= C_r)
    active_nodes: int = 0    # nodes applying the transition this round
    max_out: int = 0         # maximum per-node sent weight
    max_in: int = 0          # maximum per-node received weight
    f_time_proxy: int = 0    # maximum per-node (in + out) weight


@dataclass
class ExecutionReport:
    """Full accounting of one execution."""

    rounds: int
    per_round: list[RoundStats]
    total_communication: int
    violations: list[tuple]
    outputs: dict[NodeLabel, tuple[Item, ...]] = field(default_factory=dict)

    def to_json_dict(self, latency: float | None = None, bandwidth: float | None = None) -> dict:
        doc = {
            "rounds": self.rounds,
            "total_communication": self.total_communication,
            "per_round": [
                {
                    "round": s.round,
                    "sent": s.sent,
                    "active_nodes": s.active_nodes,
                    "max_in": s.max_in,
                    "max_out": s.max_out,
                }
                for s in self.per_round
            ],
            "violations": [[v[0], repr(v[1]), v[2], v[3]] for v in self.violations],
        }
        if latency is not None and bandwidth is not None:
            doc["cost_model"] = {
                "L": latency,
                "B": bandwidth,
                "T": lower_bound_time(self, latency, bandwidth),
            }
        return doc


class _LazyRng:
    """Per-(node, round) random stream, materialized only on first use.

    The stream is derived from (seed, namespace, coords, round), so results do
    not depend on the order in which node transitions are evaluated.
    """

    __slots__ = ("_seed", "_label", "_round", "_rng")

    def __init__(self, seed: int, label: NodeLabel, round_index: int):
        self._seed = seed
        self._label = label
        self._round = round_index
        self._rng = None

    def _materialize(self) -> random.Random:
        rng = self._rng
        if rng is None:
            key = repr((self._seed, self._label.namespace, self._label.coords, self._round))
            digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
            rng = random.Random(int.from_bytes(digest, "big"))
            self._rng = rng
        return rng

    def random(self):
        return self._materialize().random()

    def randrange(self, *args):
        return self._materialize().randrange(*args)

    def randint(self, a, b):
        return self._materialize().randint(a, b)

    def shuffle(self, x):
        self._materialize().shuffle(x)

    def sample(self, population, k):
        return self._materialize().sample(population, k)

    def choice(self, seq):
        return self._materialize().choice(seq)


def node_rng(seed: int, label: NodeLabel, round_index: int) -> _LazyRng:
    return _LazyRng(seed, label, round_index)


#: Sentinel a transition may return instead of sends: every item currently at
#: the node is re-sent to the node itself (kept), with normal accounting.
KEEP = object()


class Algorithm:
    """A node-transition function plus an input-placement rule.

    Subclasses override :meth:`place_inputs` and :meth:`transition`; both must
    be pure given their arguments and the supplied random stream.  ``done``
    declares termination at a round boundary, preserving the just-delivered
    states as outputs; by default an execution ends only when a round produces
    no messages at all (global quiescence), which leaves no outputs.
    """

    def place_inputs(self, index: int, record, rng) -> Iterable[tuple[NodeLabel, Item]]:
        raise NotImplementedError

    def transition(
        self, node: NodeLabel, round_index: int, items: Sequence[Item], rng
    ) -> Iterable[tuple[NodeLabel, Item]]:
        raise NotImplementedError

    def done(self, round_index: int, quiescent: bool) -> bool:
        return quiescent


INPUT_NAMESPACE = "in"


def default_round_limit(m_budget: int, total_input_weight: int) -> int:
    """Livelock guard: well above every schedule this package produces."""

    base = max(2, m_budget // 2)
    scale = max(2, total_input_weight)
    return 64 * math.ceil(math.log(scale, base)) + 64


def _route_full(messages: Iterable[Message]) -> dict[NodeLabel, list[Message]]:
    grouped: dict[NodeLabel, list[Message]] = {}
    for msg in messages:
        if not msg.dest.namespace:
            raise MalformedMessage(f"destination with empty namespace: {msg!r}")
        grouped.setdefault(msg.dest, []).append(msg)
    for entries in grouped.values():
        entries.sort(key=lambda m: (m.origin, m.seq))
    return grouped


def route(messages: Iterable[Message]) -> dict[NodeLabel, list[Item]]:
    """Group messages by destination, ordered by (origin, seq) per destination.

    This is the deterministic shuffle: the result does not depend on the
    iteration order of ``messages``.
    """

    return {dest: [m.item for m in msgs] for dest, msgs in _route_full(messages).items()}


def lower_bound_time(report: ExecutionReport, latency: float, bandwidth: float) -> float:
    """Evaluate the running-time lower bound sum over rounds of t_r + L + C_r/B.

    ``f_time_proxy`` stands in for the per-round internal time t_r; latency and
    bandwidth are caller-supplied machine parameters.
    """

    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if latency < 0:
        raise ValueError("latency must be non-negative")
    return sum(s.f_time_proxy + latency + s.sent / bandwidth for s in report.per_round)


def run(
    alg: Algorithm,
    inputs: Sequence,
    m_budget: int,
    seed: int = 0,
    mode: str = "strict",
    round_limit: int | None = None,
    abort_on_violation: bool = True,
) -> ExecutionReport:
    """Execute ``alg`` on ``inputs`` under the per-node item budget ``M``.

    One round is one map-shuffle-reduce cycle: round 0 sends the placement
    messages, and round r >= 1 sends whatever the transitions emitted while
    consuming round r-1's deliveries.  ``rounds`` counts rounds that sent
    messages.

    In strict mode every node must send <= M and receive <= M total weight per
    round; kept items count on both sides.  In modified mode only sends are
    bounded: surplus foreign deliveries wait in a per-node FIFO input buffer
    and are fed to the transition at most M items / M weight per round, while
    self-addressed items always reach the transition.  Buffered weight is
    charged to the round's communication the same way kept state is.
    """

    if m_budget < 4:
        raise ValueError("m_budget must be at least 4")
    if mode not in ("strict", "modified"):
        raise ValueError(f"unknown mode: {mode}")
    if not inputs:
        raise ValueError("inputs must be non-empty")
    if round_limit is not None and round_limit < 1:
        raise ValueError("round_limit must be at least 1")

    # Sends are held per origin, origins in ascending label order; iterating
    # them in that order makes every delivery list (origin, seq)-sorted
    # without materializing Message records.  Entries are either
    # (origin, sends, None, 0) or, for keep-all, (origin, None, items, weight).
    batches: list[tuple] = []
    total_w = 0
    for index, record in enumerate(inputs):
        origin = NodeLabel(INPUT_NAMESPACE, (index,))
        sends = list(alg.place_inputs(index, record, node_rng(seed, origin, 0)))
        if sends:
            batches.append((origin, sends, None, 0))
            for _, item in sends:
                total_w += item.weight

    if round_limit is None:
        round_limit = default_round_limit(m_budget, total_w)

    per_round: list[RoundStats] = []
    violations: list[tuple] = []
    buffers: dict[NodeLabel, list[Item]] = {}  # modified mode only
    strict = mode == "strict"

    def check(rnd: int, node: NodeLabel, direction: str, weight: int):
        if weight > m_budget:
            if abort_on_violation:
                raise BudgetViolation(rnd, node, direction, weight, m_budget)
            violations.append((rnd, node, direction, weight))

    round_index = 0
    active_nodes = len(batches)
    outputs: dict[NodeLabel, tuple[Item, ...]] = {}

    while batches or buffers:
        if round_index >= round_limit:
            raise RoundLimitExceeded(round_limit)

        stats = RoundStats(round=round_index, active_nodes=active_nodes)

        delivered: dict[NodeLabel, list[Item]] = {}
        in_weight: dict[NodeLabel, int] = {}
        out_weight: dict[NodeLabel, int] = {}
        self_state: dict[NodeLabel, list[Item]] = {}
        sent_total = 0
        max_out = 0
        delivered_get = delivered.get
        for origin, sends, kept, kept_w in batches:
            if sends is None:
                # Keep-all: re-deliver the node's items to itself wholesale.
                w = kept_w
                target = delivered if strict else self_state
                lst = target.get(origin)
                if lst is None:
                    target[origin] = kept
                    in_weight[origin] = w
                else:
                    lst.extend(kept)
                    in_weight[origin] = in_weight[origin] + w
            else:
                w = 0
                for dest, item in sends:
                    if not dest.namespace:
                        raise MalformedMessage(f"destination with empty namespace from {origin!r}")
                    w += item[2]  # Item.weight
                    if strict or dest != origin:
                        lst = delivered_get(dest)
                        if lst is None:
                            delivered[dest] = [item]
                            in_weight[dest] = item[2]
                        else:
                            lst.append(item)
                            in_weight[dest] = in_weight[dest] + item[2]
                    else:
                        # modified mode: kept state bypasses the input buffer
                        lst = self_state.get(dest)
                        if lst is None:
                            self_state[dest] = [item]
                            in_weight[dest] = item[2]
                        else:
                            lst.append(item)
                            in_weight[dest] = in_weight[dest] + item[2]
            out_weight[origin] = w
            sent_total += w
            if w > max_out:
                max_out = w

        carry_per_node: dict[NodeLabel, int] = {}
        if buffers:
            for node, buffered in buffers.items():
                cw = 0
                for it in buffered:
                    cw += it.weight
                carry_per_node[node] = cw
                sent_total += cw

        stats.sent = sent_total
        stats.max_out = max_out
        stats.max_in = max(in_weight.values(), default=0)
        if carry_per_node:
            proxy = 0
            for node in out_weight.keys() | in_weight.keys() | carry_per_node.keys():
                p = (
                    out_weight.get(node, 0)
                    + in_weight.get(node, 0)
                    + carry_per_node.get(node, 0)
                )
                if p > proxy:
                    proxy = p
        else:
            # Nodes that only sent are dominated by max_out.
            proxy = max_out
            ow_get = out_weight.get
            for node, w in in_weight.items():
                p = w + ow_get(node, 0)
                if p > proxy:
                    proxy = p
        stats.f_time_proxy = proxy

        if max_out > m_budget:
            for node, w in out_weight.items():
                if w > m_budget:
                    check(round_index, node, "out", w)
        if strict and stats.max_in > m_budget:
            for node, w in in_weight.items():
                if w > m_budget:
                    check(round_index, node, "in", w)

        per_round.append(stats)
        round_index += 1

        # Assemble the states the transitions consume this round.
        if strict:
            states = delivered
        else:
            states = self_state
            for node, items in delivered.items():
                buffers.setdefault(node, []).extend(items)
            for node in list(buffers.keys()):
                buf = buffers[node]
                batch: list[Item] = []
                batch_w = 0
                while buf and len(batch) < m_budget:
                    nxt = buf[0]
                    if batch and batch_w + nxt.weight > m_budget:
                        break
                    batch.append(buf.pop(0))
                    batch_w += nxt.weight
                if batch:
                    states.setdefault(node, []).extend(batch)
                if not buf:
                    del buffers[node]

        active_nodes = len(states)

        if alg.done(round_index, False):
            outputs = {node: tuple(items) for node, items in states.items()}
            for node, buf in buffers.items():
                outputs[node] = outputs.get(node, ()) + tuple(buf)
            break

        batches = []
        alg_transition = alg.transition
        for node in sorted(states.keys()):
            items = states[node]
            res = alg_transition(node, round_index, items, _LazyRng(seed, node, round_index))
            if res is KEEP:
                if strict:
                    kept_w = in_weight[node]
                else:
                    kept_w = 0
                    for it in items:
                        kept_w += it[2]
                batches.append((node, None, items, kept_w))
            else:
                sends = res if type(res) is list else list(res)
                if sends:
                    batches.append((node, sends, None, 0))

    return ExecutionReport(
        rounds=round_index,
        per_round=per_round,
        total_communication=sum(s.sent for s in per_round),
        violations=violations,
        outputs=outputs,
    )
