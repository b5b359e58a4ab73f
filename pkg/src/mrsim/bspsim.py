"""Bulk-synchronous programs executed one superstep per engine round.

Each processor becomes one node; its state rides along as a kept item while
messages travel as ordinary value items, so a program with R supersteps costs
exactly R + 1 engine rounds (one for placement) and O(R * N) communication.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .engine import Algorithm, ExecutionReport, Item, Kind, NodeLabel, node_rng, run

NS_PROC = "bsp"


class BspBudgetViolation(Exception):
    def __init__(self, processor: int, superstep: int, direction: str, weight: int, budget: int):
        self.processor = processor
        self.superstep = superstep
        super().__init__(
            f"processor {processor} {direction} {weight} words in superstep "
            f"{superstep}, budget {budget}"
        )


@dataclass
class BspProgram:
    """A BSP program over ``processors`` nodes running ``supersteps`` steps.

    ``init(pid)`` returns the processor's initial state as a tuple of words
    (internal state plus memory cells).  ``superstep(step, pid, state, inbox,
    rng)`` returns ``(new_state, sends)`` with ``sends`` a list of
    ``(dest_pid, value)`` single-word messages.  Per superstep a processor may
    send and receive at most ``ceil(N / P)`` words, N being the total state
    size; violating that is a bug in the program, not in the simulation.
    """

    processors: int
    supersteps: int
    init: Callable[[int], tuple]
    superstep: Callable[[int, int, tuple, list, object], tuple]

    def total_state_size(self) -> int:
        return sum(max(1, len(self.init(p))) for p in range(self.processors))


class _BspAlgorithm(Algorithm):
    def __init__(self, prog: BspProgram, m_bsp: int):
        self.prog = prog
        self.m_bsp = m_bsp

    def place_inputs(self, index, record, rng):
        state = tuple(self.prog.init(index))
        yield NodeLabel(NS_PROC, (index,)), Item(Kind.CONTROL, state, max(1, len(state)))

    def transition(self, node, r, items, rng):
        step = r - 1
        if step >= self.prog.supersteps:
            return ()
        pid = node.coords[0]
        state = None
        inbox = []
        received = 0
        for it in items:
            if it.kind == Kind.CONTROL:
                state = it.payload
            else:
                inbox.append(it.payload[0])
                received += it.weight
        if received > self.m_bsp:
            raise BspBudgetViolation(pid, step - 1, "received", received, self.m_bsp)
        new_state, sends = self.prog.superstep(step, pid, state, inbox, rng)
        new_state = tuple(new_state)
        sent = len(sends)
        if sent > self.m_bsp:
            raise BspBudgetViolation(pid, step, "sent", sent, self.m_bsp)
        out = [(node, Item(Kind.CONTROL, new_state, max(1, len(new_state))))]
        for dest_pid, value in sends:
            if not 0 <= dest_pid < self.prog.processors:
                raise ValueError(f"message to unknown processor {dest_pid}")
            out.append((NodeLabel(NS_PROC, (dest_pid,)), Item(Kind.VALUE, (value,))))
        return out

    def done(self, r, quiescent):
        return quiescent or r >= self.prog.supersteps + 1


@dataclass
class BspResult:
    states: dict[int, tuple]
    inboxes: dict[int, list]
    report: ExecutionReport | None = None


def simulate_bsp(prog: BspProgram, m_bsp: int, seed: int = 0) -> BspResult:
    """Run ``prog`` under the engine, one superstep per round.

    ``m_bsp`` is the BSP word budget ceil(N / P); the engine budget gets a
    factor-two headroom because a node carries its state alongside a full
    inbox within one round.
    """

    if prog.processors < 1:
        raise ValueError("need at least one processor")
    alg = _BspAlgorithm(prog, m_bsp)
    report = run(alg, list(range(prog.processors)), 2 * m_bsp + 2, seed=seed)
    states: dict[int, tuple] = {}
    inboxes: dict[int, list] = {p: [] for p in range(prog.processors)}
    for node, items in report.outputs.items():
        pid = node.coords[0]
        for it in items:
            if it.kind == Kind.CONTROL:
                states[pid] = it.payload
            else:
                inboxes[pid].append(it.payload[0])
    return BspResult(states=states, inboxes=inboxes, report=report)


def bsp_oracle(prog: BspProgram, seed: int = 0) -> BspResult:
    """Direct sequential interpretation of the same program.

    Shares the superstep function and the per-(processor, round) random
    streams with the engine run, so results must match exactly.
    """

    states = {p: tuple(prog.init(p)) for p in range(prog.processors)}
    inboxes: dict[int, list] = {p: [] for p in range(prog.processors)}
    for step in range(prog.supersteps):
        outbox: dict[int, list] = {p: [] for p in range(prog.processors)}
        for pid in range(prog.processors):
            rng = node_rng(seed, NodeLabel(NS_PROC, (pid,)), step + 1)
            new_state, sends = prog.superstep(step, pid, states[pid], inboxes[pid], rng)
            states[pid] = tuple(new_state)
            for dest_pid, value in sends:
                outbox[dest_pid].append(value)
        inboxes = outbox
    return BspResult(states=states, inboxes=inboxes)


def ring_shift_program(p: int) -> BspProgram:
    """Each processor passes its value to its clockwise neighbour, once.

    After the single superstep, processor i holds the value of i-1 mod p in
    its inbox.
    """

    def superstep(step, pid, state, inbox, rng):
        return state, [((pid + 1) % p, state[0])]

    return BspProgram(processors=p, supersteps=1, init=lambda pid: (pid,), superstep=superstep)


def tree_broadcast_program(p: int, fanout: int) -> BspProgram:
    """Processor 0 broadcasts its value along a ``fanout``-ary tree."""

    def superstep(step, pid, state, inbox, rng):
        value, have, sent = state
        if not have and inbox:
            value, have = inbox[0], 1
        sends = []
        if have and not sent:
            lo = pid * fanout + 1
            for child in range(lo, min(lo + fanout, p)):
                sends.append((child, value))
            sent = 1
        return (value, have, sent), sends

    def init(pid):
        return (pid if pid == 0 else -1, 1 if pid == 0 else 0, 0)

    import math

    steps = max(1, math.ceil(math.log(max(p, 2), fanout)))
    return BspProgram(processors=p, supersteps=steps, init=init, superstep=superstep)
