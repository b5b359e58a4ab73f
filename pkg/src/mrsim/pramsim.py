"""Simulation of f-CRCW PRAM steps via implicit funnel trees.

Every memory cell j is the root of an implicit (M/2)-ary tree whose leaves
cover the processors in blocks of d = M/2.  One PRAM step costs 3L + 1 engine
rounds (L = tree height): read requests coalesce upward (1 + (L-1) rounds),
the value flows back down the request paths (L rounds), processors compute
and emit write requests (1 round), and writes combine upward under the
semigroup operator (L rounds, the last of which replaces the cell).  Funnel
nodes hold items only while traffic passes through them, so the trees are
never materialized in full.

Item kinds inside the funnels: CONTROL carries a cell value or processor
state, READ_REQUEST flows up with the sender's child position, COUNT is the
kept request bitmap, VALUE is the cell value flowing down, WRITE_REQUEST
carries a value being written.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .engine import KEEP, Algorithm, ExecutionReport, Item, Kind, NodeLabel, node_rng, run

NS_PROC = "pu"
NS_TREE = "pm"

INT64_MAX = 2**63 - 1


class AddressOutOfRange(Exception):
    pass


class CombineOverflow(Exception):
    pass


def _combine_sum(values):
    total = sum(values)
    if not -INT64_MAX - 1 <= total <= INT64_MAX:
        raise CombineOverflow(f"sum {total} leaves the 64-bit range")
    return total


COMBINERS: dict[str, Callable] = {
    "sum": _combine_sum,
    "min": min,
    "max": max,
}


@dataclass
class PramProgram:
    """An f-CRCW PRAM program.

    ``step(t, pid, state, read_value, rng)`` is called once per PRAM step and
    returns ``(new_state, next_read_addr, write)``; ``read_value`` is the cell
    content fetched at the address requested by the previous step (or by
    ``first_read`` for step 0), ``write`` is ``(addr, value)`` or ``None``.
    Concurrent writes to a cell are merged with the commutative semigroup
    ``combine`` and replace the cell's content.
    """

    processors: int
    memory: list[int]
    steps: int
    step: Callable
    combine: str = "sum"
    first_read: Optional[Callable[[int], Optional[int]]] = None
    init_state: Callable[[int], tuple] = lambda pid: ()

    def __post_init__(self):
        if self.combine not in COMBINERS:
            raise ValueError(f"unknown combine operator: {self.combine}")


@dataclass(frozen=True)
class FunnelGeometry:
    d: int
    levels: int  # L; leaves on level L-1 cover processors in blocks of d

    @classmethod
    def for_processors(cls, p: int, m_budget: int) -> "FunnelGeometry":
        d = m_budget // 2
        if p <= 1:
            return cls(d=d, levels=1)
        levels = max(1, math.ceil(math.log(p, d)))
        while d**levels < p:
            levels += 1
        while levels > 1 and d ** (levels - 1) >= p:
            levels -= 1
        return cls(d=d, levels=levels)


class PramSimulation(Algorithm):
    def __init__(self, prog: PramProgram, m_budget: int, trace=None):
        self.prog = prog
        self.geom = FunnelGeometry.for_processors(prog.processors, m_budget)
        self.cycle = 3 * self.geom.levels + 1
        self.trace = trace
        self.combiner = COMBINERS[prog.combine]

    # ------------------------------------------------------------------
    def place_inputs(self, index, record, rng):
        kind, key, value = record
        if kind == "proc":
            state = tuple(self.prog.init_state(key))
            addr = self.prog.first_read(key) if self.prog.first_read else None
            self._check_addr(addr)
            yield NodeLabel(NS_PROC, (key,)), Item(
                Kind.CONTROL, (state, addr), max(1, len(state))
            )
        else:
            yield NodeLabel(NS_TREE, (key, 0, 0)), Item(Kind.CONTROL, (value,))

    def _check_addr(self, addr):
        if addr is not None and not 0 <= addr < len(self.prog.memory):
            raise AddressOutOfRange(f"address {addr} outside memory of size {len(self.prog.memory)}")

    def _leaf_for(self, addr: int, pid: int) -> NodeLabel:
        if self.geom.levels == 1:
            return NodeLabel(NS_TREE, (addr, 0, 0))
        return NodeLabel(NS_TREE, (addr, self.geom.levels - 1, pid // self.geom.d))

    # ------------------------------------------------------------------
    def transition(self, node, r, items, rng):
        if self.trace is not None:
            self.trace(node, r)
        step_index, phase = divmod(r - 1, self.cycle)
        if step_index >= self.prog.steps:
            return ()
        if node.namespace == NS_PROC:
            return self._processor(node, step_index, phase, items, rng)
        return self._funnel(node, step_index, phase, items)

    def _processor(self, node, t, phase, items, rng):
        L = self.geom.levels
        pid = node.coords[0]
        if phase == 0:
            ctrl = items[0]
            state, addr = ctrl.payload
            if addr is None:
                return KEEP
            return [(node, ctrl), (self._leaf_for(addr, pid), Item(Kind.READ_REQUEST, (pid,)))]
        if phase == 2 * L:
            read_value = None
            ctrl = None
            for it in items:
                if it.kind == Kind.CONTROL:
                    ctrl = it
                elif it.kind == Kind.VALUE:
                    read_value = it.payload[0]
            state, _ = ctrl.payload
            new_state, next_read, write = self.prog.step(t, pid, state, read_value, rng)
            new_state = tuple(new_state)
            self._check_addr(next_read)
            out = [(node, Item(Kind.CONTROL, (new_state, next_read), max(1, len(new_state))))]
            if write is not None:
                addr, value = write
                self._check_addr(addr)
                out.append((self._leaf_for(addr, pid), Item(Kind.WRITE_REQUEST, (value,))))
            return out
        return KEEP

    def _funnel(self, node, t, phase, items):
        L = self.geom.levels
        d = self.geom.d
        cell, level, pos = node.coords

        if level == 0:
            reads = [it for it in items if it.kind == Kind.READ_REQUEST]
            writes = [it for it in items if it.kind == Kind.WRITE_REQUEST]
            ctrl = next(it for it in items if it.kind == Kind.CONTROL)
            if phase == L and reads:
                value = ctrl.payload[0]
                out = [(node, ctrl)]
                if L == 1:
                    for req in reads:
                        out.append((NodeLabel(NS_PROC, (req.payload[0],)), Item(Kind.VALUE, (value,))))
                else:
                    for req in reads:
                        out.append(
                            (NodeLabel(NS_TREE, (cell, 1, req.payload[0])), Item(Kind.VALUE, (value,)))
                        )
                return out
            if phase == 3 * L and writes:
                merged = self.combiner([w.payload[0] for w in writes])
                return [(node, Item(Kind.CONTROL, (merged,)))]
            return KEEP

        # Funnel interior; exists only while requests or writes pass through.
        up_phase = L - level          # request forwarding
        down_phase = L + level        # value distribution
        write_phase = 3 * L - level   # combined write forwarding

        if phase == up_phase:
            mask = 0
            for it in items:
                if it.kind == Kind.READ_REQUEST:
                    child = it.payload[0] if level < L - 1 else it.payload[0] - pos * d
                    mask |= 1 << child
            out = [
                (
                    NodeLabel(NS_TREE, (cell, level - 1, pos // d)),
                    Item(Kind.READ_REQUEST, (pos % d,) if level > 1 else (pos,)),
                ),
                (node, Item(Kind.COUNT, (mask,), max(1, (d + 63) // 64))),
            ]
            return out
        if up_phase < phase < down_phase:
            return KEEP
        if phase == down_phase:
            value = next(it.payload[0] for it in items if it.kind == Kind.VALUE)
            mask = next(it.payload[0] for it in items if it.kind == Kind.COUNT)
            out = []
            child = 0
            while mask:
                if mask & 1:
                    if level == L - 1:
                        out.append((NodeLabel(NS_PROC, (pos * d + child,)), Item(Kind.VALUE, (value,))))
                    else:
                        out.append(
                            (
                                NodeLabel(NS_TREE, (cell, level + 1, pos * d + child)),
                                Item(Kind.VALUE, (value,)),
                            )
                        )
                mask >>= 1
                child += 1
            return out
        if phase == write_phase:
            merged = self.combiner([it.payload[0] for it in items if it.kind == Kind.WRITE_REQUEST])
            return [
                (NodeLabel(NS_TREE, (cell, level - 1, pos // d)), Item(Kind.WRITE_REQUEST, (merged,)))
            ]
        return ()

    def done(self, r, quiescent):
        return quiescent or r >= self.prog.steps * self.cycle + 1


@dataclass
class PramResult:
    memory: list[int]
    states: dict[int, tuple]
    report: ExecutionReport | None = None


def simulate_pram(prog: PramProgram, m_budget: int, seed: int = 0, trace=None) -> PramResult:
    """Run the program under the engine; see the module docstring for the schedule."""

    if prog.processors < 1:
        raise ValueError("need at least one processor")
    alg = PramSimulation(prog, m_budget, trace=trace)
    records = [("proc", pid, None) for pid in range(prog.processors)]
    records += [("cell", j, v) for j, v in enumerate(prog.memory)]
    report = run(alg, records, m_budget, seed=seed)
    memory = list(prog.memory)
    states: dict[int, tuple] = {}
    for node, items in report.outputs.items():
        if node.namespace == NS_TREE:
            memory[node.coords[0]] = items[0].payload[0]
        elif node.namespace == NS_PROC:
            for it in items:
                if it.kind == Kind.CONTROL:
                    states[node.coords[0]] = it.payload[0]
    return PramResult(memory=memory, states=states, report=report)


def pram_oracle(prog: PramProgram, seed: int = 0, m_budget: int = 4) -> PramResult:
    """Sequential interpretation: serve all reads, then merge all writes per cell.

    Shares the step function and random streams with :func:`simulate_pram`;
    streams are keyed by the compute round of the engine schedule, so pass the
    same ``m_budget`` as the simulation whenever the program draws randomness.
    """

    combiner = COMBINERS[prog.combine]
    geom = FunnelGeometry.for_processors(prog.processors, m_budget)
    cycle = 3 * geom.levels + 1
    memory = list(prog.memory)
    states = {pid: tuple(prog.init_state(pid)) for pid in range(prog.processors)}
    pending = {
        pid: (prog.first_read(pid) if prog.first_read else None)
        for pid in range(prog.processors)
    }
    for pid, addr in pending.items():
        if addr is not None and not 0 <= addr < len(memory):
            raise AddressOutOfRange(f"address {addr} outside memory of size {len(memory)}")
    for t in range(prog.steps):
        compute_round = 1 + t * cycle + 2 * geom.levels
        writes: dict[int, list[int]] = {}
        for pid in range(prog.processors):
            addr = pending[pid]
            read_value = memory[addr] if addr is not None else None
            rng = node_rng(seed, NodeLabel(NS_PROC, (pid,)), compute_round)
            new_state, next_read, write = prog.step(t, pid, states[pid], read_value, rng)
            states[pid] = tuple(new_state)
            if next_read is not None and not 0 <= next_read < len(memory):
                raise AddressOutOfRange(f"address {next_read} outside memory of size {len(memory)}")
            pending[pid] = next_read
            if write is not None:
                addr_w, value = write
                if not 0 <= addr_w < len(memory):
                    raise AddressOutOfRange(f"address {addr_w} outside memory of size {len(memory)}")
                writes.setdefault(addr_w, []).append(value)
        for addr_w, values in writes.items():
            memory[addr_w] = combiner(values)
    return PramResult(memory=memory, states=states)


# ----------------------------------------------------------------------
# Demo programs selectable from the command line.


def histogram_program(p: int, cells: int) -> PramProgram:
    """Every processor adds 1 to cell pid mod cells in a single step."""

    def step(t, pid, state, read_value, rng):
        return state, None, (pid % cells, 1)

    return PramProgram(processors=p, memory=[0] * cells, steps=1, step=step, combine="sum")


def sum_reduce_program(p: int) -> PramProgram:
    """All processors add their id+1 into cell 0; the result is p(p+1)/2."""

    def step(t, pid, state, read_value, rng):
        return state, None, (0, pid + 1)

    return PramProgram(processors=p, memory=[0], steps=1, step=step, combine="sum")


def max_scan_program(p: int, seed_values: list[int] | None = None) -> PramProgram:
    """Step 0 writes every value into cell 0 under Max; step 1 reads it back."""

    values = seed_values if seed_values is not None else [(pid * 2654435761) % 1000 for pid in range(p)]

    def step(t, pid, state, read_value, rng):
        if t == 0:
            return state, 0, (0, values[pid])
        return (read_value,), None, None

    return PramProgram(
        processors=p,
        memory=[min(values)],
        steps=2,
        step=step,
        combine="max",
        init_state=lambda pid: (values[pid],),
    )
