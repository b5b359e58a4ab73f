"""mrsim: a deterministic simulator of I/O-memory-bound MapReduce computations.

Algorithms are expressed as node-transition functions executed in synchronized
rounds by :mod:`mrsim.engine`, which enforces the per-node item budget and
records exact round and communication metrics.
"""

from .engine import (
    Algorithm,
    BudgetViolation,
    EngineError,
    ExecutionReport,
    Item,
    Kind,
    MalformedMessage,
    Message,
    NodeLabel,
    RoundLimitExceeded,
    RoundStats,
    lower_bound_time,
    route,
    run,
)

__all__ = [
    "Algorithm",
    "BudgetViolation",
    "EngineError",
    "ExecutionReport",
    "Item",
    "Kind",
    "MalformedMessage",
    "Message",
    "NodeLabel",
    "RoundLimitExceeded",
    "RoundStats",
    "lower_bound_time",
    "route",
    "run",
]

__version__ = "0.1.0"
