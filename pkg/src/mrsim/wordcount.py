"""Word counting as a single map-shuffle-reduce round.

Each token is mapped to a (word, 1) message keyed by the word's node; the
shuffle groups equal words, and the final reduce sums each group locally.
The last reduce emits plain output values, so the whole computation costs one
round and one message per token.
"""

from __future__ import annotations

from .engine import Algorithm, ExecutionReport, Item, Kind, NodeLabel, run

NS_WORD = "wc"


class WordCount(Algorithm):
    def __init__(self, tokens):
        self.word_ids: dict[str, int] = {}
        self.words: list[str] = []
        for tok in tokens:
            if tok not in self.word_ids:
                self.word_ids[tok] = len(self.words)
                self.words.append(tok)

    def place_inputs(self, index, record, rng):
        yield NodeLabel(NS_WORD, (self.word_ids[record],)), Item(Kind.VALUE, (1,))

    def transition(self, node, round_index, items, rng):
        return ()

    def done(self, round_index, quiescent):
        return round_index >= 1


def word_count(tokens, m_budget: int, seed: int = 0) -> tuple[dict[str, int], ExecutionReport]:
    """Count token occurrences; returns the counts and the execution report."""

    tokens = list(tokens)
    alg = WordCount(tokens)
    report = run(alg, tokens, m_budget, seed=seed)
    counts = {
        alg.words[node.coords[0]]: sum(item.payload[0] for item in items)
        for node, items in report.outputs.items()
    }
    return counts, report
