"""First-order pass-transition model of a sequence space.

Seed phase orders are folded into a weighted graph with virtual START and
END nodes. Random walks over that graph regenerate the seeds and recombine
their shared sub-paths into new, similar sequences.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Iterable, Sequence

from .catalog import Origin, PassCatalog, PassId, PassSequence

START = "<start>"
END = "<end>"

GRAPH_SCHEMA = "phaseorder.transition-graph/1"


class ModelError(ValueError):
    pass


@dataclass
class TransitionGraph:
    edges: Counter = field(default_factory=Counter)
    training_set: list[tuple[str, PassSequence]] = field(default_factory=list)
    passes: dict[str, PassId] = field(default_factory=dict)
    _succ: dict | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def nodes(self) -> set[str]:
        return {START, END, *self.passes}

    def successors(self, node: str) -> tuple[list[str], list[int]]:
        """Successor names and cumulative counts, in first-seen order."""
        if self._succ is None:
            table: dict[str, list[tuple[str, int]]] = {}
            for (a, b), c in self.edges.items():
                table.setdefault(a, []).append((b, c))
            self._succ = {
                a: ([b for b, _ in out], list(accumulate(c for _, c in out)))
                for a, out in table.items()
            }
        return self._succ.get(node, ([], []))

    def transition_probability(self, a: str, b: str) -> Fraction:
        names, cum = self.successors(a)
        if not names:
            return Fraction(0)
        return Fraction(self.edges.get((a, b), 0), cum[-1])

    def walkable(self, seq: PassSequence) -> bool:
        path = [START, *seq.names, END]
        return all(self.edges.get(e, 0) >= 1 for e in zip(path, path[1:]))

    def path_probability(self, seq: PassSequence) -> Fraction:
        """Exact probability that one unbounded walk emits *seq* and stops."""
        path = [START, *seq.names, END]
        p = Fraction(1)
        for a, b in zip(path, path[1:]):
            p *= self.transition_probability(a, b)
            if not p:
                break
        return p

    def to_dict(self) -> dict:
        return {
            "schema": GRAPH_SCHEMA,
            "edges": [[a, b, c] for (a, b), c in self.edges.items()],
            "training_set": [[label, list(seq.names)] for label, seq in self.training_set],
        }

    @classmethod
    def from_dict(cls, data: dict, catalog: PassCatalog) -> "TransitionGraph":
        if data.get("schema") != GRAPH_SCHEMA:
            raise ModelError(f"unsupported graph schema {data.get('schema')!r}")
        g = cls()
        for label, names in data["training_set"]:
            seq = catalog.sequence(names, Origin.MANUAL)
            g.training_set.append((label, seq))
            g.passes.update((p.name, p) for p in seq.items)
        for a, b, c in data["edges"]:
            g.edges[(a, b)] = int(c)
        return g


def build(seed_sequences: Iterable[tuple[str, PassSequence]]) -> TransitionGraph:
    g = TransitionGraph()
    for label, seq in seed_sequences:
        if not seq.items:
            raise ModelError(f"seed sequence for {label!r} is empty")
        path = [START, *seq.names, END]
        for a, b in zip(path, path[1:]):
            g.edges[(a, b)] += 1
        g.passes.update((p.name, p) for p in seq.items)
        g.training_set.append((label, seq))
    if not g.training_set:
        raise ModelError("cannot build a model from zero seed sequences")
    return g


def leave_one_out(all_seeds: Sequence[tuple[str, PassSequence]], excluded: str) -> TransitionGraph:
    labels = {label for label, _ in all_seeds}
    if excluded not in labels:
        raise ModelError(f"label {excluded!r} not among seed labels")
    if len(labels) < 2:
        raise ModelError("leave-one-out needs seeds from at least 2 kernels")
    return build((label, seq) for label, seq in all_seeds if label != excluded)


def walk(graph: TransitionGraph, max_length: int, rng) -> PassSequence:
    items: list[PassId] = []
    node = START
    while len(items) < max_length:
        names, cum = graph.successors(node)
        if not names:
            break
        node = names[bisect_right(cum, rng.next_below(cum[-1]))]
        if node == END:
            break
        items.append(graph.passes[node])
    return PassSequence(tuple(items), Origin.MODEL)


def sample(graph: TransitionGraph, count: int, max_length: int, rng) -> list[PassSequence]:
    """Random walks from START, each stopping at END or after *max_length* passes."""
    if not graph.edges:
        raise ModelError("graph is empty")
    if max_length < 1:
        raise ModelError("max_length must be >= 1")
    return [walk(graph, max_length, rng) for _ in range(count)]
