"""Capacity-constrained graph partitioning for qubit-to-QPU assignment.

Works on a weighted interaction graph whose edge weights count two-qubit
gates. Small instances are solved exactly by enumeration; larger ones use
greedy seeding plus Kernighan-Lin style pairwise refinement. Everything is
deterministic: ties always resolve toward lower qubit / device indices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class InteractionGraph:
    """Weighted undirected graph over logical qubits."""

    num_qubits: int
    weights: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        norm: dict[tuple[int, int], int] = {}
        for (a, b), w in self.weights.items():
            if a == b or not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise PartitionError(f"bad edge ({a}, {b}) for {self.num_qubits} qubits")
            key = (min(a, b), max(a, b))
            norm[key] = norm.get(key, 0) + w
        object.__setattr__(self, "weights", norm)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_qubits)]
        for (a, b), w in sorted(self.weights.items()):
            adj[a].append((b, w))
            adj[b].append((a, w))
        return adj

    def total_weight(self, qubit: int) -> int:
        return sum(w for (a, b), w in self.weights.items() if qubit in (a, b))


def cut_weight(graph: InteractionGraph, assign: Sequence[int]) -> int:
    """Total weight of edges whose endpoints sit on different devices."""
    return sum(w for (a, b), w in graph.weights.items() if assign[a] != assign[b])


# Exhaustive search is used automatically below this assignment-count bound.
EXHAUSTIVE_LIMIT = 1 << 14


def assign_qubits(
    graph: InteractionGraph, capacities: Sequence[int], method: str = "auto"
) -> list[int]:
    """Assign each qubit a device index, minimizing the cut weight.

    `method`: "exhaustive" (optimal, small instances), "heuristic" (greedy +
    pairwise refinement), or "auto" (exhaustive whenever the search space is
    small enough to enumerate, heuristic otherwise).
    """
    n = graph.num_qubits
    k = len(capacities)
    if k < 1:
        raise PartitionError("need at least one device")
    if any(c < 0 for c in capacities):
        raise PartitionError("negative capacity")
    if sum(capacities) < n:
        raise PartitionError(f"insufficient capacity: {sum(capacities)} slots for {n} qubits")
    if k == 1:
        return [0] * n
    if method == "auto":
        method = "exhaustive" if k**n <= EXHAUSTIVE_LIMIT else "heuristic"
    if method == "exhaustive":
        return _exhaustive(graph, capacities)
    if method == "heuristic":
        return _refine(graph, capacities, _greedy(graph, capacities))
    raise PartitionError(f"unknown partition method {method!r}")


def _exhaustive(graph: InteractionGraph, capacities: Sequence[int]) -> list[int]:
    n, k = graph.num_qubits, len(capacities)
    best: tuple[int, tuple[int, ...]] | None = None
    for assign in itertools.product(range(k), repeat=n):
        loads = [0] * k
        feasible = True
        for device in assign:
            loads[device] += 1
            if loads[device] > capacities[device]:
                feasible = False
                break
        if not feasible:
            continue
        cut = cut_weight(graph, assign)
        if best is None or cut < best[0]:
            best = (cut, assign)
    assert best is not None  # sum(capacities) >= n guarantees a feasible assignment
    return list(best[1])


def _greedy(graph: InteractionGraph, capacities: Sequence[int]) -> list[int]:
    """Seed by descending interaction weight, attaching each qubit to the
    device holding the most weight toward it (capacity permitting)."""
    n, k = graph.num_qubits, len(capacities)
    adj = graph.adjacency()
    order = sorted(range(n), key=lambda q: (-graph.total_weight(q), q))
    assign = [-1] * n
    loads = [0] * k
    for q in order:
        attraction = [0] * k
        for other, w in adj[q]:
            if assign[other] >= 0:
                attraction[assign[other]] += w
        choices = [d for d in range(k) if loads[d] < capacities[d]]
        device = max(choices, key=lambda d: (attraction[d], -d))
        assign[q] = device
        loads[device] += 1
    return assign


def _refine(graph: InteractionGraph, capacities: Sequence[int], assign: list[int]) -> list[int]:
    """Pairwise-swap / single-move local search, best improvement first."""
    n, k = graph.num_qubits, len(capacities)
    adj = graph.adjacency()
    assign = list(assign)
    loads = [0] * k
    for d in assign:
        loads[d] += 1

    def external(q: int, device: int) -> int:
        # cut contribution of q's edges if q sat on `device`
        return sum(w for other, w in adj[q] if assign[other] != device and other != q)

    while True:
        best_gain = 0
        best_action: tuple | None = None
        for q in range(n):
            here = assign[q]
            base = external(q, here)
            for d in range(k):
                if d == here or loads[d] >= capacities[d]:
                    continue
                gain = base - external(q, d)
                if gain > best_gain:
                    best_gain, best_action = gain, ("move", q, d)
        for a in range(n):
            for b in range(a + 1, n):
                da, db = assign[a], assign[b]
                if da == db:
                    continue
                gain = external(a, da) - external(a, db) + external(b, db) - external(b, da)
                # swapping adjacent qubits double-counts their shared edge
                w_ab = graph.weights.get((a, b), 0)
                gain -= 2 * w_ab
                if gain > best_gain:
                    best_gain, best_action = gain, ("swap", a, b)
        if best_action is None:
            return assign
        if best_action[0] == "move":
            _, q, d = best_action
            loads[assign[q]] -= 1
            loads[d] += 1
            assign[q] = d
        else:
            _, a, b = best_action
            assign[a], assign[b] = assign[b], assign[a]
