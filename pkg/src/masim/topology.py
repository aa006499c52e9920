"""Time-indexed interaction graphs and graph update rules.

An edge ``(j, i)`` means agent ``i`` observes agent ``j``'s output. Graphs are
immutable; update rules return new ones. Self-loops are allowed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Optional

from .core import AgentId, AgentState, FeedbackSignal, InputBundle, OrderingError, StructuralError, Value


class GraphValidationError(StructuralError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class TopologyGraph:
    active: frozenset
    edges: tuple  # sorted (src, dst) pairs; duplicates kept so validation can report them

    def __init__(self, active: Iterable[AgentId] = (), edges: Iterable[tuple[AgentId, AgentId]] = ()):
        object.__setattr__(self, "active", frozenset(active))
        object.__setattr__(self, "edges", tuple(sorted((str(s), str(d)) for s, d in edges)))

    def has_edge(self, src: AgentId, dst: AgentId) -> bool:
        return (src, dst) in set(self.edges)

    def in_neighbors(self, agent: AgentId) -> list[AgentId]:
        return sorted({s for s, d in self.edges if d == agent})

    def with_changes(self, activate=(), deactivate=(), add=(), remove=()) -> "TopologyGraph":
        active = (set(self.active) | set(activate)) - set(deactivate)
        edges = (set(self.edges) | {tuple(e) for e in add}) - {tuple(e) for e in remove}
        edges = {(s, d) for s, d in edges if s in active and d in active}
        return TopologyGraph(active, edges)

    def to_json(self) -> dict:
        return {"active": sorted(self.active), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TopologyGraph":
        return cls(obj.get("active", ()), [tuple(e) for e in obj.get("edges", ())])


@dataclass(frozen=True)
class AgentSnapshot:
    """What an update rule sees of one agent after its step."""

    state: AgentState
    input: InputBundle
    output: Value


GraphUpdateRule = Callable[
    [TopologyGraph, Mapping[AgentId, AgentSnapshot], Mapping[AgentId, Optional[FeedbackSignal]]],
    TopologyGraph,
]


def validate_graph(graph: TopologyGraph, universe: Iterable[AgentId]) -> list[str]:
    """All structural violations of ``graph`` against ``universe``; empty means valid."""
    universe = set(universe)
    violations = []
    for a in sorted(graph.active - universe):
        violations.append(f"active agent {a!r} not in the agent universe")
    seen = set()
    for src, dst in graph.edges:
        if (src, dst) in seen:
            violations.append(f"duplicate edge {src!r}->{dst!r}")
        seen.add((src, dst))
        for end in (src, dst):
            if end not in graph.active:
                violations.append(f"edge {src!r}->{dst!r} endpoint {end!r} is not active")
    return violations


def apply_update(rule: GraphUpdateRule, graph_prev: TopologyGraph, snapshot, feedback_all,
                 universe: Iterable[AgentId]) -> TopologyGraph:
    missing = sorted(a for a in graph_prev.active if a not in snapshot)
    if missing:
        raise StructuralError(f"snapshot missing active agents {missing}")
    graph = rule(graph_prev, snapshot, feedback_all)
    if not isinstance(graph, TopologyGraph):
        raise StructuralError(f"update rule returned {type(graph).__name__}, not TopologyGraph")
    violations = validate_graph(graph, universe)
    if violations:
        raise GraphValidationError(violations)
    return graph


def topological_order(graph: TopologyGraph) -> list[AgentId]:
    """Kahn's algorithm, always releasing the lexicographically smallest ready id.

    Self-loops never block an agent (it only sees its own previous output).
    Raises :class:`OrderingError` naming one cycle.
    """
    edges = {(s, d) for s, d in graph.edges if s != d}
    indeg = {a: 0 for a in graph.active}
    out = {a: [] for a in graph.active}
    for s, d in edges:
        indeg[d] += 1
        out[s].append(d)
    ready = [a for a, n in indeg.items() if n == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        a = heapq.heappop(ready)
        order.append(a)
        for d in out[a]:
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(ready, d)
    if len(order) < len(indeg):
        raise OrderingError(f"graph has a cycle: {' -> '.join(_find_cycle(edges, set(indeg) - set(order)))}")
    return order


def _find_cycle(edges, remaining) -> list[AgentId]:
    succ = {}
    for s, d in sorted(edges):
        if s in remaining and d in remaining:
            succ.setdefault(s, d)
    node = min(remaining)
    seen = []
    while node not in seen:
        seen.append(node)
        node = succ[node]
    cycle = seen[seen.index(node):]
    return cycle + [node]


def is_topological_order(graph: TopologyGraph, order) -> bool:
    order = list(order)
    if sorted(order) != sorted(graph.active):
        return False
    rank = {a: i for i, a in enumerate(order)}
    return all(rank[s] < rank[d] for s, d in graph.edges if s != d)


def constant_rule(graph_prev, snapshot, feedback_all) -> TopologyGraph:
    return graph_prev


@dataclass(frozen=True)
class RewirePolicy:
    """Feedback-driven rewiring: prune scored edges below one threshold, add above another.

    ``scorer(graph_prev, snapshot, feedback_all)`` returns a score per
    candidate edge. Existing edges scoring below ``prune_threshold`` are
    removed; absent edges scoring above ``add_threshold`` are added when both
    endpoints are active. Unscored edges are left alone.
    """

    prune_threshold: float
    add_threshold: float
    scorer: Callable[..., Mapping[tuple[AgentId, AgentId], float]]

    def __post_init__(self):
        if self.prune_threshold > self.add_threshold:
            raise ValueError("prune_threshold must not exceed add_threshold")

    def __call__(self, graph_prev, snapshot, feedback_all) -> TopologyGraph:
        scores = self.scorer(graph_prev, snapshot, feedback_all)
        present = set(graph_prev.edges)
        remove = [e for e, s in scores.items() if e in present and s < self.prune_threshold]
        add = [e for e, s in scores.items()
               if e not in present and s > self.add_threshold
               and e[0] in graph_prev.active and e[1] in graph_prev.active]
        return graph_prev.with_changes(add=add, remove=remove)


@dataclass(frozen=True)
class ActivateOnOutput:
    """Activate agents and wire edges once any agent emits a given output tag."""

    tag: str
    activate: tuple[AgentId, ...]
    add_edges: tuple[tuple[AgentId, AgentId], ...] = ()
    source: Optional[AgentId] = None  # restrict the trigger to one emitter

    def __call__(self, graph_prev, snapshot, feedback_all) -> TopologyGraph:
        fired = any(
            snap.output.type_tag == self.tag and (self.source is None or aid == self.source)
            for aid, snap in snapshot.items()
        )
        if not fired:
            return graph_prev
        return graph_prev.with_changes(activate=self.activate, add=self.add_edges)


@dataclass(frozen=True)
class ComposedRule:
    """Apply several rules in sequence."""

    rules: tuple[Any, ...]

    def __call__(self, graph_prev, snapshot, feedback_all) -> TopologyGraph:
        g = graph_prev
        for rule in self.rules:
            g = rule(g, snapshot, feedback_all)
        return g
