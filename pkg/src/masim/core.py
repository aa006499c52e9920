"""Agents as stochastic transition kernels, and input assembly for both timing modes.

An agent is ``(input_tags, output_tags, kernel, initial_state)``. Its kernel
maps ``(previous state, input bundle, rng)`` to ``(new state, output)``; all
randomness must come from the rng it is handed, which makes a step a pure
function of its arguments.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

AgentId = str

EMPTY_TAG = "empty"


class StructuralError(ValueError):
    """Graph, agent id, or input bundle does not fit the system's structure."""


class OrderingError(StructuralError):
    """No valid update order exists (the graph has a cycle)."""


class KernelContractError(RuntimeError):
    """A kernel broke its contract (e.g. emitted an undeclared output tag)."""

    def __init__(self, message: str, agent: AgentId | None = None, t: int | None = None):
        super().__init__(message)
        self.agent = agent
        self.t = t


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Value:
    """A typed message: a content-type tag plus JSON-compatible payload."""

    type_tag: str
    payload: Any = None

    def to_json(self) -> dict:
        return {"tag": self.type_tag, "payload": self.payload}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Value":
        return cls(obj["tag"], obj.get("payload"))


EMPTY = Value(EMPTY_TAG, None)


@dataclass(frozen=True)
class AgentState:
    data: Any = None

    def to_json(self) -> Any:
        return self.data

    def serialized(self) -> str:
        return canonical_json(self.data)


@dataclass(frozen=True)
class FeedbackSignal:
    source: str  # "human" | "environment" | "agent"
    payload: Value
    t: int

    def __post_init__(self):
        if self.source not in ("human", "environment", "agent"):
            raise ValueError(f"unknown feedback source {self.source!r}")

    def to_json(self) -> dict:
        return {"source": self.source, "payload": self.payload.to_json(), "t": self.t}

    @classmethod
    def from_json(cls, obj: Mapping) -> "FeedbackSignal":
        return cls(obj["source"], Value.from_json(obj["payload"]), int(obj["t"]))


@dataclass(frozen=True)
class InputBundle:
    neighbor_outputs: Mapping[AgentId, Value] = field(default_factory=dict)
    feedback: Optional[FeedbackSignal] = None

    def without_feedback(self) -> "InputBundle":
        return InputBundle(self.neighbor_outputs, None)

    def to_json(self) -> dict:
        return {
            "neighbors": {k: v.to_json() for k, v in sorted(self.neighbor_outputs.items())},
            "feedback": None if self.feedback is None else self.feedback.to_json(),
        }


TransitionKernel = Callable[[AgentState, InputBundle, np.random.Generator], "tuple[AgentState, Value]"]


@dataclass(frozen=True)
class AgentSpec:
    id: AgentId
    input_tags: frozenset
    output_tags: frozenset
    kernel: TransitionKernel
    initial_state: AgentState = AgentState()
    initial_output: Value = EMPTY

    def __post_init__(self):
        object.__setattr__(self, "input_tags", frozenset(self.input_tags))
        object.__setattr__(self, "output_tags", frozenset(self.output_tags))
        if not self.input_tags or not self.output_tags:
            raise ValueError(f"agent {self.id!r}: input_tags and output_tags must be non-empty")


def _in_neighbors(agent: AgentId, graph) -> list[AgentId]:
    return sorted(src for (src, dst) in graph.edges if dst == agent)


def assemble_input(agent: AgentId, graph_prev, outputs_prev: Mapping[AgentId, Value],
                   feedback: Optional[FeedbackSignal] = None) -> InputBundle:
    """Bundle the previous-step outputs of ``agent``'s in-neighbors plus its feedback."""
    if agent not in graph_prev.active:
        raise StructuralError(f"agent {agent!r} is not active in the graph")
    neighbors = {}
    for src in _in_neighbors(agent, graph_prev):
        if src not in graph_prev.active:
            raise StructuralError(f"edge {src!r}->{agent!r} references an inactive agent")
        if src not in outputs_prev:
            raise StructuralError(f"no previous output recorded for {src!r}")
        neighbors[src] = outputs_prev[src]
    return InputBundle(neighbors, feedback)


def assemble_input_dag(agent: AgentId, graph, outputs_prev: Mapping[AgentId, Value],
                       outputs_current_partial: Mapping[AgentId, Value], precedence: Sequence[AgentId],
                       feedback: Optional[FeedbackSignal] = None) -> InputBundle:
    """Like :func:`assemble_input`, but in-neighbors that precede ``agent`` contribute
    their output from the current step."""
    from .topology import is_topological_order  # local: topology imports core

    if not is_topological_order(graph, precedence):
        raise OrderingError("precedence is not a valid topological order of the graph")
    if agent not in graph.active:
        raise StructuralError(f"agent {agent!r} is not active in the graph")
    rank = {a: i for i, a in enumerate(precedence)}
    mine = rank[agent]
    neighbors = {}
    for src in _in_neighbors(agent, graph):
        if rank[src] < mine:
            if src not in outputs_current_partial:
                raise StructuralError(f"preceding neighbor {src!r} has no current-step output")
            neighbors[src] = outputs_current_partial[src]
        else:
            if src not in outputs_prev:
                raise StructuralError(f"no previous output recorded for {src!r}")
            neighbors[src] = outputs_prev[src]
    return InputBundle(neighbors, feedback)


def step_agent(spec: AgentSpec, prev_state: AgentState, bundle: InputBundle,
               rng: np.random.Generator, t: int | None = None) -> tuple[AgentState, Value]:
    new_state, output = spec.kernel(prev_state, bundle, rng)
    if not isinstance(output, Value):
        raise KernelContractError(f"agent {spec.id!r} returned {type(output).__name__}, not Value", spec.id, t)
    if not isinstance(new_state, AgentState):
        raise KernelContractError(f"agent {spec.id!r} returned a non-AgentState state", spec.id, t)
    if output.type_tag not in spec.output_tags:
        raise KernelContractError(
            f"agent {spec.id!r} emitted undeclared tag {output.type_tag!r}", spec.id, t)
    return new_state, output


def substream(seed: int, agent: AgentId, t: int) -> np.random.Generator:
    """Per-agent, per-step generator from a stable hash of ``(seed, agent, t)``."""
    h = hashlib.sha256(f"{int(seed)}\x00{agent}\x00{int(t)}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(h[:16], "little")))
