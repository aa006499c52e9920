"""The simulation loop: assemble inputs, step agents, update the topology, record.

Synchronous mode gives every agent only previous-step outputs, so agents can
be stepped in any order or in parallel. DAG mode walks a topological order
of the current graph and lets earlier agents' current-step outputs flow
forward.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .core import (
    AgentId,
    AgentSpec,
    AgentState,
    FeedbackSignal,
    InputBundle,
    KernelContractError,
    StructuralError,
    Value,
    assemble_input,
    assemble_input_dag,
    canonical_json,
    digest,
    step_agent,
    substream,
)
from .topology import (
    AgentSnapshot,
    GraphValidationError,
    TopologyGraph,
    apply_update,
    topological_order,
    validate_graph,
)

MODES = ("synchronous", "dag_ordered")


class RunError(RuntimeError):
    """A run aborted inside an agent step."""

    def __init__(self, message: str, t: int, agent: AgentId):
        super().__init__(f"step {t}, agent {agent!r}: {message}")
        self.t = t
        self.agent = agent


@dataclass(frozen=True)
class StoppingCriterion:
    """When to stop before ``max_steps``.

    ``fixed_steps`` stops after ``steps`` steps; ``output_predicate`` stops once
    ``agent`` emits ``tag`` (and ``payload`` when given); ``state_fixpoint``
    stops when no agent's serialized state changed during the step.
    """

    kind: str = "fixed_steps"
    steps: Optional[int] = None
    agent: Optional[AgentId] = None
    tag: Optional[str] = None
    payload: Any = None

    def __post_init__(self):
        if self.kind not in ("fixed_steps", "output_predicate", "state_fixpoint"):
            raise ValueError(f"unknown stopping criterion {self.kind!r}")
        if self.kind == "fixed_steps" and (self.steps is None or self.steps < 1):
            raise ValueError("fixed_steps needs steps >= 1")
        if self.kind == "output_predicate" and (self.agent is None or self.tag is None):
            raise ValueError("output_predicate needs agent and tag")

    def satisfied(self, record: "StepRecord", states_changed: bool) -> bool:
        if self.kind == "fixed_steps":
            return record.t >= self.steps
        if self.kind == "output_predicate":
            rec = record.agents.get(self.agent)
            if rec is None:
                return False
            out = rec["output"]
            return out["tag"] == self.tag and (self.payload is None or out["payload"] == self.payload)
        return not states_changed

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for k in ("steps", "agent", "tag", "payload"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out


@dataclass(frozen=True)
class RunConfig:
    mode: str = "synchronous"
    max_steps: int = 10
    stop: StoppingCriterion = StoppingCriterion("fixed_steps", steps=10)
    seed: int = 42
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_json(self) -> dict:
        return {"mode": self.mode, "max_steps": self.max_steps, "stop": self.stop.to_json(),
                "seed": self.seed, "workers": self.workers}


@dataclass
class StepRecord:
    t: int
    graph: TopologyGraph
    agents: dict  # id -> {"input_digest", "state_digest", "output", "sources"}
    feedback: dict  # id -> feedback json

    def to_json(self) -> dict:
        return {"t": self.t, "graph": self.graph.to_json(), "agents": self.agents, "feedback": self.feedback}

    def to_line(self) -> str:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, obj: Mapping) -> "StepRecord":
        return cls(int(obj["t"]), TopologyGraph.from_json(obj["graph"]), dict(obj["agents"]), dict(obj["feedback"]))


@dataclass
class Trace:
    steps: list[StepRecord] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.steps)

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        return cls([StepRecord.from_json(json.loads(line)) for line in text.splitlines() if line.strip()])

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Divergence:
    t: int
    agent: Optional[AgentId]
    field: str


def replay_check(trace_a: Trace, trace_b: Trace) -> Optional[Divergence]:
    """First point where two traces differ, or ``None`` when they are identical."""
    for ra, rb in zip(trace_a.steps, trace_b.steps):
        if ra.t != rb.t:
            return Divergence(ra.t, None, "t")
        if ra.graph != rb.graph:
            return Divergence(ra.t, None, "graph")
        for aid in sorted(set(ra.agents) | set(rb.agents)):
            a, b = ra.agents.get(aid), rb.agents.get(aid)
            if a is None or b is None:
                return Divergence(ra.t, aid, "presence")
            for key in sorted(set(a) | set(b)):
                if canonical_json(a.get(key)) != canonical_json(b.get(key)):
                    return Divergence(ra.t, aid, key)
        if canonical_json(ra.feedback) != canonical_json(rb.feedback):
            return Divergence(ra.t, None, "feedback")
    if len(trace_a) != len(trace_b):
        t = min(len(trace_a), len(trace_b)) + 1
        return Divergence(t, None, "length")
    return None


def _agent_record(bundle: InputBundle, state: AgentState, output: Value) -> dict:
    return {
        "input_digest": digest(bundle.to_json()),
        "state_digest": digest(state.to_json()),
        "output": output.to_json(),
        "sources": sorted(bundle.neighbor_outputs),
    }


def run(agents: Sequence[AgentSpec], initial_graph: TopologyGraph, rule,
        feedback_schedule: Mapping[tuple[int, AgentId], FeedbackSignal], config: RunConfig) -> Trace:
    specs = {a.id: a for a in agents}
    if len(specs) != len(agents):
        raise StructuralError("duplicate agent ids")
    if not specs:
        raise StructuralError("no agents")
    universe = set(specs)
    violations = validate_graph(initial_graph, universe)
    if violations:
        raise GraphValidationError(violations)
    for (t, aid), sig in feedback_schedule.items():
        if aid not in universe:
            raise StructuralError(f"feedback scheduled for unknown agent {aid!r}")
        if sig.t != t:
            raise StructuralError(f"feedback for {aid!r} keyed at t={t} but stamped t={sig.t}")
    if config.mode == "dag_ordered":
        topological_order(initial_graph)  # fail before step 1 on a cycle

    states = {aid: s.initial_state for aid, s in specs.items()}
    outputs = {aid: s.initial_output for aid, s in specs.items()}
    graph = initial_graph
    trace = Trace()

    def do_step(aid, bundle, t):
        try:
            return step_agent(specs[aid], states[aid], bundle, substream(config.seed, aid, t), t)
        except KernelContractError as exc:
            raise RunError(str(exc), t, aid) from exc
        except Exception as exc:
            raise RunError(f"{type(exc).__name__}: {exc}", t, aid) from exc

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for t in range(1, config.max_steps + 1):
            active = sorted(graph.active)
            fb = {aid: feedback_schedule.get((t, aid)) for aid in sorted(universe)}
            bundles: dict[AgentId, InputBundle] = {}
            results: dict[AgentId, tuple[AgentState, Value]] = {}
            if config.mode == "synchronous":
                for aid in active:
                    bundles[aid] = assemble_input(aid, graph, outputs, fb[aid])
                if pool is not None:
                    futs = {aid: pool.submit(do_step, aid, bundles[aid], t) for aid in active}
                    results = {aid: futs[aid].result() for aid in active}
                else:
                    results = {aid: do_step(aid, bundles[aid], t) for aid in active}
            else:
                order = topological_order(graph)
                current: dict[AgentId, Value] = {}
                for aid in order:
                    bundles[aid] = assemble_input_dag(aid, graph, outputs, current, order, fb[aid])
                    results[aid] = do_step(aid, bundles[aid], t)
                    current[aid] = results[aid][1]

            changed = False
            for aid in active:
                new_state, out = results[aid]
                if new_state.serialized() != states[aid].serialized():
                    changed = True
                states[aid] = new_state
                outputs[aid] = out
            snapshot = {aid: AgentSnapshot(states[aid], bundles[aid], outputs[aid]) for aid in active}
            graph = apply_update(rule, graph, snapshot, fb, universe)
            record = StepRecord(
                t=t,
                graph=graph,
                agents={aid: _agent_record(bundles[aid], states[aid], outputs[aid]) for aid in active},
                feedback={aid: sig.to_json() for aid, sig in fb.items() if sig is not None},
            )
            trace.steps.append(record)
            if config.stop.satisfied(record, changed):
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return trace
