"""Scenario files: JSON description of agents, initial graph, update rule, feedback and run settings.

Schema::

    {
      "name": str,
      "agents": [{"id", "input_tags", "output_tags",
                  "kernel": {"kind", "params"}, "initial_state", "initial_output"}],
      "graph": {"active": [ids], "edges": [[src, dst], ...]},
      "rule": {"kind": "constant" | "activate_on_output" | "rewire_on_feedback" | "composed", ...},
      "feedback": [{"t", "agent", "source", "payload": {"tag", "payload"}}],
      "run": {"mode", "max_steps", "seed", "workers", "stop": {"kind", ...}}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

from .core import EMPTY, AgentSpec, AgentState, FeedbackSignal, Value
from .runtime import RunConfig, StoppingCriterion
from .scenarios.kernels import KERNELS
from .topology import ActivateOnOutput, ComposedRule, RewirePolicy, TopologyGraph, constant_rule

RULE_KINDS = ("constant", "activate_on_output", "rewire_on_feedback", "composed")


class ConfigError(ValueError):
    """Invalid scenario file; the message names the offending field or line."""


def _req(obj: Mapping, key: str, where: str, kind=None):
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected an object")
    if key not in obj:
        raise ConfigError(f"{where}.{key}: required field missing")
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__ if isinstance(kind, type) else kind}")
    return v


def _tags(obj, key, where) -> tuple:
    v = _req(obj, key, where, list)
    if not v or not all(isinstance(t, str) for t in v):
        raise ConfigError(f"{where}.{key}: must be a non-empty list of strings")
    return tuple(sorted(set(v)))


def _edges(v, where) -> tuple:
    if not isinstance(v, list):
        raise ConfigError(f"{where}: expected a list of [src, dst] pairs")
    out = []
    for i, e in enumerate(v):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
            raise ConfigError(f"{where}[{i}]: expected [src, dst]")
        out.append((e[0], e[1]))
    return tuple(out)


def _value(obj, where) -> Value:
    if not isinstance(obj, Mapping) or "tag" not in obj:
        raise ConfigError(f"{where}: expected {{\"tag\", \"payload\"}}")
    return Value(obj["tag"], obj.get("payload"))


@dataclass(frozen=True)
class AgentConfig:
    id: str
    input_tags: tuple
    output_tags: tuple
    kernel: str
    params: dict = field(default_factory=dict)
    initial_state: Any = None
    initial_output: Value = EMPTY

    def to_json(self) -> dict:
        return {"id": self.id, "input_tags": list(self.input_tags), "output_tags": list(self.output_tags),
                "kernel": {"kind": self.kernel, "params": self.params},
                "initial_state": self.initial_state, "initial_output": self.initial_output.to_json()}

    def build(self) -> AgentSpec:
        kernel = KERNELS[self.kernel](self.params)
        return AgentSpec(self.id, self.input_tags, self.output_tags, kernel,
                         AgentState(self.initial_state), self.initial_output)


@dataclass(frozen=True)
class FeedbackEntry:
    t: int
    agent: str
    source: str
    payload: Value

    def to_json(self) -> dict:
        return {"t": self.t, "agent": self.agent, "source": self.source, "payload": self.payload.to_json()}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    agents: tuple
    graph: TopologyGraph
    rule: dict
    feedback: tuple
    run: RunConfig

    def to_json(self) -> dict:
        return {"name": self.name, "agents": [a.to_json() for a in self.agents],
                "graph": self.graph.to_json(), "rule": self.rule,
                "feedback": [f.to_json() for f in self.feedback], "run": self.run.to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        run = self.run
        if "max_steps" in kw and run.stop.kind == "fixed_steps":
            run = replace(run, stop=StoppingCriterion("fixed_steps", steps=kw["max_steps"]))
        return replace(self, run=replace(run, **kw))

    def build(self):
        """``(agents, initial_graph, rule, feedback_schedule, run_config)`` ready for ``runtime.run``."""
        agents = [a.build() for a in self.agents]
        schedule = {(f.t, f.agent): FeedbackSignal(f.source, f.payload, f.t) for f in self.feedback}
        return agents, self.graph, build_rule(self.rule), schedule, self.run


def _parse_rule(obj, where, ids) -> dict:
    kind = _req(obj, "kind", where, str)
    if kind not in RULE_KINDS:
        raise ConfigError(f"{where}.kind: unknown rule {kind!r}; expected one of {RULE_KINDS}")

    def known(agent, at):
        if agent not in ids:
            raise ConfigError(f"{at}: unknown agent {agent!r}")

    if kind == "constant":
        return {"kind": kind}
    if kind == "activate_on_output":
        out = {"kind": kind, "tag": _req(obj, "tag", where, str),
               "activate": sorted(_req(obj, "activate", where, list)),
               "add_edges": [list(e) for e in _edges(obj.get("add_edges", []), f"{where}.add_edges")]}
        for a in out["activate"]:
            known(a, f"{where}.activate")
        for e in out["add_edges"]:
            known(e[0], f"{where}.add_edges"), known(e[1], f"{where}.add_edges")
        if obj.get("source") is not None:
            known(obj["source"], f"{where}.source")
            out["source"] = obj["source"]
        return out
    if kind == "rewire_on_feedback":
        out = {"kind": kind, "agent": _req(obj, "agent", where, str),
               "feedback_tag": _req(obj, "feedback_tag", where, str),
               "add": [list(e) for e in _edges(obj.get("add", []), f"{where}.add")],
               "remove": [list(e) for e in _edges(obj.get("remove", []), f"{where}.remove")]}
        known(out["agent"], f"{where}.agent")
        for e in out["add"] + out["remove"]:
            known(e[0], where), known(e[1], where)
        if "payload" in obj:
            out["payload"] = obj["payload"]
        return out
    rules = _req(obj, "rules", where, list)
    return {"kind": kind, "rules": [_parse_rule(r, f"{where}.rules[{i}]", ids) for i, r in enumerate(rules)]}


def build_rule(spec: Mapping):
    kind = spec["kind"]
    if kind == "constant":
        return constant_rule
    if kind == "activate_on_output":
        return ActivateOnOutput(spec["tag"], tuple(spec["activate"]),
                                tuple(tuple(e) for e in spec["add_edges"]), spec.get("source"))
    if kind == "rewire_on_feedback":
        agent, tag = spec["agent"], spec["feedback_tag"]
        add = [tuple(e) for e in spec["add"]]
        remove = [tuple(e) for e in spec["remove"]]
        has_payload, payload = "payload" in spec, spec.get("payload")

        def scorer(graph_prev, snapshot, feedback_all):
            sig = feedback_all.get(agent)
            if sig is None or sig.payload.type_tag != tag:
                return {}
            if has_payload and sig.payload.payload != payload:
                return {}
            scores = {e: 1.0 for e in add}
            scores.update({e: 0.0 for e in remove})
            return scores

        return RewirePolicy(0.5, 0.5, scorer)
    return ComposedRule(tuple(build_rule(r) for r in spec["rules"]))


def _parse_stop(obj, where) -> StoppingCriterion:
    kind = _req(obj, "kind", where, str)
    try:
        return StoppingCriterion(kind, obj.get("steps"), obj.get("agent"), obj.get("tag"), obj.get("payload"))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_scenario(obj: Mapping) -> ScenarioConfig:
    if not isinstance(obj, Mapping):
        raise ConfigError("scenario: expected a JSON object at top level")
    name = obj.get("name", "scenario")
    raw_agents = _req(obj, "agents", "scenario", list)
    if not raw_agents:
        raise ConfigError("scenario.agents: at least one agent is required")
    agents, ids = [], set()
    for i, a in enumerate(raw_agents):
        where = f"agents[{i}]"
        aid = _req(a, "id", where, str)
        if aid in ids:
            raise ConfigError(f"{where}.id: duplicate agent id {aid!r}")
        ids.add(aid)
        k = _req(a, "kernel", where, dict)
        kind = _req(k, "kind", f"{where}.kernel", str)
        if kind not in KERNELS:
            raise ConfigError(f"{where}.kernel.kind: unknown kernel {kind!r}")
        params = k.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{where}.kernel.params: expected an object")
        init_out = _value(a["initial_output"], f"{where}.initial_output") if "initial_output" in a else EMPTY
        agents.append(AgentConfig(aid, _tags(a, "input_tags", where), _tags(a, "output_tags", where),
                                  kind, params, a.get("initial_state"), init_out))

    g = _req(obj, "graph", "scenario", dict)
    active = _req(g, "active", "graph", list)
    for x in active:
        if x not in ids:
            raise ConfigError(f"graph.active: unknown agent {x!r}")
    edges = _edges(g.get("edges", []), "graph.edges")
    for i, (s, d) in enumerate(edges):
        for end in (s, d):
            if end not in ids:
                raise ConfigError(f"graph.edges[{i}]: unknown agent {end!r}")
    graph = TopologyGraph(active, edges)

    rule = _parse_rule(obj.get("rule", {"kind": "constant"}), "rule", ids)

    feedback = []
    for i, f in enumerate(obj.get("feedback", [])):
        where = f"feedback[{i}]"
        t = _req(f, "t", where, int)
        agent = _req(f, "agent", where, str)
        if agent not in ids:
            raise ConfigError(f"{where}.agent: unknown agent {agent!r}")
        source = _req(f, "source", where, str)
        if source not in ("human", "environment", "agent"):
            raise ConfigError(f"{where}.source: must be human, environment or agent")
        feedback.append(FeedbackEntry(t, agent, source, _value(_req(f, "payload", where), f"{where}.payload")))
    keys = [(f.t, f.agent) for f in feedback]
    if len(set(keys)) != len(keys):
        raise ConfigError("feedback: two signals scheduled for the same (t, agent)")
    feedback.sort(key=lambda f: (f.t, f.agent))

    r = obj.get("run", {})
    try:
        max_steps = int(r.get("max_steps", 10))
        stop = _parse_stop(r["stop"], "run.stop") if "stop" in r else StoppingCriterion("fixed_steps", steps=max_steps)
        run = RunConfig(r.get("mode", "synchronous"), max_steps, stop, int(r.get("seed", 42)), int(r.get("workers", 1)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"run: {exc}") from None
    return ScenarioConfig(name, tuple(agents), graph, rule, tuple(feedback), run)


def loads_scenario(text: str, origin: str = "<string>") -> ScenarioConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_scenario(obj)
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from None


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    return loads_scenario(path.read_text(), str(path))


def builtin_scenario_path(name: str) -> Path:
    """Path of a bundled scenario (``flight_booking``, ``warehouse``, ``iomas_flight``)."""
    p = resources.files("masim") / "scenarios" / f"{name}.json"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return Path(str(p))


def resolve_scenario(ref: str) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    return builtin_scenario_path(ref)


def load_json(path) -> Optional[dict]:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
