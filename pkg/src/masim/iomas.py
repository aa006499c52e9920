"""Agent directory, type-compatibility graph, tool dispatch and gateway policy.

All four pieces run in-process. The demo wire format is one JSON object per
line with fields ``src``, ``dst``, ``header{tool, auth, task_type}``, ``body``.
"""

from __future__ import annotations

import fnmatch
import json
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional

from .core import AgentId, StructuralError, Value


class VersionConflict(ValueError):
    pass


class DispatchError(LookupError):
    pass


class ToolExecutionError(RuntimeError):
    def __init__(self, tool: str, cause: BaseException):
        super().__init__(f"tool {tool!r} failed: {type(cause).__name__}: {cause}")
        self.tool = tool


def parse_version(version: str) -> tuple[int, ...]:
    if not version:
        raise ValueError("version must be non-empty")
    try:
        return tuple(int(p) for p in version.split("."))
    except ValueError:
        raise ValueError(f"version {version!r} is not dotted numeric") from None


# --- directory ---------------------------------------------------------------

@dataclass(frozen=True)
class DirectoryRecord:
    agent: AgentId
    input_tags: frozenset
    output_tags: frozenset
    capabilities: frozenset = frozenset()
    version: str = "1.0"

    def __post_init__(self):
        for name in ("input_tags", "output_tags", "capabilities"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if not self.input_tags or not self.output_tags:
            raise ValueError(f"record {self.agent!r}: tag sets must be non-empty")
        parse_version(self.version)

    def to_json(self) -> dict:
        return {"agent": self.agent, "input_tags": sorted(self.input_tags),
                "output_tags": sorted(self.output_tags), "capabilities": sorted(self.capabilities),
                "version": self.version}

    @classmethod
    def from_json(cls, obj: Mapping) -> "DirectoryRecord":
        return cls(obj["agent"], obj["input_tags"], obj["output_tags"],
                   obj.get("capabilities", ()), str(obj.get("version", "1.0")))


class AgentDirectory:
    """Registry of agent metadata. Reads are lock-free snapshots; writes serialize."""

    def __init__(self, records: Iterable[DirectoryRecord] = ()):
        self._records: dict[AgentId, DirectoryRecord] = {}
        self._lock = threading.Lock()
        for r in records:
            self.register(r)

    def register(self, record: DirectoryRecord) -> "AgentDirectory":
        with self._lock:
            old = self._records.get(record.agent)
            if old is not None and parse_version(record.version) <= parse_version(old.version):
                raise VersionConflict(
                    f"{record.agent!r}: version {record.version} does not supersede {old.version}")
            records = dict(self._records)
            records[record.agent] = record
            self._records = records
        return self

    def lookup(self, agent: AgentId) -> Optional[DirectoryRecord]:
        return self._records.get(agent)

    def query(self, capability: str) -> list[AgentId]:
        return sorted(a for a, r in self._records.items() if capability in r.capabilities)

    def records(self) -> list[DirectoryRecord]:
        return [self._records[a] for a in sorted(self._records)]

    def __len__(self) -> int:
        return len(self._records)


def directory_register(directory: AgentDirectory, record: DirectoryRecord) -> AgentDirectory:
    return directory.register(record)


def directory_query(directory: AgentDirectory, capability: str) -> list[AgentId]:
    return directory.query(capability)


# --- compatibility graph -------------------------------------------------------

@dataclass(frozen=True)
class AcpGraph:
    nodes: frozenset
    edges: frozenset  # (src, dst)

    def sorted_edges(self) -> list[tuple[AgentId, AgentId]]:
        return sorted(self.edges)


def derive_acp_graph(records: Iterable[DirectoryRecord]) -> AcpGraph:
    records = list(records)
    ids = [r.agent for r in records]
    if len(set(ids)) != len(ids):
        raise StructuralError("duplicate agent ids in directory records")
    # index consumers by tag so the join costs sum of matches, not |V|^2
    consumers: dict[str, set] = {}
    for r in records:
        for tag in r.input_tags:
            consumers.setdefault(tag, set()).add(r.agent)
    edges = set()
    for r in records:
        for tag in r.output_tags:
            for dst in consumers.get(tag, ()):
                edges.add((r.agent, dst))
    return AcpGraph(frozenset(ids), frozenset(edges))


# --- messages and dispatch -------------------------------------------------------

@dataclass(frozen=True)
class McpHeader:
    tool: str
    auth: Optional[str] = None
    task_type: str = ""

    def __post_init__(self):
        if not self.tool:
            raise ValueError("header.tool must be non-empty")


@dataclass(frozen=True)
class McpMessage:
    header: McpHeader
    body: Any = None


@dataclass(frozen=True)
class Envelope:
    src: AgentId
    dst: AgentId
    msg: McpMessage

    def to_wire(self) -> str:
        h = self.msg.header
        # field order is part of the wire format
        return json.dumps({"src": self.src, "dst": self.dst,
                           "header": {"tool": h.tool, "auth": h.auth, "task_type": h.task_type},
                           "body": self.msg.body}, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_wire(cls, line: str) -> "Envelope":
        obj = json.loads(line)
        return cls.from_json(obj)

    @classmethod
    def from_json(cls, obj: Mapping) -> "Envelope":
        h = obj["header"]
        return cls(obj["src"], obj["dst"],
                   McpMessage(McpHeader(h["tool"], h.get("auth"), h.get("task_type", "")), obj.get("body")))


def mcp_dispatch(registry: Mapping[str, Callable[[Any], Any]], msg: McpMessage) -> Value:
    tool = msg.header.tool
    fn = registry.get(tool)
    if fn is None:
        raise DispatchError(f"no tool registered under {tool!r}")
    try:
        out = fn(msg.body)
    except Exception as exc:
        raise ToolExecutionError(tool, exc) from exc
    return out if isinstance(out, Value) else Value(tool, out)


# --- gateway ------------------------------------------------------------------

@dataclass(frozen=True)
class Allowed:
    msg: McpMessage
    rule: str


@dataclass(frozen=True)
class Blocked:
    rule: str


def _redact_auth(msg: McpMessage) -> McpMessage:
    return replace(msg, header=replace(msg.header, auth=None))


TRANSFORMS: dict[str, Callable[[McpMessage], McpMessage]] = {"redact_auth": _redact_auth}


@dataclass(frozen=True)
class GatewayRule:
    """``src``/``dst`` are shell-style globs; ``when`` constrains the message.

    ``when`` keys: ``tool``, ``task_type`` (exact match) and ``auth``
    (``"present"`` or ``"absent"``).
    """

    id: str
    action: str  # allow | deny
    src: str = "*"
    dst: str = "*"
    when: Mapping[str, str] = field(default_factory=dict)
    transform: Optional[str] = None

    def __post_init__(self):
        if self.action not in ("allow", "deny"):
            raise ValueError(f"rule {self.id!r}: action must be allow or deny")
        if self.transform is not None and self.transform not in TRANSFORMS:
            raise ValueError(f"rule {self.id!r}: unknown transform {self.transform!r}")
        unknown = set(self.when) - {"tool", "task_type", "auth"}
        if unknown:
            raise ValueError(f"rule {self.id!r}: unknown predicate keys {sorted(unknown)}")

    def matches(self, src: AgentId, dst: AgentId, msg: McpMessage) -> bool:
        if not (fnmatch.fnmatchcase(src, self.src) and fnmatch.fnmatchcase(dst, self.dst)):
            return False
        h = msg.header
        if "tool" in self.when and h.tool != self.when["tool"]:
            return False
        if "task_type" in self.when and h.task_type != self.when["task_type"]:
            return False
        if "auth" in self.when and (self.when["auth"] == "present") != bool(h.auth):
            return False
        return True

    def to_json(self) -> dict:
        out = {"id": self.id, "action": self.action, "src": self.src, "dst": self.dst}
        if self.when:
            out["when"] = dict(self.when)
        if self.transform:
            out["transform"] = self.transform
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "GatewayRule":
        return cls(obj["id"], obj["action"], obj.get("src", "*"), obj.get("dst", "*"),
                   dict(obj.get("when", {})), obj.get("transform"))


@dataclass(frozen=True)
class GatewayPolicy:
    rules: tuple = ()
    default: str = "deny"

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.default not in ("allow", "deny"):
            raise ValueError("default action must be allow or deny")

    @classmethod
    def from_json(cls, obj: Mapping) -> "GatewayPolicy":
        return cls(tuple(GatewayRule.from_json(r) for r in obj.get("rules", ())), obj.get("default", "deny"))

    def to_json(self) -> dict:
        return {"default": self.default, "rules": [r.to_json() for r in self.rules]}


def gateway_filter(policy: GatewayPolicy, src: AgentId, dst: AgentId, msg: McpMessage):
    for rule in policy.rules:
        if rule.matches(src, dst, msg):
            if rule.action == "deny":
                return Blocked(rule.id)
            out = TRANSFORMS[rule.transform](msg) if rule.transform else msg
            return Allowed(out, rule.id)
    return Allowed(msg, "default") if policy.default == "allow" else Blocked("default")


# --- demo -----------------------------------------------------------------------

def _tool_echo(body):
    return body


def _tool_sum(body):
    return sum(body)


def _tool_search_flights(body):
    flights = [{"flight": "MA101", "price": 420}, {"flight": "MA202", "price": 365},
               {"flight": "MA303", "price": 512}]
    budget = body.get("budget", float("inf")) if isinstance(body, dict) else float("inf")
    return sorted((f for f in flights if f["price"] <= budget), key=lambda f: (f["price"], f["flight"]))


def _tool_charge(body):
    if not isinstance(body, dict) or "flight" not in body or "amount" not in body:
        raise ValueError("charge needs flight and amount")
    return {"status": "booking_confirmed", "flight": body["flight"], "amount": body["amount"]}


def _tool_promote(body):
    return {"offer": "lounge-pass", "for": body.get("flight") if isinstance(body, dict) else None}


BUILTIN_TOOLS: dict[str, Callable[[Any], Any]] = {
    "echo": _tool_echo,
    "sum": _tool_sum,
    "search_flights": _tool_search_flights,
    "charge": _tool_charge,
    "promote": _tool_promote,
}


@dataclass
class DemoResult:
    events: list  # gateway decisions: {t, src, dst, decision, rule}
    deliveries: list  # {t, src, dst, tool, output | error}
    acp_edges: list
    sent: int

    @property
    def delivered(self) -> int:
        return len(self.deliveries)

    @property
    def blocked(self) -> int:
        return sum(e["decision"] == "blocked" for e in self.events)

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e, separators=(",", ":")) + "\n" for e in self.events)

    def summary(self) -> dict:
        return {"sent": self.sent, "delivered": self.delivered, "blocked": self.blocked,
                "acp_edges": self.acp_edges, "deliveries": self.deliveries}


def run_demo(scenario: Mapping) -> DemoResult:
    """Register agents, derive the compatibility graph, then route each message.

    Scenario keys: ``records``, ``policy``, ``tools`` (names from the builtin
    registry) and ``messages`` (wire objects, sent at ``t`` = position + 1).
    """
    directory = AgentDirectory()
    for r in scenario.get("records", ()):
        directory.register(DirectoryRecord.from_json(r))
    acp = derive_acp_graph(directory.records())
    policy = GatewayPolicy.from_json(scenario.get("policy", {}))
    names = scenario.get("tools", sorted(BUILTIN_TOOLS))
    unknown = [n for n in names if n not in BUILTIN_TOOLS]
    if unknown:
        raise DispatchError(f"unknown builtin tools {unknown}")
    registry = {n: BUILTIN_TOOLS[n] for n in names}

    events, deliveries = [], []
    messages = scenario.get("messages", ())
    for t, wire in enumerate(messages, start=1):
        env = Envelope.from_json(wire)
        decision = gateway_filter(policy, env.src, env.dst, env.msg)
        allowed = isinstance(decision, Allowed)
        events.append({"t": t, "src": env.src, "dst": env.dst,
                       "decision": "allowed" if allowed else "blocked", "rule": decision.rule})
        if not allowed:
            continue
        h = decision.msg.header
        record = {"t": t, "src": env.src, "dst": env.dst,
                  "header": {"tool": h.tool, "auth": h.auth, "task_type": h.task_type}}
        try:
            record["output"] = mcp_dispatch(registry, decision.msg).to_json()
        except (DispatchError, ToolExecutionError) as exc:
            record["error"] = str(exc)
        deliveries.append(record)
    return DemoResult(events, deliveries, [list(e) for e in acp.sorted_edges()], len(messages))
