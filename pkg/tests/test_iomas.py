import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masim.config import builtin_scenario_path, load_json
from masim.core import StructuralError
from masim.iomas import (
    AgentDirectory,
    Allowed,
    Blocked,
    DirectoryRecord,
    DispatchError,
    Envelope,
    GatewayPolicy,
    GatewayRule,
    McpHeader,
    McpMessage,
    ToolExecutionError,
    VersionConflict,
    BUILTIN_TOOLS,
    derive_acp_graph,
    directory_query,
    directory_register,
    gateway_filter,
    mcp_dispatch,
    parse_version,
    run_demo,
)
from oracles import brute_acp_edges


def rec(agent, ins=("a",), outs=("b",), caps=(), version="1.0"):
    return DirectoryRecord(agent, ins, outs, caps, version)


def msg(tool="echo", auth=None, body=None, task_type=""):
    return McpMessage(McpHeader(tool, auth, task_type), body)


class TestDirectory:
    def test_round_trip(self):
        r = rec("x", caps=("c",))
        d = directory_register(AgentDirectory(), r)
        assert d.lookup("x") == r
        assert DirectoryRecord.from_json(r.to_json()) == r

    def test_versions(self):
        d = AgentDirectory([rec("x", version="2.0")])
        with pytest.raises(VersionConflict):
            d.register(rec("x", version="1.0"))
        with pytest.raises(VersionConflict):
            d.register(rec("x", version="2.0"))
        d.register(rec("x", version="2.0.1"))
        assert d.lookup("x").version == "2.0.1"
        assert parse_version("1.10") > parse_version("1.9")
        with pytest.raises(ValueError):
            parse_version("1.x")

    def test_query(self):
        assert directory_query(AgentDirectory(), "c") == []
        d = AgentDirectory([rec("z", caps=("c",)), rec("b", caps=("d",)), rec("a", caps=("c", "d"))])
        assert directory_query(d, "c") == ["a", "z"]
        assert directory_query(d, "nope") == []

    def test_query_independent_of_registration_order(self):
        recs = [rec(f"a{i}", caps=("c",) if i % 2 else ()) for i in range(10)]
        ref = AgentDirectory(recs).query("c")
        for seed in range(5):
            shuffled = recs[:]
            random.Random(seed).shuffle(shuffled)
            assert AgentDirectory(shuffled).query("c") == ref

    def test_empty_tags_rejected(self):
        with pytest.raises(ValueError):
            rec("x", ins=())


class TestAcp:
    def test_examples(self):
        g = derive_acp_graph([rec("j", ("x",), ("text",)), rec("i", ("text", "audio"), ("y",))])
        assert g.edges == {("j", "i")}
        assert not derive_acp_graph([rec("p", ("a",), ("b",)), rec("q", ("c",), ("d",))]).edges

    def test_self_edge(self):
        assert derive_acp_graph([rec("s", ("t",), ("t",))]).edges == {("s", "s")}

    def test_duplicate_ids(self):
        with pytest.raises(StructuralError):
            derive_acp_graph([rec("x"), rec("x")])

    def test_flight_scenario_against_all_pairs(self):
        records = load_json(builtin_scenario_path("iomas_flight"))["records"]
        g = derive_acp_graph(DirectoryRecord.from_json(r) for r in records)
        assert g.edges == brute_acp_edges(records)
        assert g.sorted_edges() == [("payment", "promotion"), ("search", "payment"),
                                    ("ui", "promotion"), ("ui", "search")]

    @settings(max_examples=100, deadline=None)
    @given(data=st.data())
    def test_matches_brute_force(self, data):
        n = data.draw(st.integers(1, 20))
        tags = st.sets(st.sampled_from("abcdefgh"), min_size=1, max_size=3)
        records = [{"agent": f"n{i}", "input_tags": sorted(data.draw(tags)),
                    "output_tags": sorted(data.draw(tags))} for i in range(n)]
        g = derive_acp_graph(DirectoryRecord.from_json(r) for r in records)
        assert g.edges == brute_acp_edges(records)


class TestDispatch:
    def test_examples(self):
        assert mcp_dispatch(BUILTIN_TOOLS, msg("echo", body={"k": 1})).payload == {"k": 1}
        assert mcp_dispatch(BUILTIN_TOOLS, msg("sum", body=[1, 2, 3])).payload == 6

    def test_unknown_tool_named(self):
        with pytest.raises(DispatchError, match="frobnicate"):
            mcp_dispatch(BUILTIN_TOOLS, msg("frobnicate"))

    def test_tool_failure_wrapped(self):
        with pytest.raises(ToolExecutionError):
            mcp_dispatch(BUILTIN_TOOLS, msg("sum", body=["x", 1]))

    def test_wire_round_trip(self):
        env = Envelope("ui", "search", msg("search_flights", "tok", {"budget": 1}, "search"))
        line = env.to_wire()
        assert line.startswith('{"src":"ui","dst":"search","header":{"tool":"search_flights","auth":"tok",')
        assert Envelope.from_wire(line) == env


class TestGateway:
    def test_allow_all_identity(self):
        m = msg(auth="t")
        assert gateway_filter(GatewayPolicy((GatewayRule("all", "allow"),)), "a", "b", m) == Allowed(m, "all")

    def test_deny_glob(self):
        p = GatewayPolicy((GatewayRule("evil", "deny", src="evil-*"),), default="allow")
        assert gateway_filter(p, "evil-bot", "b", msg()) == Blocked("evil")
        assert isinstance(gateway_filter(p, "good", "b", msg()), Allowed)

    def test_redaction(self):
        p = GatewayPolicy((GatewayRule("r", "allow", when={"auth": "present"}, transform="redact_auth"),))
        out = gateway_filter(p, "a", "b", msg(auth="secret", body={"x": 1}))
        assert out.msg == msg(auth=None, body={"x": 1})

    def test_first_match_wins(self):
        p = GatewayPolicy((GatewayRule("d", "deny", dst="pay"), GatewayRule("a", "allow")))
        assert gateway_filter(p, "a", "pay", msg()) == Blocked("d")

    def test_default(self):
        assert gateway_filter(GatewayPolicy(), "a", "b", msg()) == Blocked("default")

    def test_bad_rules(self):
        with pytest.raises(ValueError):
            GatewayRule("x", "maybe")
        with pytest.raises(ValueError):
            GatewayRule("x", "allow", transform="encrypt")

    @settings(max_examples=200)
    @given(src=st.sampled_from(["ui", "evil-1", "pay"]), dst=st.sampled_from(["ui", "pay", "x"]),
           auth=st.sampled_from([None, "t"]), tool=st.sampled_from(["echo", "charge"]),
           default=st.sampled_from(["allow", "deny"]))
    def test_totality(self, src, dst, auth, tool, default):
        p = GatewayPolicy((GatewayRule("e", "deny", src="evil-*"),
                           GatewayRule("p", "allow", dst="pay", when={"auth": "present", "tool": "charge"})),
                          default)
        out = gateway_filter(p, src, dst, msg(tool, auth))
        assert isinstance(out, (Allowed, Blocked))


class TestDemo:
    def scenario(self):
        return load_json(builtin_scenario_path("iomas_flight"))

    def test_counts_and_soundness(self):
        res = run_demo(self.scenario())
        assert res.sent == 7 and res.delivered == 5 and res.blocked == 2
        assert res.delivered + res.blocked == res.sent
        allowed = {e["t"] for e in res.events if e["decision"] == "allowed"}
        assert {d["t"] for d in res.deliveries} == allowed

    def test_auth_redacted_before_delivery(self):
        res = run_demo(self.scenario())
        assert all(d["header"]["auth"] is None for d in res.deliveries)

    def test_event_field_order(self):
        line = run_demo(self.scenario()).events_jsonl().splitlines()[0]
        assert line == '{"t":1,"src":"ui","dst":"search","decision":"allowed","rule":"internal"}'

    def test_deny_payment_ingress(self):
        sc = self.scenario()
        sc["policy"] = {"default": "allow", "rules": [{"id": "no-pay", "action": "deny", "dst": "payment"}]}
        res = run_demo(sc)
        assert not any(d["dst"] == "payment" for d in res.deliveries)
        assert all(e["rule"] == "no-pay" for e in res.events if e["dst"] == "payment")

    def test_default_allow_delivers_unchanged(self):
        sc = self.scenario()
        sc["policy"] = {"default": "allow", "rules": []}
        res = run_demo(sc)
        assert res.delivered == res.sent
        sent_headers = [m["header"] for m in sc["messages"]]
        assert [d["header"] for d in res.deliveries] == sent_headers
