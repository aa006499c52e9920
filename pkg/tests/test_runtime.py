import itertools

import pytest

from masim.config import builtin_scenario_path, load_scenario
from masim.core import AgentSpec, AgentState, FeedbackSignal, OrderingError, StructuralError, Value
from masim.runtime import RunConfig, RunError, StoppingCriterion, Trace, replay_check, run
from masim.scenarios.kernels import bernoulli_vote, counter, echo
from masim.topology import TopologyGraph, constant_rule


def cfg(steps=3, mode="synchronous", seed=1, workers=1, stop=None):
    return RunConfig(mode, steps, stop or StoppingCriterion("fixed_steps", steps=steps), seed, workers)


def chain():
    a = AgentSpec("A", {"count"}, {"count"}, counter({}), AgentState(0))
    b = AgentSpec("B", {"count"}, {"count", "empty"}, echo({}))
    return [a, b], TopologyGraph("AB", [("A", "B")])


def test_single_echo_agent_fixpoint():
    spec = AgentSpec("E", {"empty"}, {"empty"}, echo({}))
    tr = run([spec], TopologyGraph("E"), constant_rule, {}, cfg(3))
    assert len(tr) == 3
    lines = [r.to_line().replace(f'"t":{r.t}', '"t":_') for r in tr.steps]
    assert len(set(lines)) == 1


def test_chain_synchronous_one_step_lag():
    agents, g = chain()
    tr = run(agents, g, constant_rule, {}, cfg(3))
    # A emits t at step t; B sees A's step t-1 output (EMPTY at t=1)
    assert [r.agents["A"]["output"]["payload"] for r in tr.steps] == [1, 2, 3]
    assert [r.agents["B"]["output"] for r in tr.steps] == [
        {"tag": "empty", "payload": None}, {"tag": "count", "payload": 1}, {"tag": "count", "payload": 2}]


def test_chain_dag_zero_lag():
    agents, g = chain()
    tr = run(agents, g, constant_rule, {}, cfg(3, mode="dag_ordered"))
    assert [r.agents["B"]["output"]["payload"] for r in tr.steps] == [1, 2, 3]


def test_dag_cycle_rejected_before_step_one():
    agents, _ = chain()
    with pytest.raises(OrderingError):
        run(agents, TopologyGraph("AB", [("A", "B"), ("B", "A")]), constant_rule, {}, cfg(3, "dag_ordered"))


def test_kernel_violation_reports_step_and_agent():
    def kernel(s, b, r):
        n = int(s.data or 0)
        return AgentState(n + 1), Value("ok" if n < 1 else "nope")

    spec = AgentSpec("K", {"x"}, {"ok"}, kernel)
    with pytest.raises(RunError) as ei:
        run([spec], TopologyGraph("K"), constant_rule, {}, cfg(5))
    assert ei.value.t == 2 and ei.value.agent == "K"


def test_inactive_agents_not_stepped():
    agents, g = chain()
    tr = run(agents, TopologyGraph("A"), constant_rule, {}, cfg(2))
    assert all(set(r.agents) == {"A"} for r in tr.steps)


def test_structural_errors():
    agents, g = chain()
    with pytest.raises(StructuralError):
        run([], g, constant_rule, {}, cfg())
    with pytest.raises(StructuralError):
        run(agents + agents[:1], g, constant_rule, {}, cfg())
    with pytest.raises(StructuralError):
        run(agents, g, constant_rule, {(1, "Z"): FeedbackSignal("human", Value("x"), 1)}, cfg())
    with pytest.raises(StructuralError):
        run(agents, g, constant_rule, {(2, "A"): FeedbackSignal("human", Value("x"), 1)}, cfg())


def test_stopping_criteria():
    agents, g = chain()
    stop = StoppingCriterion("output_predicate", agent="B", tag="count", payload=3)
    tr = run(agents, g, constant_rule, {}, cfg(10, stop=stop))
    assert tr.steps[-1].t == 4
    spec = AgentSpec("E", {"empty"}, {"empty"}, echo({}))
    tr = run([spec], TopologyGraph("E"), constant_rule, {}, cfg(10, stop=StoppingCriterion("state_fixpoint")))
    assert len(tr) == 1
    with pytest.raises(ValueError):
        RunConfig(max_steps=0)


def _voters(error):
    specs = [AgentSpec(f"v{i}", {"label"}, {"vote"}, bernoulli_vote({"error": error})) for i in range(4)]
    fb = {(t, f"v{i}"): FeedbackSignal("environment", Value("label", 1), t) for t in range(1, 6) for i in range(4)}
    return specs, TopologyGraph([s.id for s in specs]), fb


def test_replay_equal_across_workers():
    specs, g, fb = _voters(0.3)
    a = run(specs, g, constant_rule, fb, cfg(5, seed=3, workers=1))
    b = run(specs, g, constant_rule, fb, cfg(5, seed=3, workers=4))
    assert replay_check(a, b) is None
    assert a.to_jsonl() == b.to_jsonl()


def test_replay_divergence_with_different_seeds():
    specs, g, fb = _voters(0.5)
    a = run(specs, g, constant_rule, fb, cfg(5, seed=3))
    b = run(specs, g, constant_rule, fb, cfg(5, seed=4))
    d = replay_check(a, b)
    assert d is not None and d.t >= 1 and d.field == "output"


def test_deterministic_kernels_seed_independent():
    specs, g, fb = _voters(0.0)
    a = run(specs, g, constant_rule, fb, cfg(5, seed=3))
    b = run(specs, g, constant_rule, fb, cfg(5, seed=99))
    assert replay_check(a, b) is None
    assert all(r.agents["v0"]["output"]["payload"] == 1 for r in a.steps)


def test_order_independence_synchronous():
    sc = load_scenario(builtin_scenario_path("warehouse"))
    agents, g, rule, fb, config = sc.build()
    ref = run(agents, g, rule, fb, config).to_jsonl()
    for perm in itertools.permutations(agents):
        assert run(list(perm), g, rule, fb, config).to_jsonl() == ref


def test_causality_sources_are_previous_step_in_neighbors():
    sc = load_scenario(builtin_scenario_path("warehouse"))
    tr = run(*sc.build())
    g_prev = sc.graph
    for r in tr.steps:
        for aid, rec in r.agents.items():
            assert rec["sources"] == g_prev.in_neighbors(aid)
        g_prev = r.graph


def test_trace_jsonl_round_trip():
    sc = load_scenario(builtin_scenario_path("flight_booking"))
    tr = run(*sc.build())
    text = tr.to_jsonl()
    assert Trace.from_jsonl(text).to_jsonl() == text
    assert replay_check(tr, Trace.from_jsonl(text)) is None
    first = text.splitlines()[0]
    assert first.startswith('{"agents":') and '"feedback":' in first and '"graph":' in first and '"t":1' in first


def test_replay_detects_length_difference():
    agents, g = chain()
    a = run(agents, g, constant_rule, {}, cfg(3))
    b = run(agents, g, constant_rule, {}, cfg(4))
    assert replay_check(a, b).field == "length"
