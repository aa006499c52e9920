import json

import pytest

from masim import cli
from masim.config import (
    ConfigError,
    builtin_scenario_path,
    load_scenario,
    loads_scenario,
    parse_scenario,
)
from masim.runtime import Trace


def run_cli(capsys, *argv):
    rc = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


def trace_of(capsys, name, *extra):
    rc, out, _ = run_cli(capsys, "run", name, *extra)
    assert rc == 0
    return Trace.from_jsonl(out)


# --- config ------------------------------------------------------------------

@pytest.mark.parametrize("name", ["flight_booking", "warehouse"])
def test_round_trip(name):
    sc = load_scenario(builtin_scenario_path(name))
    again = parse_scenario(json.loads(sc.dumps()))
    assert again.to_json() == sc.to_json()


def test_empty_agent_list():
    with pytest.raises(ConfigError, match="agents"):
        parse_scenario({"agents": [], "graph": {"active": []}})


def test_field_path_diagnostics():
    obj = json.loads(builtin_scenario_path("warehouse").read_text())
    obj["agents"][2]["kernel"]["kind"] = "nope"
    with pytest.raises(ConfigError, match=r"agents\[2\]\.kernel\.kind"):
        parse_scenario(obj)
    obj = json.loads(builtin_scenario_path("warehouse").read_text())
    obj["graph"]["edges"].append(["r1", "ghost"])
    with pytest.raises(ConfigError, match="ghost"):
        parse_scenario(obj)


def test_json_syntax_reports_line_and_column():
    with pytest.raises(ConfigError, match=r"cfg\.json:2:"):
        loads_scenario('{"agents": [\n  oops]}', "cfg.json")


# --- run ---------------------------------------------------------------------

def test_flight_promotion_only_after_booking(capsys):
    tr = trace_of(capsys, "flight_booking")
    booked = [r.t for r in tr.steps if r.agents.get("payment", {}).get("output", {}).get("tag") == "booking_confirmed"]
    promo = [r.t for r in tr.steps if "promotion" in r.agents]
    assert booked and promo
    assert min(promo) > min(booked)
    assert all("promotion" not in r.graph.active for r in tr.steps if r.t < min(booked))
    ads = [r.t for r in tr.steps if r.agents.get("promotion", {}).get("output", {}).get("tag") == "advertisement"]
    assert ads and min(ads) > min(booked)


def test_warehouse_rewire_after_defect(capsys):
    tr = trace_of(capsys, "warehouse")
    by_t = {r.t: r for r in tr.steps}
    assert by_t[3].feedback["r3"]["payload"]["payload"] == "defect"
    assert not by_t[2].graph.has_edge("r3", "r2")
    assert by_t[4].graph.has_edge("r3", "r2")


def test_run_overrides(capsys):
    tr = trace_of(capsys, "warehouse", "--max-steps", "3")
    assert len(tr) == 3
    tr = trace_of(capsys, "warehouse", "--mode", "dag_ordered", "--max-steps", "2")
    assert len(tr) == 2


def test_run_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"agents": [}')
    rc, _, err = run_cli(capsys, "run", bad)
    assert rc == 2 and "bad.json:1:" in err


def test_dag_mode_on_cyclic_scenario(capsys):
    rc, _, err = run_cli(capsys, "run", "warehouse", "--mode", "dag_ordered")
    assert rc == 3 and "cycle" in err


@pytest.mark.parametrize("name", ["flight_booking", "warehouse"])
def test_run_deterministic(capsys, tmp_path, name):
    outs = []
    for workers in (1, 4, 1):
        p = tmp_path / f"{name}-{workers}-{len(outs)}.jsonl"
        assert run_cli(capsys, "run", name, "--workers", workers, "--out", p)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1] == outs[2]


# --- seeds -------------------------------------------------------------------

def test_seed_precedence(monkeypatch):
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    assert cli.resolve_seed(None) == 42
    assert cli.resolve_seed(None, fallback=7) == 7
    monkeypatch.setenv(cli.SEED_ENV, "11")
    assert cli.resolve_seed(None, fallback=7) == 11
    assert cli.resolve_seed(3) == 3


def test_seed_env_matches_flag(capsys, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "1")
    a = run_cli(capsys, "run", "warehouse")[1]
    b = run_cli(capsys, "run", "warehouse", "--seed", "1")[1]
    assert a == b


# --- other subcommands ---------------------------------------------------------

def test_bounds(capsys):
    rc, out, _ = run_cli(capsys, "bounds", "--k", 15, "--e", 0.3)
    obj = json.loads(out)
    assert rc == 0 and obj["bound"] == pytest.approx(0.301194, abs=1e-6) and obj["bound_ge_exact"]
    assert json.loads(run_cli(capsys, "bounds", "--k", 3, "--e", 0.1)[1])["exact"] == pytest.approx(0.028)
    assert json.loads(run_cli(capsys, "bounds", "--k", 1, "--e", 0.5)[1])["bound"] == 1.0
    rc, out, _ = run_cli(capsys, "bounds", "--k", 30, "--e", 0.3)
    assert rc == 0 and json.loads(out)["exact"] is None


def test_cost(capsys):
    rc, out, _ = run_cli(capsys, "cost", "--c-single", 1, "--c1", 1, "--c2", 1, "--steps-multi", 100,
                         "--steps-y1", 5, "--steps-y2", 4)
    obj = json.loads(out)
    assert rc == 0 and obj["cost_single"] == 100 and obj["cost_two_agent"] == 29 and obj["delta_cost"] == 71
    assert run_cli(capsys, "cost", "--c-single", 1, "--c1", 1, "--c2", 1, "--steps-multi", 0,
                   "--steps-y1", 5, "--steps-y2", 4)[0] == 2


def test_iomas_demo(capsys, tmp_path):
    p = tmp_path / "events.jsonl"
    rc, out, _ = run_cli(capsys, "iomas-demo", "--out", p)
    summary = json.loads(out)
    assert rc == 0 and summary["delivered"] + summary["blocked"] == summary["sent"] == 7
    assert len(p.read_text().splitlines()) == 7


def test_ensemble_small_grid_deterministic(capsys, tmp_path):
    args = ("ensemble", "--rho", "0,1", "--k", "1,3", "--replicates", 3, "--seed", 5)
    a = run_cli(capsys, *args)[1]
    b = run_cli(capsys, *args, "--workers", 2)[1]
    assert a == b and len(a.splitlines()) == 5


def test_ensemble_csv_dataset(capsys, tmp_path):
    from masim.ensemble.data import builtin_blobs, write_csv

    p = tmp_path / "d.csv"
    write_csv(builtin_blobs(n=900, d=4), p)
    rc, out, _ = run_cli(capsys, "ensemble", "--dataset", p, "--rho", "0", "--k", "1,9", "--replicates", 2)
    rows = out.splitlines()
    assert rc == 0 and rows[2].endswith(",,0")  # k=9 at rho=0 exceeds capacity


def test_vuln_star_and_cascade(capsys):
    rc, out, _ = run_cli(capsys, "vuln", "--experiment", "star")
    assert rc == 0 and json.loads(out)["classification"] == "attenuates"
    rc, out, _ = run_cli(capsys, "vuln", "--experiment", "cascade")
    assert rc == 0 and json.loads(out)["classification"] == "amplifies"


def test_vuln_attribution_small(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 100, "n1": 200, "m_select": 30}))
    csv_path, rep = tmp_path / "a.csv", tmp_path / "r.json"
    rc, _, _ = run_cli(capsys, "vuln", "--config", cfg, "--replicates", 2, "--out", csv_path, "--report", rep)
    assert rc == 0
    assert csv_path.read_text().startswith("arm,replicate,macro_f1\n")
    report = json.loads(rep.read_text())
    assert report["replicates"] == 2 and set(report["mean_macro_f1"]) == {
        "clean_selected", "corrupted_selected", "all_features"}


def test_workers_must_be_positive(capsys):
    assert run_cli(capsys, "bounds", "--k", 3, "--e", 0.1, "--workers", 0)[0] == 2
