import json

import numpy as np
import pytest

from picol import harness
from picol.errors import ConfigInvalid, IncompatibleRuns, PredictorUnavailable
from picol.harness import RunLog, ScenarioConfig, compare_runs, load_config, run_scenario
from picol.network import bundled_graph, write_graph_csv
from picol.predictor import Predictor
from picol.simulator import write_trace


def cfg_of(**kw):
    raw = {"scenario": "network", "T": 120, "predictor": {"kind": "graph_diffusion", "train_days": 3}}
    raw.update(kw)
    return ScenarioConfig.from_dict(raw)


def test_defaults_and_hash():
    c = cfg_of()
    assert c.warmup == 60 and c.aggregation == 5 and c.K == 12
    assert c.controller == {"gamma": 1.0, "epsilon": 0.0, "mode": "picol"}
    assert c.config_hash() == cfg_of(seeds=[3, 9]).config_hash()
    assert c.config_hash() != cfg_of(T=180).config_hash()


@pytest.mark.parametrize("kw,field", [
    ({"warmup": 30}, "warmup"),
    ({"T": 30}, "T"),
    ({"scenario": "city"}, "scenario"),
    ({"scenario": "route"}, "route"),
    ({"bogus": 1}, "unknown keys"),
    ({"graph": "nowhere.csv"}, "graph"),
    ({"controller": {"epsilon": 1.5}}, "controller"),
    ({"predictor": {"kind": "magic"}}, "predictor.kind"),
    ({"seeds": [5, 1]}, "seeds"),
    ({"incidents": [{"edge": "8-1", "start_min": 10, "duration_min": 5}]}, "incidents[0].edge"),
    ({"incidents": [{"edge": "2-1", "start_min": 500, "duration_min": 5}]}, "incidents[0].start_min"),
    ({"trace": {"generate": {}, "replay": "x"}}, "trace"),
])
def test_config_errors_name_the_field(kw, field):
    with pytest.raises(ConfigInvalid) as exc:
        cfg_of(**kw)
    assert any(p.startswith(field) for p in exc.value.problems), exc.value.problems


def test_paths_relative_to_config(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    write_graph_csv(bundled_graph(), tmp_path / "g.csv")
    (sub / "s.yaml").write_text("scenario: network\ngraph: ../g.csv\nT: 60\n")
    c = load_config(sub / "s.yaml")
    assert c.graph == str((tmp_path / "g.csv").resolve())


def test_warmup_only_run_is_uniform():
    c = cfg_of(T=60, predictor={"kind": "persistence"})
    log = run_scenario(c, 0)
    assert log.T == 60 and log.predictor_calls.size == 0
    # warm-up fusion carries each edge's last observation
    for t in range(1, 60):
        want = np.where(log.masks[t], log.truth[t], log.fusions[t - 1])
        assert np.array_equal(log.fusions[t], want)


def test_clock_discipline():
    c = cfg_of(T=180)
    log = run_scenario(c, 1)
    assert log.predictor_calls.tolist() == list(range(60, 180, 5))
    for t in range(61, 180):
        if t % 5:
            assert np.array_equal(log.predictions[t], log.predictions[t - 1])
    assert not log.fallback.any()


def test_determinism_and_round_trip(tmp_path):
    c = cfg_of(T=120)
    a, b = run_scenario(c, 4), run_scenario(c, 4)
    assert a == b
    assert a != run_scenario(c, 5)
    a.write(tmp_path / "log")
    back = RunLog.read(tmp_path / "log")
    assert back == a
    assert back.config_hash == c.config_hash()


def test_oracle_predictor_fusion_is_truth():
    log = run_scenario(cfg_of(T=120, predictor={"kind": "oracle"}), 0)
    assert np.array_equal(log.fusions[60:], log.truth[60:])


class _Broken(Predictor):
    def _forecast(self, history, issued_at):
        raise PredictorUnavailable("offline")


def test_predictor_fallback_to_persistence(monkeypatch):
    monkeypatch.setattr(harness, "scenario_predictor", lambda *a: _Broken())
    log = run_scenario(cfg_of(T=120), 0)
    assert log.fallback[60:].all() and not log.fallback[:60].any()
    from picol.predictor import aggregate
    window = aggregate(log.fusions[0:60], 5)
    assert np.array_equal(log.predictions[60], window[-1])


def test_replayed_trace(tmp_path):
    c = cfg_of(T=120)
    trace = harness.scenario_trace(c, 0)
    write_trace(trace, tmp_path / "tr")
    r = cfg_of(T=120, trace={"replay": str(tmp_path / "tr")}, predictor={"kind": "persistence"})
    log = run_scenario(r, 0)
    assert np.array_equal(log.truth, trace.volume)


def test_centralized_mode_from_config():
    log = run_scenario(cfg_of(T=90, controller={"mode": "ew"}, predictor={"kind": "persistence"}), 0)
    assert log.T == 90


def test_link_and_route_scenarios_run():
    link = cfg_of(scenario="link", T=120, link={"floor": 1.0}, controller={"epsilon": 0.3})
    assert run_scenario(link, 0).channel == "volume"
    route = cfg_of(scenario="route", T=120, route={"origin": 12, "destination": 8, "start_min": 65},
                   incidents=[{"edge": "3-1", "start_min": 70, "duration_min": 30}])
    log = run_scenario(route, 0)
    assert log.channel == "traveltime" and "pred_only" in log.extras
    assert set(log.route_summary) == {"truth", "fusion", "prediction"}
    assert harness.route_choice_at(log, "truth", 12).startswith("12-6-4")


def test_compare_runs():
    c = cfg_of(T=120)
    logs = {s: run_scenario(c, s) for s in (0, 1)}
    comp = compare_runs(logs, logs)
    assert all(v == 0.0 for m in comp.values() for v in m.deltas.values())
    assert all(m.p_value == 1.0 for m in comp.values())
    eps = cfg_of(T=120, controller={"epsilon": 0.3})
    other = {s: run_scenario(eps, s) for s in (0, 1)}
    report = harness.comparison_report(compare_runs(logs, other, edges=["2-1"]))
    assert set(report) >= {"reconstruction_mae:2-1", "forecasting_mae:2-1", "obs_mape"}


def test_compare_incompatible():
    c = cfg_of(T=120, predictor={"kind": "persistence"})
    log = run_scenario(c, 0)
    moved = RunLog(**{**log.__dict__, "edges": list(reversed(log.edges))})
    with pytest.raises(IncompatibleRuns):
        compare_runs({0: log}, {0: moved})
    other = RunLog(**{**log.__dict__, "scenario": "link"})
    with pytest.raises(IncompatibleRuns):
        compare_runs({0: log}, {0: other})
    with pytest.raises(IncompatibleRuns):
        compare_runs({0: log}, {1: log})


def test_bundled_scenarios_differ_only_where_expected():
    net = harness.bundled_config("network").data
    allowed = {"scenario", "controller", "seeds", "incidents", "link", "route"}
    for name in ("route", "link", "link_picol0"):
        other = harness.bundled_config(name).data
        diff = {k for k in net if net[k] != other[k]}
        assert diff <= allowed, (name, diff)
        assert other["controller"]["gamma"] == net["controller"]["gamma"]
        assert other["controller"]["mode"] == net["controller"]["mode"]


def test_write_run_and_parallel_seeds(tmp_path, monkeypatch):
    c = cfg_of(T=120, seeds=[0, 1], predictor={"kind": "persistence"})
    monkeypatch.setenv("PICOL_THREADS", "2")
    logs = harness.run_many(c)
    assert logs[1] == run_scenario(c, 1)
    out = harness.write_run(tmp_path / "run", c, logs)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"] == 2 and len(summary["hourly"]) == 2
    cfg_back, logs_back = harness.read_run(out)
    assert cfg_back.config_hash() == c.config_hash()
    assert all(logs_back[s] == logs[s] for s in logs)
