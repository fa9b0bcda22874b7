import pytest

import hrcplan


@pytest.fixture(scope="module")
def bundled():
    return hrcplan.Scenario.bundled()


def test_bundled_shape(bundled):
    ids = bundled.graph_ids()
    assert "termination" in ids
    assert len(ids) == 9


def test_plan_has_a_path_per_graph(bundled):
    plan = bundled.plan()
    assert plan["termination"]["arcs"]
    assert all(p is None or p["cost"] >= 0 for p in plan.values())


def test_noise_free_makespans(bundled):
    c = bundled.compare(noise=False)
    assert c["concurrent"] == pytest.approx(310.19)
    assert c["sequential"] == pytest.approx(556.94)
    assert c["status"] == ["solved", "solved"]


def test_simulation_is_seeded(bundled):
    a = bundled.simulate(seed=4)
    b = bundled.simulate(seed=4)
    assert a == b
    assert a["status"] == "solved"
    assert a["visit_order"]["youbot"]


def test_report_text(bundled):
    assert "task planner" in bundled.report(noise=False)


def test_round_trip(bundled):
    again = hrcplan.Scenario.from_yaml(bundled.to_yaml())
    assert again.plan() == bundled.plan()


def test_errors_are_typed():
    with pytest.raises(hrcplan.ParseError):
        hrcplan.Scenario.from_yaml("graphs: [")
    with pytest.raises(hrcplan.NotFound):
        hrcplan.Scenario.bundled().export_dot("nope")
    with pytest.raises(hrcplan.Error):
        hrcplan.Scenario.from_file("/nonexistent.yaml")


def test_session_rejects_premature_gesture(bundled):
    s = hrcplan.Session(bundled, noise=False)
    h = s.state_hash()
    r = s.submit({"type": "gesture", "gesture": "put down"})
    assert not r["accepted"]
    assert r["error"] == "protocol-violation"
    assert s.state_hash() == h
    out = s.advance(10)
    assert out["snapshot"]["t"] == 10
    assert s.log()


def test_session_with_simulated_operator(bundled):
    s = hrcplan.Session(bundled, noise=False, simulate_operator=True)
    for _ in range(10):
        if s.snapshot()["status"] != "running":
            break
        s.advance(100)
    assert s.snapshot()["status"] == "solved"
