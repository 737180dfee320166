import json

import pytest
from fastapi.testclient import TestClient

from fbs_sim import __version__
from fbs_sim.scenario import serialize_scenario
from fbs_sim.service import app

from conftest import desk_config


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def scenario_doc():
    return json.loads(serialize_scenario(desk_config(1)))


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"] == __version__


def test_run_endpoint(client, scenario_doc):
    resp = client.post("/run", json={"scenario": scenario_doc, "seed": 7})
    assert resp.status_code == 200
    body = resp.json()
    assert body["latency"]["total_s"] > body["latency"]["flight_s"] > 0
    assert set(body["artifacts"]) == {"latency.json", "latency.csv",
                                      "convergence.csv", "route.csv",
                                      "manifest.json"}
    assert body["manifest"]["seed"] == 7


def test_run_rejects_invalid_scenario(client):
    resp = client.post("/run", json={"scenario": {"schema_version": 99}})
    assert resp.status_code == 400
    assert resp.json()["error"] == "invalid_scenario"


def test_run_infeasible_threshold_conflict(client, scenario_doc):
    doc = dict(scenario_doc)
    doc["sinr_threshold"] = 1e6  # 60 dB
    doc["noise_power"] = 1e-4    # noise floor pushes the SNR bound below it
    resp = client.post("/run", json={"scenario": doc})
    assert resp.status_code == 409
    body = resp.json()
    assert body["error"] == "infeasible_threshold"
    assert body["turbines"]


def test_power_sweep_endpoint(client, scenario_doc):
    resp = client.post("/sweep/power",
                       json={"scenario": scenario_doc,
                             "power_dbm": [38.0, 42.0], "seed": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["rows"]) == 4  # 2 waypoints x 2 power levels
    assert body["csv"].startswith("waypoint,power_dbm,cumulative_latency")


def test_baselines_endpoint(client, scenario_doc):
    resp = client.post("/baselines/compare",
                       json={"scenario": scenario_doc, "seed": 1,
                             "baseline": "equal"})
    assert resp.status_code == 200
    body = resp.json()
    assert [r["strategy"] for r in body["rows"]] == ["proposed", "equal"]


def test_access_endpoint(client, scenario_doc):
    resp = client.post("/access/compare", json={"scenario": scenario_doc})
    assert resp.status_code == 200
    rows = resp.json()["rows"]
    assert len(rows) == 2
    assert all(r["rap"] > r["edt"] for r in rows)


def test_generate_endpoint(client):
    resp = client.post("/scenario/generate",
                       json={"n_turbines": 6, "n_waypoints": 2,
                             "width_m": 5000.0, "height_m": 2000.0, "seed": 3})
    assert resp.status_code == 200
    doc = resp.json()["scenario"]
    assert len(doc["turbines"]) == 6
    assert len(doc["waypoints"]) == 2
    # generated documents load back through the run endpoint
    run = client.post("/run", json={"scenario": doc})
    assert run.status_code == 200


def test_solver_options_validation(client, scenario_doc):
    resp = client.post("/run", json={"scenario": scenario_doc,
                                     "options": {"max_outer_iterations": 0}})
    assert resp.status_code == 422
