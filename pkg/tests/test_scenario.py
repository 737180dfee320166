import json

import numpy as np
import pytest

from fbs_sim.scenario import (ArrayGeometry, Position3D, ScenarioConfig,
                              ScenarioError, Turbine, Waypoint,
                              assign_turbines, db_to_linear,
                              generate_synthetic_layout, linear_to_db,
                              load_scenario, serialize_scenario,
                              table_default_scenario)


def _turbine(tid, x, y, z=190.0):
    return Turbine(id=tid, position=Position3D(x=x, y=y, z=z),
                   panel=ArrayGeometry(3, 3))


def _waypoint(wid, x, y, z=1000.0, assigned=()):
    return Waypoint(id=wid, position=Position3D(x=x, y=y, z=z),
                    assigned_turbines=assigned)


def test_db_conversions_round_trip():
    for x in (1e-6, 0.1, 1.0, 250.0):
        assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)
    assert db_to_linear(0.0) == 1.0
    assert linear_to_db(100.0) == pytest.approx(20.0)


def test_position_distances():
    a = Position3D(0.0, 0.0, 0.0)
    b = Position3D(3.0, 4.0, 12.0)
    assert a.distance_to(b) == pytest.approx(13.0)
    assert a.horizontal_distance_to(b) == pytest.approx(5.0)


def test_array_geometry_element_count():
    assert ArrayGeometry(4, 4).n_elements == 16
    assert ArrayGeometry(3, 3).n_elements == 9
    with pytest.raises(ScenarioError):
        ArrayGeometry(0, 3)


def test_assign_turbines_nearest_with_lowest_id_tiebreak():
    turbines = (_turbine(0, 0.0, 0.0), _turbine(1, 1000.0, 0.0),
                _turbine(2, 500.0, 0.0))
    waypoints = (_waypoint(0, 0.0, 0.0), _waypoint(1, 1000.0, 0.0))
    cfg = assign_turbines(ScenarioConfig(
        turbines=turbines, waypoints=waypoints, fbs_panel=ArrayGeometry(4, 4)))
    assigned = {w.id: w.assigned_turbines for w in cfg.waypoints}
    assert assigned[0] == (0, 2)  # turbine 2 is equidistant; lowest wp id wins
    assert assigned[1] == (1,)


def test_partial_assignment_rejected():
    turbines = (_turbine(0, 0.0, 0.0), _turbine(1, 10.0, 0.0))
    with pytest.raises(ScenarioError, match="not assigned"):
        ScenarioConfig(turbines=turbines,
                       waypoints=(_waypoint(0, 0.0, 0.0, assigned=(0,)),),
                       fbs_panel=ArrayGeometry(4, 4))


def test_double_assignment_rejected():
    turbines = (_turbine(0, 0.0, 0.0),)
    with pytest.raises(ScenarioError, match="partition"):
        ScenarioConfig(turbines=turbines,
                       waypoints=(_waypoint(0, 0.0, 0.0, assigned=(0,)),
                                  _waypoint(1, 10.0, 0.0, assigned=(0,))),
                       fbs_panel=ArrayGeometry(4, 4))


def test_validation_catches_bad_values():
    with pytest.raises(ScenarioError):
        _turbine(0, 0.0, 0.0).__class__(
            id=0, position=Position3D(0, 0, 0), panel=ArrayGeometry(3, 3),
            uplink_tx_power=0.0)
    with pytest.raises(ScenarioError):
        Waypoint(id=0, position=Position3D(0, 0, 0), power_budget=-1.0)


def test_synthetic_layout_deterministic_and_partitioned():
    a = generate_synthetic_layout(12, 3, (9000.0, 3000.0), seed=5)
    b = generate_synthetic_layout(12, 3, (9000.0, 3000.0), seed=5)
    assert serialize_scenario(a) == serialize_scenario(b)
    assigned = [tid for w in a.waypoints for tid in w.assigned_turbines]
    assert sorted(assigned) == list(range(12))
    c = generate_synthetic_layout(12, 3, (9000.0, 3000.0), seed=6)
    assert serialize_scenario(a) != serialize_scenario(c)


def test_table_default_scenario_shape():
    cfg = table_default_scenario()
    assert len(cfg.turbines) == 173
    assert len(cfg.waypoints) == 7
    xs = [w.position.x for w in sorted(cfg.waypoints, key=lambda w: w.id)]
    assert xs[-1] - xs[0] == pytest.approx(53_640.0)
    assert cfg.fbs_panel.n_elements == 16
    assert cfg.turbines[0].panel.n_elements == 9


def test_serialize_load_round_trip():
    cfg = generate_synthetic_layout(8, 2, (5000.0, 2500.0), seed=3)
    text = serialize_scenario(cfg)
    back = load_scenario(text)
    assert serialize_scenario(back) == text


def test_load_scenario_requires_schema_version():
    with pytest.raises(ScenarioError, match="schema_version"):
        load_scenario("{}")
    with pytest.raises(ScenarioError):
        load_scenario("not json")


def test_load_scenario_db_fields_converted():
    doc = json.loads(serialize_scenario(
        generate_synthetic_layout(4, 2, (4000.0, 2000.0), seed=0)))
    doc.pop("sinr_threshold")
    doc.pop("noise_power")
    doc["sinr_threshold_db"] = -10.0
    doc["noise_power_dbm"] = -170.0
    cfg = load_scenario(doc)
    assert cfg.sinr_threshold == pytest.approx(0.1, rel=1e-12)
    assert cfg.noise_power == pytest.approx(1e-20, rel=1e-12)


def test_load_scenario_auto_assigns_when_unassigned():
    doc = json.loads(serialize_scenario(
        generate_synthetic_layout(4, 2, (4000.0, 2000.0), seed=0)))
    for w in doc["waypoints"]:
        w["assigned_turbines"] = []
    cfg = load_scenario(doc)
    assigned = [tid for w in cfg.waypoints for tid in w.assigned_turbines]
    assert sorted(assigned) == list(range(4))
