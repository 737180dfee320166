import math

import numpy as np
import pytest

from fbs_sim.channel import (angles_between, build_channel_pair,
                             build_waypoint_channels, free_space_path_loss_db,
                             link_path_loss, steer_toward, steering, ura_zeta)
from fbs_sim.scenario import SPEED_OF_LIGHT, ArrayGeometry, Position3D

from conftest import desk_config


def test_fspl_matches_closed_form_at_random_points():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = float(rng.uniform(10.0, 50_000.0))
        f = float(rng.uniform(1e9, 30e9))
        oracle = 20.0 * math.log10(4.0 * math.pi * d * f / SPEED_OF_LIGHT)
        assert abs(free_space_path_loss_db(d, f) - oracle) < 1e-9


def test_fspl_rejects_nonpositive_inputs():
    with pytest.raises(ValueError):
        free_space_path_loss_db(0.0, 1e9)
    with pytest.raises(ValueError):
        free_space_path_loss_db(100.0, -1.0)


def test_angles_between():
    a = Position3D(0.0, 0.0, 0.0)
    b = Position3D(1.0, 1.0, math.sqrt(2.0))
    ang = angles_between(a, b)
    assert ang.azimuth == pytest.approx(math.pi / 4)
    assert ang.elevation == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        angles_between(a, a)


def test_ura_zeta_flat_index_layout():
    geom = ArrayGeometry(3, 2)
    ang = angles_between(Position3D(0, 0, 0), Position3D(3.0, 4.0, 5.0))
    zeta = ura_zeta(geom, ang)
    ct = math.cos(ang.elevation)
    cp, sp = math.cos(ang.azimuth), math.sin(ang.azimuth)
    for mx in range(3):
        for my in range(2):
            expect = mx * ct * cp + my * ct * sp
            assert zeta[mx * 2 + my] == pytest.approx(expect, abs=1e-12)


def test_steering_unit_modulus_and_phase():
    geom = ArrayGeometry(4, 4)
    ang = angles_between(Position3D(0, 0, 1000.0), Position3D(900.0, -300.0, 190.0))
    zeta = ura_zeta(geom, ang)
    vec = steering(geom, zeta)
    np.testing.assert_allclose(np.abs(vec.entries), 1.0, atol=1e-12)
    assert vec.entries[0] == pytest.approx(1.0 + 0.0j)
    expect = np.exp(1j * 2.0 * np.pi * 0.5 * zeta)
    np.testing.assert_allclose(vec.entries, expect, atol=1e-12)
    with pytest.raises(ValueError):
        steering(geom, zeta[:3])


def test_link_path_loss_amplitude_convention():
    cfg = desk_config(0)
    t = cfg.turbines[0]
    wp = cfg.waypoints[0]
    pl = link_path_loss(t, wp, cfg)
    d = t.position.distance_to(wp.position)
    assert pl.fspl_db == pytest.approx(free_space_path_loss_db(d, cfg.carrier_frequency))
    total = pl.fspl_db + cfg.rain_attenuation_db + cfg.gas_attenuation_db - cfg.rx_gain_db
    assert pl.total_db == pytest.approx(total)
    assert pl.total_amplitude == pytest.approx(10.0 ** (-total / 20.0))


def test_channel_determinism_and_seed_sensitivity():
    cfg = desk_config(0)
    t, wp = cfg.turbines[0], cfg.waypoints[0]
    h1, g1 = build_channel_pair(t, wp, cfg, seed=7)
    h2, g2 = build_channel_pair(t, wp, cfg, seed=7)
    np.testing.assert_array_equal(h1.entries, h2.entries)
    np.testing.assert_array_equal(g1.entries, g2.entries)
    h3, _ = build_channel_pair(t, wp, cfg, seed=8)
    assert not np.array_equal(h1.entries, h3.entries)


def test_channel_shapes():
    cfg = desk_config(0)
    wp = cfg.waypoints[0]
    h, g, pls = build_waypoint_channels(wp, cfg, seed=1)
    k = len(wp.assigned_turbines)
    assert h.shape == (k, 16, 9)
    assert g.shape == (k, 9, 16)
    assert len(pls) == k


def test_reciprocal_nlos_hook():
    cfg = desk_config(0)
    t, wp = cfg.turbines[0], cfg.waypoints[0]
    h, g = build_channel_pair(t, wp, cfg, seed=3, force_reciprocal_nlos=True)
    eps = cfg.rician_factor
    amp = h.path_loss.total_amplitude
    los_h = amp * math.sqrt(eps / (eps + 1.0)) * np.outer(
        steer_toward(cfg.fbs_panel, wp.position, t.position),
        steer_toward(t.panel, t.position, wp.position).conj())
    nlos_h = h.entries - los_h
    los_g = amp * math.sqrt(eps / (eps + 1.0)) * np.outer(
        steer_toward(t.panel, t.position, wp.position),
        steer_toward(cfg.fbs_panel, wp.position, t.position).conj())
    nlos_g = g.entries - los_g
    np.testing.assert_allclose(nlos_g, nlos_h.conj().T, atol=1e-15)


def test_infinite_rician_factor_gives_rank_one():
    cfg = desk_config(0, rician_factor=1e12)
    t, wp = cfg.turbines[0], cfg.waypoints[0]
    h, _ = build_channel_pair(t, wp, cfg, seed=2)
    s = np.linalg.svd(h.entries, compute_uv=False)
    assert s[1] / s[0] < 1e-5


def test_mean_frobenius_energy_matches_path_loss():
    cfg = desk_config(0)
    t, wp = cfg.turbines[0], cfg.waypoints[0]
    pl = link_path_loss(t, wp, cfg)
    n, m = 16, 9
    energies = []
    for seed in range(400):
        h, _ = build_channel_pair(t, wp, cfg, seed=seed)
        energies.append(np.linalg.norm(h.entries, "fro") ** 2)
    expect = pl.total_amplitude ** 2 * n * m
    assert np.mean(energies) == pytest.approx(expect, rel=0.03)
