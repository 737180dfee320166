"""Seeded channel construction: link budget, URA steering, Rician mixing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import (ArrayGeometry, Position3D, ScenarioConfig, Turbine,
                       Waypoint, SPEED_OF_LIGHT)


@dataclass(frozen=True)
class AngleSet:
    azimuth: float    # rad, (-pi, pi]
    elevation: float  # rad, [-pi/2, pi/2]


@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray
    geometry: ArrayGeometry


@dataclass(frozen=True)
class PathLoss:
    fspl_db: float
    rain_db: float
    gas_db: float
    rx_gain_db: float

    @property
    def total_db(self) -> float:
        return self.fspl_db + self.rain_db + self.gas_db - self.rx_gain_db

    @property
    def total_amplitude(self) -> float:
        # Field-amplitude factor: the channel matrix is multiplied by this,
        # so the dB total divides by 20, not 10.
        return 10.0 ** (-self.total_db / 20.0)


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray   # complex, uplink N x M or downlink M x N
    path_loss: PathLoss
    rician_factor: float
    seed: int


def angles_between(tx: Position3D, rx: Position3D) -> AngleSet:
    """Azimuth/elevation measured at `tx` looking toward `rx`."""
    dx, dy, dz = rx.x - tx.x, rx.y - tx.y, rx.z - tx.z
    if dx == 0.0 and dy == 0.0 and dz == 0.0:
        raise ValueError("coincident positions have no bearing")
    horizontal = math.hypot(dx, dy)
    return AngleSet(azimuth=math.atan2(dy, dx),
                    elevation=math.atan2(dz, horizontal))


def ura_zeta(geometry: ArrayGeometry, angles: AngleSet) -> np.ndarray:
    """Per-element phase argument of a uniform rectangular array.

    Flat index m corresponds to (m_x - 1) * ny + m_y with 1-based element
    indices along the two panel axes.
    """
    ct = math.cos(angles.elevation)
    cp, sp = math.cos(angles.azimuth), math.sin(angles.azimuth)
    mx = np.repeat(np.arange(geometry.nx), geometry.ny)
    my = np.tile(np.arange(geometry.ny), geometry.nx)
    return mx * (ct * cp) + my * (ct * sp)


def steering(geometry: ArrayGeometry, zeta: np.ndarray) -> SteeringVector:
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (geometry.n_elements,):
        raise ValueError(
            f"zeta length {zeta.shape} does not match panel ({geometry.n_elements})")
    entries = np.exp(1j * 2.0 * np.pi * geometry.spacing_over_wavelength * zeta)
    return SteeringVector(entries=entries, geometry=geometry)


def steer_toward(geometry: ArrayGeometry, origin: Position3D,
                 target: Position3D) -> np.ndarray:
    return steering(geometry, ura_zeta(geometry, angles_between(origin, target))).entries


def free_space_path_loss_db(distance: float, frequency: float) -> float:
    if distance <= 0 or frequency <= 0:
        raise ValueError("distance and frequency must be > 0")
    return 20.0 * math.log10(4.0 * math.pi * distance * frequency / SPEED_OF_LIGHT)


def link_path_loss(turbine: Turbine, waypoint: Waypoint,
                   config: ScenarioConfig) -> PathLoss:
    d = turbine.position.distance_to(waypoint.position)
    return PathLoss(
        fspl_db=free_space_path_loss_db(d, config.carrier_frequency),
        rain_db=config.rain_attenuation_db,
        gas_db=config.gas_attenuation_db,
        rx_gain_db=config.rx_gain_db,
    )


def _nlos_draw(rng, shape) -> np.ndarray:
    # Standard complex Gaussian: unit variance per entry.
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def build_channel_pair(turbine: Turbine, waypoint: Waypoint,
                       config: ScenarioConfig, seed: int,
                       force_reciprocal_nlos: bool = False):
    """Construct the uplink (N x M) and downlink (M x N) channel matrices.

    Rician mixing of a rank-1 line-of-sight outer product with seeded
    CN(0,1) scatter; path loss enters as a field-amplitude factor. One
    counter-based substream per (waypoint, turbine, direction) keeps draws
    independent of iteration order. `force_reciprocal_nlos` is a test hook
    that reuses the uplink scatter, conjugate-transposed, on the downlink.
    """
    pl = link_path_loss(turbine, waypoint, config)
    eps = config.rician_factor
    n, m = config.fbs_panel.n_elements, turbine.panel.n_elements

    a_bs = steer_toward(config.fbs_panel, waypoint.position, turbine.position)
    a_k = steer_toward(turbine.panel, turbine.position, waypoint.position)

    los_coeff = math.sqrt(eps / (eps + 1.0))
    nlos_coeff = math.sqrt(1.0 / (eps + 1.0))

    rng_ul = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(waypoint.id, turbine.id, 0)))
    rng_dl = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(waypoint.id, turbine.id, 1)))

    h_bar = _nlos_draw(rng_ul, (n, m))
    g_bar = h_bar.conj().T if force_reciprocal_nlos else _nlos_draw(rng_dl, (m, n))

    h_los = np.outer(a_bs, a_k.conj())   # N x M
    g_los = np.outer(a_k, a_bs.conj())   # M x N

    amp = pl.total_amplitude
    h = ChannelMatrix(entries=amp * (los_coeff * h_los + nlos_coeff * h_bar),
                      path_loss=pl, rician_factor=eps, seed=seed)
    g = ChannelMatrix(entries=amp * (los_coeff * g_los + nlos_coeff * g_bar),
                      path_loss=pl, rician_factor=eps, seed=seed)
    return h, g


def build_waypoint_channels(waypoint: Waypoint, config: ScenarioConfig,
                            seed: int):
    """Channel pairs for every turbine assigned to a waypoint, in set order."""
    pairs = [build_channel_pair(t, waypoint, config, seed)
             for t in config.waypoint_turbines(waypoint)]
    uplink = np.stack([h.entries for h, _ in pairs]) if pairs else np.empty((0,))
    downlink = np.stack([g.entries for _, g in pairs]) if pairs else np.empty((0,))
    return uplink, downlink, [h.path_loss for h, _ in pairs]
