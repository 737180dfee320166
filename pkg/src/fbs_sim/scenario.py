"""Scenario ingestion, synthetic layout generation, and validation.

A scenario bundles the turbine/waypoint geometry, the turbine-to-waypoint
assignment, and every physical parameter the pipeline needs. All dB-valued
document fields are converted to linear exactly once at load; internal math
is linear-domain throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np

SCHEMA_VERSION = 1

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Table-style defaults; every one of these is overridable in the document.
DEFAULT_CARRIER_FREQUENCY = 3.85e9      # Hz
DEFAULT_BANDWIDTH = 1.0                 # Hz (unit-bandwidth normalization)
DEFAULT_NOISE_POWER = 1e-20             # W  (-170 dBm)
DEFAULT_RICIAN_FACTOR = 10.0            # linear
DEFAULT_SINR_THRESHOLD = 0.1            # linear (-10 dB)
DEFAULT_RAIN_ATTENUATION_DB = 0.026
DEFAULT_GAS_ATTENUATION_DB = 0.020
DEFAULT_RX_GAIN_DB = 1.761
DEFAULT_CRUISE_SPEED = 220.0 / 3.6      # m/s (220 km/h)
DEFAULT_COMPUTE_INTENSITY = 1.0         # cycles/bit
DEFAULT_PROCESSOR_COEFFICIENT = 0.8
DEFAULT_UPLINK_TX_POWER = 1.0           # W  (30 dBm)
DEFAULT_POWER_BUDGET = 10.0             # W  (40 dBm)
DEFAULT_FBS_HEIGHT = 1000.0             # m
DEFAULT_TURBINE_HEIGHT = 190.0          # m
DEFAULT_UPLINK_PAYLOAD_BITS = 1.0
DEFAULT_DOWNLINK_PAYLOAD_BITS = 1.0


class ScenarioError(ValueError):
    """Raised on parse failures and invariant violations; names the field."""


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class Position3D:
    x: float  # m east
    y: float  # m north
    z: float  # m altitude

    def __post_init__(self):
        for name in ("x", "y", "z"):
            if not math.isfinite(getattr(self, name)):
                raise ScenarioError(f"position.{name} must be finite")
        if self.z < 0:
            raise ScenarioError("position.z must be >= 0")

    def distance_to(self, other: "Position3D") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    def horizontal_distance_to(self, other: "Position3D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform rectangular panel: nx x ny elements, spacing given as d/lambda."""

    nx: int
    ny: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ScenarioError("panel element counts must be >= 1")
        if self.spacing_over_wavelength <= 0:
            raise ScenarioError("panel.spacing_over_wavelength must be > 0")

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny


@dataclass(frozen=True)
class Turbine:
    id: int
    position: Position3D
    panel: ArrayGeometry
    uplink_payload_bits: float = DEFAULT_UPLINK_PAYLOAD_BITS
    downlink_payload_bits: float = DEFAULT_DOWNLINK_PAYLOAD_BITS
    uplink_tx_power: float = DEFAULT_UPLINK_TX_POWER  # W

    def __post_init__(self):
        if self.uplink_payload_bits <= 0:
            raise ScenarioError(f"turbine {self.id}: uplink_payload_bits must be > 0")
        if self.downlink_payload_bits <= 0:
            raise ScenarioError(f"turbine {self.id}: downlink_payload_bits must be > 0")
        if self.uplink_tx_power <= 0:
            raise ScenarioError(f"turbine {self.id}: uplink_tx_power must be > 0")


@dataclass(frozen=True)
class Waypoint:
    id: int
    position: Position3D
    power_budget: float = DEFAULT_POWER_BUDGET  # W, split over downlink + compute
    assigned_turbines: tuple = ()  # ordered turbine ids

    def __post_init__(self):
        if self.power_budget <= 0:
            raise ScenarioError(f"waypoint {self.id}: power_budget must be > 0")
        object.__setattr__(self, "assigned_turbines", tuple(self.assigned_turbines))


@dataclass(frozen=True)
class ScenarioConfig:
    turbines: tuple
    waypoints: tuple
    fbs_panel: ArrayGeometry
    carrier_frequency: float = DEFAULT_CARRIER_FREQUENCY  # Hz
    bandwidth: float = DEFAULT_BANDWIDTH                  # Hz
    noise_power: float = DEFAULT_NOISE_POWER              # W
    rician_factor: float = DEFAULT_RICIAN_FACTOR          # linear
    sinr_threshold: float = DEFAULT_SINR_THRESHOLD        # linear
    rain_attenuation_db: float = DEFAULT_RAIN_ATTENUATION_DB
    gas_attenuation_db: float = DEFAULT_GAS_ATTENUATION_DB
    rx_gain_db: float = DEFAULT_RX_GAIN_DB
    uav_cruise_speed: float = DEFAULT_CRUISE_SPEED        # m/s
    compute_intensity: float = DEFAULT_COMPUTE_INTENSITY  # cycles/bit
    processor_coefficient: float = DEFAULT_PROCESSOR_COEFFICIENT
    access_procedure: str = "edt"  # "edt" | "rap"
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "turbines", tuple(self.turbines))
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        _validate_config(self)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def turbine_by_id(self, tid: int) -> Turbine:
        return self._turbine_index[tid]

    @property
    def _turbine_index(self):
        return {t.id: t for t in self.turbines}

    def waypoint_turbines(self, waypoint: Waypoint):
        idx = self._turbine_index
        return [idx[tid] for tid in waypoint.assigned_turbines]


def _validate_config(cfg: ScenarioConfig):
    if not cfg.turbines:
        raise ScenarioError("scenario must contain >=1 turbine")
    if not cfg.waypoints:
        raise ScenarioError("scenario must contain >=1 waypoint")
    for name in ("carrier_frequency", "bandwidth", "noise_power", "sinr_threshold",
                 "uav_cruise_speed", "compute_intensity", "processor_coefficient"):
        if getattr(cfg, name) <= 0:
            raise ScenarioError(f"{name} must be > 0")
    if cfg.rician_factor < 0:
        raise ScenarioError("rician_factor must be >= 0")
    if cfg.access_procedure not in ("edt", "rap"):
        raise ScenarioError("access_procedure must be 'edt' or 'rap'")

    tids = [t.id for t in cfg.turbines]
    if len(set(tids)) != len(tids):
        raise ScenarioError("turbine ids must be unique")
    wids = [w.id for w in cfg.waypoints]
    if len(set(wids)) != len(wids):
        raise ScenarioError("waypoint ids must be unique")

    # Assignment sets must partition the turbine set.
    seen = {}
    for w in cfg.waypoints:
        for tid in w.assigned_turbines:
            if tid not in set(tids):
                raise ScenarioError(
                    f"waypoint {w.id}: assigned turbine {tid} does not exist")
            if tid in seen:
                raise ScenarioError(
                    f"turbine {tid} assigned to waypoints {seen[tid]} and {w.id}: "
                    "assignments must partition the turbine set")
            seen[tid] = w.id
    # A config with no assignments at all is a valid intermediate state
    # (assign_turbines fills it in); partial assignments are not.
    missing = set(tids) - set(seen)
    if missing and seen:
        raise ScenarioError(
            f"turbines {sorted(missing)} not assigned to any waypoint")


def assign_turbines(config: ScenarioConfig) -> ScenarioConfig:
    """Assign every turbine to its nearest waypoint (3-D distance).

    Ties break toward the lowest waypoint id. Returns a new config whose
    assignment sets partition the turbine set.
    """
    order = sorted(config.waypoints, key=lambda w: w.id)
    buckets = {w.id: [] for w in order}
    for t in sorted(config.turbines, key=lambda t: t.id):
        best = min(order, key=lambda w: (t.position.distance_to(w.position), w.id))
        buckets[best.id].append(t.id)
    new_wps = tuple(replace(w, assigned_turbines=tuple(buckets[w.id]))
                    for w in config.waypoints)
    return replace(config, waypoints=new_wps)


def generate_synthetic_layout(n_turbines: int, n_waypoints: int,
                              area: tuple, seed: int,
                              **overrides) -> ScenarioConfig:
    """Synthetic stand-in for the (non-public) real turbine coordinates.

    Turbines sit on a jittered grid inside `area` (width x height, meters)
    at turbine hub height; waypoints sit on a horizontal line spanning the
    width at FBS altitude. Deterministic for a fixed seed.
    """
    if n_waypoints < 1 or n_turbines < n_waypoints:
        raise ScenarioError("need n_turbines >= n_waypoints >= 1")
    width, height = float(area[0]), float(area[1])
    if width <= 0 or height <= 0:
        raise ScenarioError("area must have positive width and height")

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    ncols = int(math.ceil(math.sqrt(n_turbines * width / height)))
    ncols = max(ncols, 1)
    nrows = int(math.ceil(n_turbines / ncols))
    dx, dy = width / ncols, height / nrows

    turbine_height = overrides.pop("turbine_height", DEFAULT_TURBINE_HEIGHT)
    fbs_height = overrides.pop("fbs_height", DEFAULT_FBS_HEIGHT)
    turbine_panel = overrides.pop("turbine_panel", ArrayGeometry(3, 3))
    fbs_panel = overrides.pop("fbs_panel", ArrayGeometry(4, 4))
    power_budget = overrides.pop("power_budget", DEFAULT_POWER_BUDGET)

    turbines = []
    for i in range(n_turbines):
        r, c = divmod(i, ncols)
        jx, jy = rng.uniform(-0.25, 0.25, size=2)
        turbines.append(Turbine(
            id=i,
            position=Position3D(x=(c + 0.5 + jx) * dx,
                                y=(r + 0.5 + jy) * dy,
                                z=turbine_height),
            panel=turbine_panel,
        ))

    waypoints = []
    for j in range(n_waypoints):
        x = width * j / (n_waypoints - 1) if n_waypoints > 1 else width / 2.0
        waypoints.append(Waypoint(
            id=j,
            position=Position3D(x=x, y=height / 2.0, z=fbs_height),
            power_budget=power_budget,
        ))

    cfg = ScenarioConfig(turbines=tuple(turbines), waypoints=tuple(waypoints),
                         fbs_panel=fbs_panel, rng_seed=seed, **overrides)
    return assign_turbines(cfg)


def table_default_scenario(seed: int = 1) -> ScenarioConfig:
    """Headline-scale layout: 173 turbines, 7 waypoints spanning 53.64 km."""
    return generate_synthetic_layout(173, 7, (53_640.0, 18_000.0), seed)


# ---------------------------------------------------------------------------
# Document (de)serialization
# ---------------------------------------------------------------------------

def _position_from_doc(doc, where):
    try:
        return Position3D(x=float(doc["x"]), y=float(doc["y"]), z=float(doc["z"]))
    except KeyError as e:
        raise ScenarioError(f"{where}: missing position field {e.args[0]}") from e


def _panel_from_doc(doc):
    return ArrayGeometry(nx=int(doc["nx"]), ny=int(doc["ny"]),
                         spacing_over_wavelength=float(
                             doc.get("spacing_over_wavelength", 0.5)))


def load_scenario(source) -> ScenarioConfig:
    """Parse a scenario document (JSON text, dict, or path-like).

    dB-suffixed fields are converted to linear here and nowhere else.
    """
    if isinstance(source, ScenarioConfig):
        return source
    if isinstance(source, dict):
        doc = source
    else:
        text = source
        try:
            doc = json.loads(text)
        except (json.JSONDecodeError, TypeError) as e:
            raise ScenarioError(f"scenario document does not parse: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError(
            f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")

    try:
        turbines = tuple(
            Turbine(
                id=int(t["id"]),
                position=_position_from_doc(t["position"], f"turbine {t.get('id')}"),
                panel=_panel_from_doc(t["panel"]),
                uplink_payload_bits=float(
                    t.get("uplink_payload_bits", DEFAULT_UPLINK_PAYLOAD_BITS)),
                downlink_payload_bits=float(
                    t.get("downlink_payload_bits", DEFAULT_DOWNLINK_PAYLOAD_BITS)),
                uplink_tx_power=float(
                    t.get("uplink_tx_power", DEFAULT_UPLINK_TX_POWER)),
            )
            for t in doc.get("turbines", []))
        waypoints = tuple(
            Waypoint(
                id=int(w["id"]),
                position=_position_from_doc(w["position"], f"waypoint {w.get('id')}"),
                power_budget=float(w.get("power_budget", DEFAULT_POWER_BUDGET)),
                assigned_turbines=tuple(int(i) for i in w.get("assigned_turbines", ())),
            )
            for w in doc.get("waypoints", []))
    except KeyError as e:
        raise ScenarioError(f"missing required field {e.args[0]}") from e

    if "sinr_threshold_db" in doc:
        sinr_th = db_to_linear(float(doc["sinr_threshold_db"]))
    else:
        sinr_th = float(doc.get("sinr_threshold", DEFAULT_SINR_THRESHOLD))
    if "noise_power_dbm" in doc:
        noise = db_to_linear(float(doc["noise_power_dbm"]) - 30.0)
    else:
        noise = float(doc.get("noise_power", DEFAULT_NOISE_POWER))

    cfg = ScenarioConfig(
        turbines=turbines,
        waypoints=waypoints,
        fbs_panel=_panel_from_doc(doc.get("fbs_panel", {"nx": 4, "ny": 4})),
        carrier_frequency=float(doc.get("carrier_frequency", DEFAULT_CARRIER_FREQUENCY)),
        bandwidth=float(doc.get("bandwidth", DEFAULT_BANDWIDTH)),
        noise_power=noise,
        rician_factor=float(doc.get("rician_factor", DEFAULT_RICIAN_FACTOR)),
        sinr_threshold=sinr_th,
        rain_attenuation_db=float(doc.get("rain_attenuation_db", DEFAULT_RAIN_ATTENUATION_DB)),
        gas_attenuation_db=float(doc.get("gas_attenuation_db", DEFAULT_GAS_ATTENUATION_DB)),
        rx_gain_db=float(doc.get("rx_gain_db", DEFAULT_RX_GAIN_DB)),
        uav_cruise_speed=float(doc.get("uav_cruise_speed", DEFAULT_CRUISE_SPEED)),
        compute_intensity=float(doc.get("compute_intensity", DEFAULT_COMPUTE_INTENSITY)),
        processor_coefficient=float(doc.get("processor_coefficient", DEFAULT_PROCESSOR_COEFFICIENT)),
        access_procedure=str(doc.get("access_procedure", "edt")),
        rng_seed=int(doc.get("rng_seed", 0)),
    )
    # A document with no assignments gets the nearest-waypoint rule.
    if all(not w.assigned_turbines for w in cfg.waypoints):
        cfg = assign_turbines(cfg)
    return cfg


def serialize_scenario(config: ScenarioConfig) -> str:
    """Render a config back to its canonical JSON document form."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "carrier_frequency": config.carrier_frequency,
        "bandwidth": config.bandwidth,
        "noise_power": config.noise_power,
        "rician_factor": config.rician_factor,
        "sinr_threshold": config.sinr_threshold,
        "rain_attenuation_db": config.rain_attenuation_db,
        "gas_attenuation_db": config.gas_attenuation_db,
        "rx_gain_db": config.rx_gain_db,
        "uav_cruise_speed": config.uav_cruise_speed,
        "compute_intensity": config.compute_intensity,
        "processor_coefficient": config.processor_coefficient,
        "access_procedure": config.access_procedure,
        "rng_seed": config.rng_seed,
        "fbs_panel": asdict(config.fbs_panel),
        "turbines": [
            {
                "id": t.id,
                "position": asdict(t.position),
                "panel": asdict(t.panel),
                "uplink_payload_bits": t.uplink_payload_bits,
                "downlink_payload_bits": t.downlink_payload_bits,
                "uplink_tx_power": t.uplink_tx_power,
            }
            for t in config.turbines
        ],
        "waypoints": [
            {
                "id": w.id,
                "position": asdict(w.position),
                "power_budget": w.power_budget,
                "assigned_turbines": list(w.assigned_turbines),
            }
            for w in config.waypoints
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
