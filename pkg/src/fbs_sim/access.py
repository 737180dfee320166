"""Connection-establishment timing: 4-step RAP vs 2-step EDT."""

from __future__ import annotations

from dataclasses import dataclass

from .scenario import SPEED_OF_LIGHT, ScenarioConfig, Waypoint

# Message counts per procedure: the 4-step exchange is two round trips,
# the 2-step early-data-transmission exchange is one.
MESSAGE_COUNTS = {"rap": 4, "edt": 2}

DEFAULT_AIRTIME = 1e-3            # s per message
DEFAULT_PROCESSING = 0.5e-3       # s per message per node


@dataclass(frozen=True)
class AccessTiming:
    procedure: str                      # "rap" | "edt"
    per_message_airtime: float = DEFAULT_AIRTIME
    propagation_delay: float = 0.0      # s, one way
    processing_delay_per_node: float = DEFAULT_PROCESSING

    def __post_init__(self):
        if self.procedure not in MESSAGE_COUNTS:
            raise ValueError(f"unknown access procedure {self.procedure!r}")
        for name in ("per_message_airtime", "propagation_delay",
                     "processing_delay_per_node"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def connection_time(timing: AccessTiming, n_devices: int) -> float:
    """Total establishment time; devices connect sequentially."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    msgs = MESSAGE_COUNTS[timing.procedure]
    per_device = msgs * (timing.per_message_airtime + timing.propagation_delay
                         + timing.processing_delay_per_node)
    return n_devices * per_device


def waypoint_connection_time(waypoint: Waypoint, config: ScenarioConfig,
                             procedure: str | None = None) -> float:
    """Establishment time at a waypoint with per-turbine propagation delays."""
    procedure = procedure or config.access_procedure
    total = 0.0
    for t in config.waypoint_turbines(waypoint):
        prop = t.position.distance_to(waypoint.position) / SPEED_OF_LIGHT
        timing = AccessTiming(procedure=procedure, propagation_delay=prop)
        total += connection_time(timing, 1)
    return total
