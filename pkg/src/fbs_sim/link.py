"""Forward model: SINR, rate, transmission latency, compute delay, totals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORM_SLACK = 1e-9


class ZeroRateError(ValueError):
    """A turbine has zero rate: the latency is unbounded.

    Raised instead of returning infinity so optimization line searches can
    reject the point deterministically.
    """

    def __init__(self, turbine_indices):
        self.turbine_indices = list(turbine_indices)
        super().__init__(f"zero rate for turbines {self.turbine_indices}")


@dataclass
class BeamformerSet:
    """Per-turbine beamformers at one waypoint; all vectors live in the
    closed unit 2-norm ball."""

    fbs_uplink: np.ndarray       # (K, N)
    turbine_uplink: np.ndarray   # (K, M)
    fbs_downlink: np.ndarray     # (K, N)
    turbine_downlink: np.ndarray  # (K, M)

    def validate(self):
        for name in ("fbs_uplink", "turbine_uplink", "fbs_downlink",
                     "turbine_downlink"):
            norms = np.linalg.norm(getattr(self, name), axis=-1)
            if np.any(norms > 1.0 + NORM_SLACK):
                raise ValueError(f"{name} norm exceeds unit ball: {norms.max()}")

    def max_norm(self) -> float:
        return max(float(np.linalg.norm(getattr(self, n), axis=-1).max())
                   for n in ("fbs_uplink", "turbine_uplink",
                             "fbs_downlink", "turbine_downlink"))


@dataclass
class PowerAllocation:
    downlink: np.ndarray  # (K,) W
    compute: np.ndarray   # (K,) W

    def total(self) -> float:
        return float(np.sum(self.downlink) + np.sum(self.compute))

    def validate(self, budget: float):
        if np.any(self.downlink <= 0) or np.any(self.compute <= 0):
            raise ValueError("power allocations must be strictly positive")
        if self.total() > budget * (1.0 + NORM_SLACK):
            raise ValueError(
                f"allocation {self.total()} exceeds budget {budget}")


@dataclass
class WaypointLatency:
    waypoint: int
    connect: float
    uplink: float
    compute: float
    downlink: float

    @property
    def stop_total(self) -> float:
        return self.connect + self.uplink + self.compute + self.downlink


@dataclass
class LatencyBreakdown:
    flight: float
    per_waypoint: list
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.flight + sum(w.stop_total for w in self.per_waypoint)

    def as_dict(self):
        return {
            "flight_s": self.flight,
            "per_waypoint": [
                {"waypoint": w.waypoint, "connect_s": w.connect,
                 "uplink_s": w.uplink, "compute_s": w.compute,
                 "downlink_s": w.downlink, "stop_total_s": w.stop_total}
                for w in self.per_waypoint
            ],
            "total_s": self.total,
        }


# ---------------------------------------------------------------------------
# SINR / rate
# ---------------------------------------------------------------------------

def uplink_cross_gains(channels, fbs_beams, turbine_beams) -> np.ndarray:
    """E[k, l] = w_k^H H_l v_l for all pairs; channels is (K, N, M)."""
    received = np.einsum("lnm,lm->ln", channels, turbine_beams)  # H_l v_l
    return np.einsum("kn,ln->kl", fbs_beams.conj(), received)


def downlink_cross_gains(channels, turbine_beams, fbs_beams) -> np.ndarray:
    """F[k, l] = v_k^H G_k w_l: interference at turbine k flows through its
    own channel for every FBS beam; channels is (K, M, N)."""
    effective = np.einsum("km,kmn->kn", turbine_beams.conj(), channels)  # v_k^H G_k
    return np.einsum("kn,ln->kl", effective, fbs_beams)


def sinr_from_cross_gains(cross, powers, noise) -> np.ndarray:
    gains = np.abs(cross) ** 2 * np.asarray(powers)[None, :]
    signal = np.diagonal(gains).copy()
    interference = gains.sum(axis=1) - signal
    return signal / (interference + noise)


def sinr_uplink(k, channels, beams: BeamformerSet, powers, noise) -> float:
    if noise <= 0:
        raise ValueError("noise power must be > 0")
    cross = uplink_cross_gains(channels, beams.fbs_uplink, beams.turbine_uplink)
    return float(sinr_from_cross_gains(cross, powers, noise)[k])


def sinr_downlink(k, channels, beams: BeamformerSet, alloc: PowerAllocation,
                  noise) -> float:
    if noise <= 0:
        raise ValueError("noise power must be > 0")
    cross = downlink_cross_gains(channels, beams.turbine_downlink,
                                 beams.fbs_downlink)
    return float(sinr_from_cross_gains(cross, alloc.downlink, noise)[k])


def rate(sinr) -> float:
    return float(np.log2(1.0 + sinr))


def transmission_latency(rates, payload_bits, bandwidth) -> float:
    """Slowest turbine sets the waypoint's transmission time."""
    rates = np.asarray(rates, dtype=float)
    payload_bits = np.asarray(payload_bits, dtype=float)
    zero = np.flatnonzero(rates <= 0)
    if zero.size:
        raise ZeroRateError(zero)
    return float(np.max(payload_bits / (bandwidth * rates)))


def argmax_latency_turbine(rates, payload_bits, bandwidth) -> int:
    """Index of the binding turbine; the lowest index wins exact ties."""
    lat = np.asarray(payload_bits, dtype=float) / (bandwidth * np.asarray(rates, dtype=float))
    return int(np.argmax(lat))


def compute_latency(compute_powers, compute_intensity, processor_coefficient,
                    payload_bits) -> float:
    """Sum of per-turbine inference delays under the cube-root CPU power law."""
    p = np.asarray(compute_powers, dtype=float)
    if np.any(p <= 0):
        raise ValueError("compute power must be > 0 for every turbine")
    d = np.asarray(payload_bits, dtype=float)
    cycles = compute_intensity * d
    freq = (p / processor_coefficient) ** (1.0 / 3.0)
    return float(np.sum(cycles / freq))


def total_latency(flight_duration, per_waypoint) -> LatencyBreakdown:
    return LatencyBreakdown(flight=flight_duration, per_waypoint=list(per_waypoint))
