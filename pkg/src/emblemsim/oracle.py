"""Scenario-side oracles and sensor synthesis.

This module is the only place allowed to read ground truth.  It turns truth
into the sensor views the engagement engine consumes: a noisy binary
passive classifier standing in for the out-of-scope EO/IR model, GPS
pseudoranges generated from the weapon's true position, and bearing
observations toward an emitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engagement import SensorOutOfRange
from .geo import SatelliteSignal
from .model import C_LIGHT, Position, distance


@dataclass(frozen=True)
class PassiveOracleConfig:
    """Error model of the stand-in classifier."""

    false_positive_rate: float = 0.0  # combatant reported as protected
    false_negative_rate: float = 0.0  # protected reported as combatant
    sensor_range_m: float = 2000.0
    confidence_low: float = 0.7
    confidence_high: float = 0.99

    def __post_init__(self) -> None:
        for rate in (self.false_positive_rate, self.false_negative_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("error rates must be in [0, 1]")
        if not 0.0 <= self.confidence_low <= self.confidence_high <= 1.0:
            raise ValueError("confidence bounds must satisfy 0 <= low <= high <= 1")


def passive_recognize(
    truth_protected: bool,
    config: PassiveOracleConfig,
    rng: np.random.Generator,
    distance_m: float = 0.0,
) -> tuple[str, float]:
    """Oracle classification: ground truth flipped at the configured rates.

    Raises SensorOutOfRange beyond the EO/IR sensor range.  Deterministic
    for a given generator state.
    """
    if distance_m > config.sensor_range_m:
        raise SensorOutOfRange(
            f"target at {distance_m:.0f} m beyond {config.sensor_range_m:.0f} m sensor range"
        )
    flip_draw = rng.random()
    conf_draw = rng.random()
    if truth_protected:
        label = "combatant" if flip_draw < config.false_negative_rate else "protected"
    else:
        label = "protected" if flip_draw < config.false_positive_rate else "combatant"
    confidence = config.confidence_low + conf_draw * (
        config.confidence_high - config.confidence_low
    )
    return label, confidence


def make_satellite_signals(
    satellites: list[tuple[str, Position]],
    receiver_pos: Position,
    clock_bias_s: float = 0.0,
    noise_sigma_m: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[SatelliteSignal]:
    """Pseudoranges from the receiver's true position (forward model)."""
    signals = []
    for sat_id, sat_pos in satellites:
        rho = distance(sat_pos, receiver_pos) + C_LIGHT * clock_bias_s
        if noise_sigma_m > 0:
            if rng is None:
                raise ValueError("noisy pseudoranges need an rng")
            rho += noise_sigma_m * rng.standard_normal()
        signals.append(SatelliteSignal(sat_id, sat_pos, rho))
    return signals


def bearing_observation(
    observer_pos: Position,
    emitter_pos: Position,
    noise_sigma_deg: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    """Unit bearing vector from observer toward emitter, with angular noise
    applied in the plane perpendicular to the true direction."""
    d = np.array(emitter_pos.as_tuple()) - np.array(observer_pos.as_tuple())
    n = np.linalg.norm(d)
    if n == 0:
        raise ValueError("observer coincides with the emitter")
    d = d / n
    if noise_sigma_deg > 0:
        if rng is None:
            raise ValueError("noisy bearings need an rng")
        sigma = math.radians(noise_sigma_deg)
        # orthonormal basis perpendicular to d
        helper = np.array([1.0, 0.0, 0.0])
        if abs(d[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        u = np.cross(d, helper)
        u = u / np.linalg.norm(u)
        v = np.cross(d, u)
        d = d + sigma * rng.standard_normal() * u + sigma * rng.standard_normal() * v
        d = d / np.linalg.norm(d)
    return (float(d[0]), float(d[1]), float(d[2]))
