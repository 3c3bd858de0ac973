"""GPS self-fix by pseudorange trilateration and bearings-only localization
of a beacon emitter.

Trilateration solves for position and receiver clock bias with Gauss-Newton
on the residuals  r_i = ||s_i - p|| + c*b - rho_i ; emitter localization is
the closed-form least-squares intersection of bearing rays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import C_LIGHT, Position

_STEP_TOL_M = 1e-6
_MAX_ITERATIONS = 20
_GEOMETRY_SV_RATIO = 1e-3
_PARALLEL_SV_RATIO = 1e-8


class GeoError(Exception):
    pass


class InsufficientSatellites(GeoError):
    pass


class DegenerateGeometry(GeoError):
    pass


class NoConvergence(GeoError):
    pass


class ParallelBearings(GeoError):
    pass


@dataclass(frozen=True)
class SatelliteSignal:
    sat_id: str
    sat_position: Position
    pseudorange: float  # meters: true range + c * clock bias + noise

    def __post_init__(self) -> None:
        if self.pseudorange <= 0:
            raise ValueError("pseudorange must be positive")


@dataclass(frozen=True)
class GpsFix:
    position: Position
    clock_bias_s: float
    residual_rms_m: float
    sats_used: int


def trilaterate(
    signals: Sequence[SatelliteSignal],
    initial_guess: Position | None = None,
    surface_radius_m: float | None = None,
    max_iterations: int = _MAX_ITERATIONS,
) -> GpsFix:
    """Solve position and clock bias from >= 4 pseudoranges.

    The default initial guess is the satellite centroid projected to the
    scenario's nominal surface: the sphere of ``surface_radius_m`` in earth
    mode, the z = 0 plane in flat mode.  Converges when the 4-vector step
    (bias scaled by c) drops below 1e-6 m.
    """
    if len(signals) < 4:
        raise InsufficientSatellites(f"need at least 4 satellites, got {len(signals)}")
    sats = np.array([s.sat_position.as_tuple() for s in signals], dtype=float)
    rho = np.array([s.pseudorange for s in signals], dtype=float)

    centered = sats - sats.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[-1] <= _GEOMETRY_SV_RATIO * svals[0]:
        raise DegenerateGeometry(
            f"satellite geometry near-coplanar (sv ratio {svals[-1] / svals[0]:.2e})"
        )

    if initial_guess is not None:
        p0 = np.array(initial_guess.as_tuple(), dtype=float)
    else:
        centroid = sats.mean(axis=0)
        if surface_radius_m is not None:
            n = np.linalg.norm(centroid)
            p0 = centroid * (surface_radius_m / n) if n > 0 else np.array([surface_radius_m, 0.0, 0.0])
        else:
            p0 = np.array([centroid[0], centroid[1], 0.0])

    x = np.append(p0, 0.0)  # [px, py, pz, c*b] in meters
    residuals = np.zeros(len(signals))
    for _ in range(max_iterations):
        diffs = sats - x[:3]
        ranges = np.linalg.norm(diffs, axis=1)
        if np.any(ranges == 0):
            raise NoConvergence("iterate coincided with a satellite position")
        residuals = ranges + x[3] - rho
        jac = np.hstack([-diffs / ranges[:, None], np.ones((len(signals), 1))])
        step, *_ = np.linalg.lstsq(jac, -residuals, rcond=None)
        x = x + step
        if np.linalg.norm(step) < _STEP_TOL_M:
            diffs = sats - x[:3]
            ranges = np.linalg.norm(diffs, axis=1)
            residuals = ranges + x[3] - rho
            return GpsFix(
                position=Position(float(x[0]), float(x[1]), float(x[2])),
                clock_bias_s=x[3] / C_LIGHT,
                residual_rms_m=float(np.sqrt(np.mean(residuals**2))),
                sats_used=len(signals),
            )
    raise NoConvergence(f"no convergence after {max_iterations} iterations")


def localize_emitter(
    track: Sequence[tuple[Position, Sequence[float]]],
) -> Position:
    """Least-squares intersection of bearing rays.

    Each observation is (observer position, unit bearing vector).  Returns
    the point minimizing the summed squared perpendicular distance to all
    rays; raises ParallelBearings when the bearings do not pin a point.
    """
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for origin, bearing in track:
        d = np.asarray(bearing, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("zero-length bearing vector")
        d = d / n
        proj = np.eye(3) - np.outer(d, d)
        a += proj
        b += proj @ np.asarray(origin.as_tuple(), dtype=float)
    svals = np.linalg.svd(a, compute_uv=False)
    if svals[0] == 0 or svals[-1] <= _PARALLEL_SV_RATIO * svals[0]:
        raise ParallelBearings("bearing rays are parallel or too few to intersect")
    point = np.linalg.solve(a, b)
    return Position(float(point[0]), float(point[1]), float(point[2]))
