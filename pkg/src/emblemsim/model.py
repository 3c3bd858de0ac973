"""Core domain vocabulary: positions, frequency bands, entities, and the
active/passive x stationary/mobile protection matrix.

Everything here is a pure value type; nothing holds mutable simulation
state, so instances can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

C_LIGHT = 299_792_458.0  # m/s

EARTH_SURFACE_MIN_M = 6.2e6
EARTH_SURFACE_MAX_M = 6.5e6
NOMINAL_EARTH_RADIUS_M = 6.371e6


class WorldMode(Enum):
    FLAT = "flat"
    EARTH = "earth"


@dataclass(frozen=True)
class Position:
    """Point in a fixed Earth-centered Cartesian frame, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate in {(self.x, self.y, self.z)}")

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters."""
    return math.dist(a.as_tuple(), b.as_tuple())


def validate_ground_position(pos: Position, mode: WorldMode) -> None:
    """Earth-surface mode pins ground entities to a shell around the geoid;
    flat mode is unconstrained."""
    if mode is WorldMode.EARTH:
        n = pos.norm()
        if not (EARTH_SURFACE_MIN_M <= n <= EARTH_SURFACE_MAX_M):
            raise ValueError(
                f"ground position norm {n:.0f} m outside "
                f"[{EARTH_SURFACE_MIN_M:.0f}, {EARTH_SURFACE_MAX_M:.0f}] in earth mode"
            )


class FrequencyBand(Enum):
    """Signal bands usable for the cross-frequency emblem.

    Enum order is the wire ordinal used by the beacon codec; do not reorder.
    """

    L_BAND = "LBand"
    X_BAND = "XBand"
    MICROWAVE = "Microwave"
    INFRARED = "Infrared"
    OPTICAL = "Optical"
    THERMAL = "Thermal"
    RFID_LF = "RFID-LF"
    RFID_HF = "RFID-HF"
    RFID_UHF = "RFID-UHF"
    WIFI = "WiFi"

    @property
    def ordinal(self) -> int:
        return _BAND_ORDINALS[self]

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "FrequencyBand":
        bands = list(cls)
        if not 0 <= ordinal < len(bands):
            raise ValueError(f"unknown band ordinal {ordinal}")
        return bands[ordinal]

    @classmethod
    def from_name(cls, name: str) -> "FrequencyBand":
        for band in cls:
            if band.value == name:
                return band
        raise ValueError(f"unknown band {name!r}")


_BAND_ORDINALS = {band: i for i, band in enumerate(FrequencyBand)}


@dataclass(frozen=True)
class BandSpec:
    """Frequency bounds and default communication range for one band."""

    band: FrequencyBand
    freq_low: float
    freq_high: float
    nominal_range: float

    def __post_init__(self) -> None:
        if not self.freq_low < self.freq_high:
            raise ValueError(f"{self.band}: freq_low must be < freq_high")
        if self.nominal_range <= 0:
            raise ValueError(f"{self.band}: nominal_range must be positive")


# Defaults for each band.  The "approximately kilometers" optical/thermal
# entries default to 2000 m, RFID to the conservative 100 m active-tag
# figure; scenarios may override any range.
DEFAULT_BANDS: dict[FrequencyBand, BandSpec] = {
    spec.band: spec
    for spec in (
        BandSpec(FrequencyBand.L_BAND, 1e9, 2e9, 1_000_000.0),
        BandSpec(FrequencyBand.X_BAND, 8e9, 12e9, 100_000.0),
        BandSpec(FrequencyBand.MICROWAVE, 1e9, 100e9, 100_000.0),
        BandSpec(FrequencyBand.INFRARED, 1e12, 100e12, 100.0),
        BandSpec(FrequencyBand.OPTICAL, 430e12, 750e12, 2000.0),
        # 9-14 um expressed as its frequency-band bounds.
        BandSpec(FrequencyBand.THERMAL, C_LIGHT / 14e-6, C_LIGHT / 9e-6, 2000.0),
        BandSpec(FrequencyBand.RFID_LF, 119e3, 135e3, 100.0),
        BandSpec(FrequencyBand.RFID_HF, 13.553e6, 13.567e6, 100.0),
        BandSpec(FrequencyBand.RFID_UHF, 860e6, 960e6, 100.0),
        BandSpec(FrequencyBand.WIFI, 2.4e9, 5.875e9, 100.0),
    )
}

RFID_BANDS = frozenset(
    {FrequencyBand.RFID_LF, FrequencyBand.RFID_HF, FrequencyBand.RFID_UHF}
)


class EntityKind(Enum):
    STATIONARY_FACILITY = "StationaryFacility"
    MOBILE_UNIT = "MobileUnit"
    PERSONNEL = "Personnel"
    WEAPON_SYSTEM = "WeaponSystem"
    SATELLITE = "Satellite"
    JAMMER = "Jammer"


class Mobility(Enum):
    STATIONARY = "Stationary"
    MOBILE = "Mobile"


ENTITY_ID_LEN = 16


def entity_id(name: str) -> bytes:
    """Encode a readable name as the opaque 16-byte identifier."""
    raw = name.encode("utf-8")
    if not raw or len(raw) > ENTITY_ID_LEN:
        raise ValueError(f"entity name must encode to 1..16 bytes: {name!r}")
    if any(c.isspace() for c in name):
        raise ValueError(f"entity name must not contain whitespace: {name!r}")
    return raw.ljust(ENTITY_ID_LEN, b"\x00")


def entity_name(ident: bytes) -> str:
    """Inverse of :func:`entity_id` for display and log lines."""
    return ident.rstrip(b"\x00").decode("utf-8", errors="replace")


@dataclass
class Entity:
    """A simulated party: facility, unit, person, weapon, satellite, jammer.

    ``ground_truth_protected`` is oracle data owned by the scenario runner;
    the engagement engine must never receive an Entity, only sensor views.
    """

    id: bytes
    kind: EntityKind
    position: Position
    mobility: Mobility
    ground_truth_protected: bool
    carried_tags: list[int] = field(default_factory=list)
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if len(self.id) != ENTITY_ID_LEN:
            raise ValueError("entity id must be exactly 16 bytes")
        if self.kind is EntityKind.STATIONARY_FACILITY and self.mobility is not Mobility.STATIONARY:
            raise ValueError("a StationaryFacility cannot be Mobile")

    @property
    def name(self) -> str:
        return entity_name(self.id)


class Sensing(Enum):
    ACTIVE = "Active"
    PASSIVE = "Passive"


@dataclass(frozen=True)
class ProtectionMode:
    sensing: Sensing
    mobility: Mobility


class VerificationStrategy(Enum):
    BEACON_PIPELINE = "BeaconPipeline"
    BEACON_PIPELINE_MOBILE = "BeaconPipelineMobile"
    PASSIVE_RECOGNITION = "PassiveRecognition"
    PASSIVE_RECOGNITION_MOBILE = "PassiveRecognitionMobile"


_PROTECTION_MATRIX = {
    ProtectionMode(Sensing.ACTIVE, Mobility.STATIONARY): VerificationStrategy.BEACON_PIPELINE,
    ProtectionMode(Sensing.ACTIVE, Mobility.MOBILE): VerificationStrategy.BEACON_PIPELINE_MOBILE,
    ProtectionMode(Sensing.PASSIVE, Mobility.STATIONARY): VerificationStrategy.PASSIVE_RECOGNITION,
    ProtectionMode(Sensing.PASSIVE, Mobility.MOBILE): VerificationStrategy.PASSIVE_RECOGNITION_MOBILE,
}


def protection_matrix_lookup(mode: ProtectionMode) -> VerificationStrategy:
    """Map a protection mode to the verification strategy a weapon must run.

    Total and pure: every one of the four sensing x mobility combinations
    has exactly one strategy.
    """
    return _PROTECTION_MATRIX[mode]
