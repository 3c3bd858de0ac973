"""Simulated multi-band signal environment.

Delivery is range-gated per band, jammers either deny a band outright or
flip bits stochastically, and slotted transmissions collide with no capture
effect.  All randomness comes from a caller-supplied generator keyed by
(seed, emitter, slot), so outcomes are reproducible regardless of iteration
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Protocol, Sequence

import numpy as np

from .model import FrequencyBand, Position, distance


class Transmission(Protocol):
    """Anything deliverable: has a source position, band and reach."""

    position: Position
    band: FrequencyBand

    @property
    def effective_range(self) -> float: ...


@dataclass
class Emitter:
    """A beacon source installed on an entity."""

    owner: bytes
    band: FrequencyBand
    frame: bytes
    period_s: float
    range_multiplier: float
    position: Position
    nominal_range_m: float

    def __post_init__(self) -> None:
        if self.period_s <= 0:
            raise ValueError("emitter period must be positive")
        if not 0 < self.range_multiplier <= 1:
            raise ValueError("range_multiplier must be in (0, 1]")

    @property
    def effective_range(self) -> float:
        return self.nominal_range_m * self.range_multiplier


class JamMode(Enum):
    BLOCK = "block"
    BIT_FLIP = "bitflip"


@dataclass
class JammerField:
    owner: bytes
    band: FrequencyBand
    center: Position
    radius_m: float
    mode: JamMode
    rate: float = 0.0
    active: bool = True

    def __post_init__(self) -> None:
        if self.radius_m <= 0:
            raise ValueError("jammer radius must be positive")
        if self.mode is JamMode.BIT_FLIP and not 0 < self.rate <= 0.5:
            raise ValueError("bit-flip rate must be in (0, 0.5]")

    def covers(self, pos: Position) -> bool:
        return self.active and distance(self.center, pos) <= self.radius_m


class DeliveryStatus(Enum):
    RECEIVED = "Received"
    CORRUPTED = "Corrupted"
    BLOCKED = "Blocked"
    OUT_OF_RANGE = "OutOfRange"


@dataclass(frozen=True)
class Delivery:
    status: DeliveryStatus
    payload: bytes | None = None
    flipped_bits: int = 0


def in_range(tx: Transmission, receiver_pos: Position) -> bool:
    """Closed boundary: a receiver exactly at the range limit still hears."""
    return distance(tx.position, receiver_pos) <= tx.effective_range


def deliver(
    emitter: Emitter,
    receiver_pos: Position,
    jammers: Sequence[JammerField],
    rng: np.random.Generator,
) -> Delivery:
    """Deliver one frame.  Blocked dominates Corrupted dominates Received."""
    if not in_range(emitter, receiver_pos):
        return Delivery(DeliveryStatus.OUT_OF_RANGE)
    applicable = [j for j in jammers if j.band is emitter.band and j.covers(receiver_pos)]
    if any(j.mode is JamMode.BLOCK for j in applicable):
        return Delivery(DeliveryStatus.BLOCKED)
    payload = emitter.frame
    flipped = 0
    for jammer in applicable:
        payload, n = flip_bits(payload, jammer.rate, rng)
        flipped += n
    if flipped:
        return Delivery(DeliveryStatus.CORRUPTED, payload, flipped)
    return Delivery(DeliveryStatus.RECEIVED, payload)


def flip_bits(
    payload: bytes, rate: float, rng: np.random.Generator
) -> tuple[bytes, int]:
    """Flip each bit independently with the given probability."""
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    mask = rng.random(bits.size) < rate
    flipped = int(mask.sum())
    if not flipped:
        return payload, 0
    return np.packbits(bits ^ mask).tobytes(), flipped


class SlotOutcome(Enum):
    IDLE = "Idle"
    SINGLETON = "Singleton"
    COLLISION = "Collision"


@dataclass(frozen=True)
class SlotResult:
    outcome: SlotOutcome
    frame: bytes | None = None  # present only for singletons


def collision_set(
    transmissions: Iterable[Transmission],
    receiver_pos: Position,
    frames: Sequence[bytes] | None = None,
) -> SlotResult:
    """Classify one slot of a shared band: no capture effect, so two or more
    in-range transmissions always collide."""
    heard: list[int] = [
        i for i, tx in enumerate(transmissions) if in_range(tx, receiver_pos)
    ]
    if not heard:
        return SlotResult(SlotOutcome.IDLE)
    if len(heard) == 1:
        frame = frames[heard[0]] if frames is not None else None
        return SlotResult(SlotOutcome.SINGLETON, frame)
    return SlotResult(SlotOutcome.COLLISION)
