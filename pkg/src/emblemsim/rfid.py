"""Tag inventory over a shared slotted channel (framed slotted ALOHA and
binary tree search) plus the emblem challenge-response exchange.

Tag ids are 96-bit, EPC-like.  The tree walk queries id prefixes MSB-first;
the bitwise-arbitration variant from the anti-collision literature behaves
identically in this channel model and is not a separate code path.
"""

from __future__ import annotations

import random
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .channel import JamMode, JammerField, flip_bits
from .model import FrequencyBand, Position, distance

TAG_ID_BITS = 96


class TagKind(Enum):
    WEAPON = "WeaponTag"
    EMBLEM = "EmblemTag"


class TagPower(Enum):
    PASSIVE = "Passive"
    ACTIVE = "Active"


@dataclass
class Tag:
    """An RFID tag fixed to a weapon or carrying an emblem id."""

    tag_id: int
    kind: TagKind
    powered: TagPower
    emblem_id: bytes | None = None
    owner: bytes | None = None
    position: Position | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.tag_id < 1 << TAG_ID_BITS:
            raise ValueError("tag_id must fit in 96 bits")
        if self.kind is TagKind.EMBLEM and self.emblem_id is None:
            raise ValueError("an EmblemTag must reference an emblem id")

    def effective_range(self, nominal_range_m: float) -> float:
        # Passive tags are powered by the reader: half the band range.
        if self.powered is TagPower.PASSIVE:
            return nominal_range_m / 2
        return nominal_range_m


@dataclass
class InventoryResult:
    identified: frozenset[int]
    slots_used: int
    queries_used: int
    trace: list[str] = field(default_factory=list)


def tags_in_reader_range(
    tags: Sequence[Tag], reader_pos: Position, nominal_range_m: float
) -> list[Tag]:
    """Tags close enough to answer this reader, sorted by id."""
    hearable = [
        t
        for t in tags
        if t.position is not None
        and distance(t.position, reader_pos) <= t.effective_range(nominal_range_m)
    ]
    return sorted(hearable, key=lambda t: t.tag_id)


def inventory_aloha(
    tags_in_range: Sequence[Tag],
    frame_size: int,
    max_rounds: int,
    rng: random.Random,
) -> InventoryResult:
    """Framed slotted ALOHA: every unidentified tag picks a slot uniformly
    each round; singleton slots identify their tag.

    At least one frame is always announced, so an empty field still costs
    ``frame_size`` slots.  Partial results are allowed when ``max_rounds``
    runs out.
    """
    if frame_size < 1:
        raise ValueError("frame_size must be >= 1")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    pending = sorted(tags_in_range, key=lambda t: t.tag_id)
    _check_unique(pending)
    identified: set[int] = set()
    trace: list[str] = []
    slots_used = 0
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        slots: dict[int, list[Tag]] = {}
        for tag in pending:
            slots.setdefault(rng.randrange(frame_size), []).append(tag)
        slots_used += frame_size
        for slot in range(frame_size):
            occupants = slots.get(slot, [])
            if not occupants:
                trace.append(f"round={rounds} slot={slot} outcome=idle")
            elif len(occupants) == 1:
                tag = occupants[0]
                identified.add(tag.tag_id)
                trace.append(
                    f"round={rounds} slot={slot} outcome=singleton tag={tag.tag_id:024x}"
                )
            else:
                trace.append(
                    f"round={rounds} slot={slot} outcome=collision count={len(occupants)}"
                )
        pending = [t for t in pending if t.tag_id not in identified]
        if not pending:
            break
    return InventoryResult(frozenset(identified), slots_used, rounds, trace)


def inventory_tree(tags_in_range: Sequence[Tag]) -> InventoryResult:
    """Deterministic binary tree walk on tag-id prefixes, MSB first.

    Collisions split the prefix, idle branches are pruned, singletons
    identify.  Complete: every tag in range is identified.
    """
    ordered = sorted(tags_in_range, key=lambda t: t.tag_id)
    _check_unique(ordered)
    ids = [t.tag_id for t in ordered]
    identified: set[int] = set()
    trace: list[str] = []
    queries = 0
    # stack of (prefix, prefix_bits); LIFO with the 0-branch on top
    stack: list[tuple[int, int]] = [(0, 0)]
    while stack:
        prefix, bits = stack.pop()
        queries += 1
        lo = prefix << (TAG_ID_BITS - bits) if bits else 0
        hi = (prefix + 1) << (TAG_ID_BITS - bits) if bits else 1 << TAG_ID_BITS
        first = bisect_left(ids, lo)
        last = bisect_left(ids, hi)
        count = last - first
        label = f"{prefix:0{bits}b}" if bits else "(root)"
        if count == 0:
            trace.append(f"query prefix={label} outcome=idle")
        elif count == 1:
            identified.add(ids[first])
            trace.append(f"query prefix={label} outcome=singleton tag={ids[first]:024x}")
        else:
            trace.append(f"query prefix={label} outcome=collision count={count}")
            stack.append(((prefix << 1) | 1, bits + 1))
            stack.append((prefix << 1, bits + 1))
    return InventoryResult(frozenset(identified), queries, queries, trace)


def _check_unique(tags: Sequence[Tag]) -> None:
    ids = [t.tag_id for t in tags]
    if len(set(ids)) != len(ids):
        raise ValueError("tag ids must be unique within a scenario")


class ChallengeOutcome(Enum):
    CONFIRMED = "Confirmed"
    NO_RESPONSE = "NoResponse"
    MISMATCH = "Mismatch"


@dataclass(frozen=True)
class ChallengeResult:
    outcome: ChallengeOutcome
    echoed_emblem_id: bytes | None = None


def challenge_response(
    reader_pos: Position,
    challenge_emblem_id: bytes,
    tags: Sequence[Tag],
    nominal_range_m: float,
    jammers: Sequence[JammerField] = (),
    rng: np.random.Generator | None = None,
    band: FrequencyBand | None = None,
) -> ChallengeResult:
    """Challenge the field for an emblem id and listen for the tag echo.

    The in-range emblem tag carrying the challenged id answers; failing
    that, the nearest in-range emblem tag does (a decoy produces Mismatch).
    A block jammer on the RFID band, or an empty field, yields NoResponse.
    """

    def applies(j: JammerField) -> bool:
        return (band is None or j.band is band) and j.covers(reader_pos)

    candidates = [
        t
        for t in tags_in_reader_range(tags, reader_pos, nominal_range_m)
        if t.kind is TagKind.EMBLEM
    ]
    if not candidates:
        return ChallengeResult(ChallengeOutcome.NO_RESPONSE)
    responder = next(
        (t for t in candidates if t.emblem_id == challenge_emblem_id),
        min(candidates, key=lambda t: (distance(t.position, reader_pos), t.tag_id)),
    )
    if any(j.mode is JamMode.BLOCK and applies(j) for j in jammers):
        return ChallengeResult(ChallengeOutcome.NO_RESPONSE)
    echo = responder.emblem_id or b""
    for jammer in jammers:
        if jammer.mode is JamMode.BIT_FLIP and applies(jammer):
            if rng is None:
                raise ValueError("bit-flip jamming requires an rng")
            echo, _ = flip_bits(echo, jammer.rate, rng)
    if echo == challenge_emblem_id:
        return ChallengeResult(ChallengeOutcome.CONFIRMED, echo)
    return ChallengeResult(ChallengeOutcome.MISMATCH, echo)
