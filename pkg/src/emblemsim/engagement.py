"""F2T2EA engagement state machine with the emblem verification pipeline,
mobile-unit tag screening, passive-recognition hook and operator escalation.

The decision core, :func:`decide_from_evidence`, is a pure, total function
of the accumulated evidence, which lets tests brute-force the entire
product space of pipeline outcomes against it.

This module never sees ground truth.  Every input arrives as a sensor view
built by the scenario runner: beacon deliveries, satellite signals, bearing
observations, registry/RFID handles, and an opaque passive classifier.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import codec
from .channel import Delivery, DeliveryStatus, JammerField
from .geo import GeoError, GpsFix, SatelliteSignal, localize_emitter, trilaterate
from .model import (
    Mobility,
    Position,
    ProtectionMode,
    Sensing,
    VerificationStrategy,
    entity_name,
    protection_matrix_lookup,
)
from .rfid import (
    ChallengeOutcome,
    Tag,
    TagKind,
    challenge_response,
    inventory_aloha,
    inventory_tree,
    tags_in_reader_range,
)
from .trust import (
    EmblemCertificate,
    RegistryUnavailable,
    RevocationList,
    Signer,
    TrustChain,
    Verdict,
    verify_certificate,
)


class Phase(Enum):
    FIND = "Find"
    FIX = "Fix"
    TRACK = "Track"
    TARGET = "Target"
    ENGAGE = "Engage"
    ASSESS = "Assess"
    ABORTED = "Aborted"
    DISINTEGRATED = "Disintegrated"
    AWAITING_OPERATOR = "AwaitingOperator"


TERMINAL_PHASES = frozenset({Phase.ASSESS, Phase.ABORTED, Phase.DISINTEGRATED})

# Legal transitions; every step appends the edge it takes to the log.
ALLOWED_TRANSITIONS = frozenset(
    {
        (Phase.FIND, Phase.FIX),
        (Phase.FIX, Phase.TRACK),
        (Phase.TRACK, Phase.TARGET),
        (Phase.TARGET, Phase.ENGAGE),
        (Phase.TARGET, Phase.ABORTED),
        (Phase.TARGET, Phase.DISINTEGRATED),
        (Phase.TARGET, Phase.AWAITING_OPERATOR),
        (Phase.AWAITING_OPERATOR, Phase.ABORTED),
        (Phase.AWAITING_OPERATOR, Phase.TARGET),
        (Phase.ENGAGE, Phase.ASSESS),
        (Phase.ENGAGE, Phase.ABORTED),
        (Phase.ENGAGE, Phase.DISINTEGRATED),
        (Phase.ENGAGE, Phase.AWAITING_OPERATOR),
    }
)


class Outcome(Enum):
    PROCEED = "Proceed"
    ABORT = "Abort"
    DISINTEGRATE = "Disintegrate"
    ESCALATE = "Escalate"


class BeaconStatus(Enum):
    NONE = "none"  # nothing heard on any beacon band
    OK = "ok"  # at least one frame decoded
    BLOCKED = "blocked"  # carrier jammed
    UNDECODABLE = "undecodable"  # carrier present, FEC/CRC defeated


class StageStatus(Enum):
    NOT_RUN = "not_run"
    OK = "ok"
    UNAVAILABLE = "unavailable"
    SKIPPED = "skipped"  # weapon lacks the sensor (retro-fit policy)


class RegistryMatch(Enum):
    MATCH = "match"
    NO_MATCH = "no_match"
    UNAVAILABLE = "unavailable"


class TagScreen(Enum):
    ARMED_TAG_PRESENT = "ArmedTagPresent"
    NO_TAGS = "NoTags"


@dataclass
class VerificationEvidence:
    """What the pipeline has established about one target so far."""

    beacon: tuple[EmblemCertificate, Verdict] | None = None
    beacon_status: BeaconStatus = BeaconStatus.NONE
    self_fix: GpsFix | None = None
    self_fix_status: StageStatus = StageStatus.NOT_RUN
    emitter_position: Position | None = None
    emitter_loc_status: StageStatus = StageStatus.NOT_RUN
    registry_match: RegistryMatch | None = None
    rfid_confirm: ChallengeOutcome | None = None
    passive_verdict: tuple[str, float] | None = None
    tag_screen: TagScreen | None = None
    misuse: list[str] = field(default_factory=list)
    operator_override: bool = False

    def to_dict(self) -> dict:
        """Wire form for operator consoles; keys are stable."""
        cert_verdict = self.beacon[1].value if self.beacon else None
        emblem = self.beacon[0].emblem_id.hex() if self.beacon else None
        return {
            "beacon_status": self.beacon_status.value,
            "beacon_verdict": cert_verdict,
            "emblem_id": emblem,
            "gps": self.self_fix_status.value,
            "emitter_localization": self.emitter_loc_status.value,
            "registry_match": self.registry_match.value if self.registry_match else None,
            "rfid": self.rfid_confirm.value if self.rfid_confirm else None,
            "passive_label": self.passive_verdict[0] if self.passive_verdict else None,
            "passive_confidence": self.passive_verdict[1] if self.passive_verdict else None,
            "tag_screen": self.tag_screen.value if self.tag_screen else None,
            "misuse_events": list(self.misuse),
            "operator_override": self.operator_override,
        }


@dataclass(frozen=True)
class EngagementDecision:
    outcome: Outcome
    reason: str


@dataclass(frozen=True)
class LogEvent:
    sim_time: float
    phase: Phase
    code: str
    detail: str


@dataclass
class StageFlags:
    """Sensor fit of the weapon; a disabled stage forces escalation."""

    gps: bool = True
    bearing: bool = True
    registry: bool = True
    rfid: bool = True


@dataclass
class EngagementPolicy:
    on_protected: Outcome = Outcome.ABORT  # or DISINTEGRATE for missiles
    mobile_screening: bool = True
    inventory: str = "tree"  # or "aloha"
    aloha_frame_size: int = 16
    aloha_max_rounds: int = 32
    passive_enabled: bool = True
    passive_bar_action: Outcome = Outcome.ABORT  # or ESCALATE
    registry_match_radius_m: float = 500.0
    operator_timeout_s: float = 30.0
    timeout_action: Outcome = Outcome.ABORT  # fail-safe; PROCEED for red-team
    stages: StageFlags = field(default_factory=StageFlags)
    recheck_in_engage: bool = False  # re-run verification before Assess

    def __post_init__(self) -> None:
        if self.on_protected not in (Outcome.ABORT, Outcome.DISINTEGRATE):
            raise ValueError("on_protected must be Abort or Disintegrate")
        if self.passive_bar_action not in (Outcome.ABORT, Outcome.ESCALATE):
            raise ValueError("passive_bar_action must be Abort or Escalate")
        if self.timeout_action not in (Outcome.ABORT, Outcome.PROCEED):
            raise ValueError("timeout_action must be Abort or Proceed")
        if self.inventory not in ("tree", "aloha"):
            raise ValueError("inventory must be 'tree' or 'aloha'")


@dataclass(frozen=True)
class BeaconReception:
    emitter_owner: bytes
    delivery: Delivery
    # bearing observations (observer position, unit vector) toward this
    # emitter, accumulated along the weapon's own track
    bearing_track: tuple = ()


@dataclass
class RfidView:
    """RFID field as the weapon's reader sees it."""

    tags: Sequence[Tag]
    reader_pos: Position
    nominal_range_m: float
    jammers: Sequence[JammerField] = ()
    rng: np.random.Generator | None = None


@dataclass
class WorldInputs:
    """Per-tick sensor snapshot handed to one engagement by the runner."""

    now: float
    target_mobility: Mobility
    receptions: Sequence[BeaconReception] = ()
    satellites: Sequence[SatelliteSignal] = ()
    registry_query: Callable[[Position, float], list] | None = None
    chain: TrustChain | None = None
    crl: RevocationList | None = None
    rfid: RfidView | None = None
    passive_classify: Callable[[], tuple[str, float]] | None = None
    inventory_rng: random.Random | None = None
    signer: Signer | None = None
    surface_radius_m: float | None = None


@dataclass
class EngagementState:
    """Per-target engagement; owned by the event loop, never shared."""

    engagement_id: str
    target: bytes
    phase: Phase = Phase.FIND
    evidence: VerificationEvidence = field(default_factory=VerificationEvidence)
    decision_log: list[LogEvent] = field(default_factory=list)
    operator_deadline: float | None = None
    operator_decided: str | None = None

    def log(self, now: float, code: str, detail: str = "") -> None:
        self.decision_log.append(LogEvent(now, self.phase, code, detail))

    def transition(self, now: float, to: Phase, detail: str = "") -> None:
        edge = (self.phase, to)
        if edge not in ALLOWED_TRANSITIONS:
            raise ValueError(f"illegal transition {self.phase.value} -> {to.value}")
        frm = self.phase
        self.phase = to
        self.decision_log.append(
            LogEvent(now, to, "PHASE", f"from={frm.value} to={to.value} {detail}".rstrip())
        )


# ---------------------------------------------------------------------------
# The decision table
# ---------------------------------------------------------------------------


def decide_from_evidence(
    ev: VerificationEvidence, policy: EngagementPolicy
) -> EngagementDecision:
    """Total decision function over evidence states.

    Hard rules, in order:
      * a Valid, registry-matched, RFID-confirmed emblem always bars
        engagement (Abort or Disintegrate per policy), override or not;
      * a Valid certificate never yields Proceed autonomously — unresolved
        checks escalate to a human, and only an explicit operator override
        converts those escalations into Proceed;
      * an invalid certificate (expired, revoked, forged, broken chain) is
        misuse: it does not bar engagement, and screening/passive checks
        still apply;
      * no tags on a mobile target means protected: Abort;
      * a jammed or undecodable beacon carrier is an unclear case: escalate.
    """
    decision = _decide(ev, policy)
    if decision.outcome is Outcome.ESCALATE and ev.operator_override:
        return EngagementDecision(Outcome.PROCEED, f"operator_override({decision.reason})")
    return decision


def _decide(ev: VerificationEvidence, policy: EngagementPolicy) -> EngagementDecision:
    if ev.beacon is not None and ev.beacon[1] is Verdict.VALID:
        # Conclusive protective evidence first, regardless of other stages.
        if (
            ev.registry_match is RegistryMatch.MATCH
            and ev.rfid_confirm is ChallengeOutcome.CONFIRMED
        ):
            return EngagementDecision(policy.on_protected, "protective_emblem_confirmed")
        if ev.self_fix_status is not StageStatus.OK:
            return EngagementDecision(Outcome.ESCALATE, "gps_unavailable")
        if ev.emitter_loc_status is not StageStatus.OK:
            return EngagementDecision(Outcome.ESCALATE, "emitter_localization_unavailable")
        if ev.registry_match in (None, RegistryMatch.UNAVAILABLE):
            return EngagementDecision(Outcome.ESCALATE, "registry_unavailable")
        if ev.registry_match is RegistryMatch.NO_MATCH:
            return EngagementDecision(Outcome.ESCALATE, "registry_no_match")
        if ev.rfid_confirm is ChallengeOutcome.MISMATCH:
            return EngagementDecision(Outcome.ESCALATE, "rfid_mismatch")
        return EngagementDecision(Outcome.ESCALATE, "rfid_unconfirmed")
    if ev.beacon_status in (BeaconStatus.BLOCKED, BeaconStatus.UNDECODABLE):
        return EngagementDecision(Outcome.ESCALATE, f"beacon_{ev.beacon_status.value}")
    # An invalid certificate falls through here: misuse was recorded, the
    # beacon grants no protection.
    if ev.tag_screen is TagScreen.NO_TAGS:
        return EngagementDecision(Outcome.ABORT, "no_tags_deemed_protected")
    if ev.passive_verdict is not None and ev.passive_verdict[0] == "protected":
        return EngagementDecision(policy.passive_bar_action, "passive_protected")
    return EngagementDecision(Outcome.PROCEED, "no_protective_evidence")


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


class SensorOutOfRange(Exception):
    pass


def verify_active_emblem(
    state: EngagementState,
    reception: BeaconReception,
    inputs: WorldInputs,
    policy: EngagementPolicy,
) -> VerificationEvidence:
    """Run the six-stage pipeline for one beacon frame, filling evidence.

    Order: decode, certificate verification, GPS self-fix, emitter
    localization, registry check, RFID challenge-response.  Stops at the
    first hard failure (misuse) or at the first soft failure (evidence
    marked unavailable for escalation).
    """
    ev = state.evidence
    now = inputs.now
    delivery = reception.delivery
    owner = entity_name(reception.emitter_owner)

    # 1: decode
    if delivery.status is DeliveryStatus.BLOCKED:
        ev.beacon_status = BeaconStatus.BLOCKED
        state.log(now, "BEACON", f"emitter={owner} status=blocked")
        return ev
    if delivery.status is DeliveryStatus.OUT_OF_RANGE or delivery.payload is None:
        state.log(now, "BEACON", f"emitter={owner} status=out_of_range")
        return ev
    try:
        decoded = codec.decode_beacon(delivery.payload)
    except codec.CodecError as exc:
        ev.beacon_status = BeaconStatus.UNDECODABLE
        state.log(
            now, "BEACON", f"emitter={owner} status=undecodable error={type(exc).__name__}"
        )
        return ev
    ev.beacon_status = BeaconStatus.OK
    state.log(
        now,
        "BEACON",
        f"emitter={owner} status=decoded corrected_bits={decoded.corrected_bits} "
        f"band={decoded.band.value}",
    )

    # 2: certificate verification
    cert = decoded.certificate
    verdict = _verdict_for(cert, inputs)
    ev.beacon = (cert, verdict)
    state.log(
        now, "CERT", f"emblem={cert.emblem_id.hex()} verdict={verdict.value}"
    )
    if verdict is not Verdict.VALID:
        _record_misuse(state, now, f"cert_{verdict.value}", cert.emblem_id)
        return ev

    # 3: GPS self-fix
    if not policy.stages.gps:
        ev.self_fix_status = StageStatus.SKIPPED
        state.log(now, "GPS", "status=skipped_by_policy")
        return ev
    try:
        fix = trilaterate(inputs.satellites, surface_radius_m=inputs.surface_radius_m)
        ev.self_fix = fix
        ev.self_fix_status = StageStatus.OK
        state.log(
            now,
            "GPS",
            f"status=ok sats={fix.sats_used} residual_rms={fix.residual_rms_m:.6f}",
        )
    except GeoError as exc:
        ev.self_fix_status = StageStatus.UNAVAILABLE
        state.log(now, "GPS", f"status=unavailable error={type(exc).__name__}")
        return ev

    # 4: emitter localization from the bearing track
    if not policy.stages.bearing:
        ev.emitter_loc_status = StageStatus.SKIPPED
        state.log(now, "EMITTER_LOC", "status=skipped_by_policy")
        return ev
    try:
        emitter_pos = localize_emitter(list(reception.bearing_track))
        ev.emitter_position = emitter_pos
        ev.emitter_loc_status = StageStatus.OK
        state.log(
            now,
            "EMITTER_LOC",
            f"status=ok position=({emitter_pos.x:.1f},{emitter_pos.y:.1f},{emitter_pos.z:.1f})"
            f" observations={len(reception.bearing_track)}",
        )
    except GeoError as exc:
        ev.emitter_loc_status = StageStatus.UNAVAILABLE
        state.log(now, "EMITTER_LOC", f"status=unavailable error={type(exc).__name__}")
        return ev

    # 5: registry check at the localized position
    if not policy.stages.registry or inputs.registry_query is None:
        ev.registry_match = RegistryMatch.UNAVAILABLE
        state.log(now, "REGISTRY", "status=skipped_by_policy")
        return ev
    try:
        records = inputs.registry_query(emitter_pos, policy.registry_match_radius_m)
    except RegistryUnavailable:
        ev.registry_match = RegistryMatch.UNAVAILABLE
        state.log(now, "REGISTRY", "status=unavailable")
        return ev
    if any(rec.emblem_id == cert.emblem_id for rec in records):
        ev.registry_match = RegistryMatch.MATCH
        state.log(now, "REGISTRY", f"status=match records={len(records)}")
    else:
        ev.registry_match = RegistryMatch.NO_MATCH
        state.log(now, "REGISTRY", f"status=no_match records={len(records)}")
        _record_misuse(state, now, "registry_no_match", cert.emblem_id)
        return ev

    # 6: RFID challenge-response
    if not policy.stages.rfid or inputs.rfid is None:
        state.log(now, "RFID", "status=skipped_by_policy")
        return ev
    rf = inputs.rfid
    result = challenge_response(
        rf.reader_pos,
        cert.emblem_id,
        rf.tags,
        rf.nominal_range_m,
        jammers=rf.jammers,
        rng=rf.rng,
    )
    ev.rfid_confirm = result.outcome
    state.log(now, "RFID", f"status={result.outcome.value}")
    if result.outcome is ChallengeOutcome.MISMATCH:
        _record_misuse(state, now, "rfid_mismatch", cert.emblem_id)
    return ev


def _record_misuse(state: EngagementState, now: float, kind: str, emblem_id: bytes) -> None:
    state.evidence.misuse.append(kind)
    state.log(now, "MISUSE", f"kind={kind} emblem={emblem_id.hex()}")


def _verdict_for(cert: EmblemCertificate, inputs: WorldInputs) -> Verdict:
    if inputs.chain is None:
        return Verdict.BROKEN_CHAIN
    return verify_certificate(
        cert, inputs.chain, inputs.crl, int(inputs.now), signer=inputs.signer
    )


def screen_mobile_tags(
    state: EngagementState,
    rfid: RfidView,
    policy: EngagementPolicy,
    rng: random.Random,
    now: float = 0.0,
) -> TagScreen:
    """Inventory the tag field around a mobile target.

    ArmedTagPresent iff at least one weapon tag was identified; a unit
    carrying no tags is deemed protected.
    """
    hearable = tags_in_reader_range(rfid.tags, rfid.reader_pos, rfid.nominal_range_m)
    if policy.inventory == "aloha":
        result = inventory_aloha(
            hearable, policy.aloha_frame_size, policy.aloha_max_rounds, rng
        )
    else:
        result = inventory_tree(hearable)
    by_id = {t.tag_id: t for t in hearable}
    armed = any(by_id[i].kind is TagKind.WEAPON for i in result.identified)
    screen = TagScreen.ARMED_TAG_PRESENT if armed else TagScreen.NO_TAGS
    state.evidence.tag_screen = screen
    state.log(
        now,
        "TAG_SCREEN",
        f"result={screen.value} identified={len(result.identified)} "
        f"protocol={policy.inventory} slots={result.slots_used} queries={result.queries_used}",
    )
    return screen


# ---------------------------------------------------------------------------
# The state machine
# ---------------------------------------------------------------------------


def step(
    state: EngagementState, inputs: WorldInputs, policy: EngagementPolicy
) -> EngagementState:
    """Advance exactly one phase, or hold while awaiting the operator."""
    if state.phase in TERMINAL_PHASES:
        raise ValueError(f"engagement {state.engagement_id} is terminal")
    now = inputs.now
    if state.phase is Phase.FIND:
        state.transition(now, Phase.FIX)
    elif state.phase is Phase.FIX:
        state.transition(now, Phase.TRACK)
    elif state.phase is Phase.TRACK:
        state.transition(now, Phase.TARGET)
    elif state.phase is Phase.TARGET:
        _run_target(state, inputs, policy)
    elif state.phase is Phase.ENGAGE:
        if policy.recheck_in_engage:
            decision = _run_verification(state, inputs, policy)
            if decision.outcome is not Outcome.PROCEED:
                _apply_decision(state, now, decision, policy)
                return state
        state.transition(now, Phase.ASSESS, "detail=engagement_complete")
    elif state.phase is Phase.AWAITING_OPERATOR:
        pass  # held; resolve_operator() moves it
    return state


def _run_target(
    state: EngagementState, inputs: WorldInputs, policy: EngagementPolicy
) -> None:
    decision = _run_verification(state, inputs, policy)
    _apply_decision(state, inputs.now, decision, policy)


def _run_verification(
    state: EngagementState, inputs: WorldInputs, policy: EngagementPolicy
) -> EngagementDecision:
    """Run all applicable strategies and produce the target decision."""
    now = inputs.now
    ev = state.evidence
    sensing = Sensing.ACTIVE if inputs.receptions else Sensing.PASSIVE
    strategy = protection_matrix_lookup(ProtectionMode(sensing, inputs.target_mobility))
    state.log(now, "STRATEGY", f"strategy={strategy.value}")

    if inputs.receptions:
        decision = _process_beacons(state, inputs, policy)
        if decision is not None:
            return decision

    if (
        strategy
        in (
            VerificationStrategy.BEACON_PIPELINE_MOBILE,
            VerificationStrategy.PASSIVE_RECOGNITION_MOBILE,
        )
        and policy.mobile_screening
        and inputs.rfid is not None
    ):
        rng = inputs.inventory_rng or random.Random(0)
        screen_mobile_tags(state, inputs.rfid, policy, rng, now)

    if policy.passive_enabled and inputs.passive_classify is not None:
        try:
            label, confidence = inputs.passive_classify()
            ev.passive_verdict = (label, confidence)
            state.log(now, "PASSIVE", f"label={label} confidence={confidence:.3f}")
        except SensorOutOfRange:
            state.log(now, "PASSIVE", "status=out_of_range")

    return decide_from_evidence(ev, policy)


def _process_beacons(
    state: EngagementState, inputs: WorldInputs, policy: EngagementPolicy
) -> EngagementDecision | None:
    """Handle all frames heard this tick, protected-priority first.

    Frames whose certificates decode and verify Valid are processed before
    all others.  Returns a decision when a frame settles the engagement
    (bar or escalation); None lets screening and passive checks run.
    """
    now = inputs.now

    def priority(rec: BeaconReception) -> tuple[int, str]:
        rank = 2
        if rec.delivery.payload is not None and rec.delivery.status in (
            DeliveryStatus.RECEIVED,
            DeliveryStatus.CORRUPTED,
        ):
            try:
                decoded = codec.decode_beacon(rec.delivery.payload)
            except codec.CodecError:
                rank = 2
            else:
                verdict = _verdict_for(decoded.certificate, inputs)
                rank = 0 if verdict is Verdict.VALID else 1
        return (rank, entity_name(rec.emitter_owner))

    ordered = sorted(inputs.receptions, key=priority)
    state.log(
        now,
        "BEACON_ORDER",
        "order=" + ",".join(entity_name(r.emitter_owner) for r in ordered),
    )
    for reception in ordered:
        verify_active_emblem(state, reception, inputs, policy)
        decision = decide_from_evidence(state.evidence, policy)
        if decision.outcome is not Outcome.PROCEED:
            return decision
        # Misuse or silence: this frame grants no protection; try the next.
    return None


def _apply_decision(
    state: EngagementState,
    now: float,
    decision: EngagementDecision,
    policy: EngagementPolicy,
) -> None:
    state.log(now, "DECIDE", f"outcome={decision.outcome.value} reason={decision.reason}")
    if decision.outcome is Outcome.PROCEED:
        state.transition(now, Phase.ENGAGE, f"reason={decision.reason}")
    elif decision.outcome is Outcome.ABORT:
        state.transition(now, Phase.ABORTED, f"reason={decision.reason}")
    elif decision.outcome is Outcome.DISINTEGRATE:
        state.transition(now, Phase.DISINTEGRATED, f"reason={decision.reason}")
    else:
        state.operator_deadline = now + policy.operator_timeout_s
        state.log(now, "ESCALATE", f"reason={decision.reason} timeout_s={policy.operator_timeout_s}")
        state.transition(now, Phase.AWAITING_OPERATOR, f"reason={decision.reason}")


# ---------------------------------------------------------------------------
# Operator channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorDecision:
    engagement_id: str
    decision: str  # "abort" | "proceed"
    operator_id: str


class StaleDecision(Exception):
    """Decision arrived for an engagement that is not awaiting one."""


def resolve_operator(
    state: EngagementState,
    decision: OperatorDecision | None,
    policy: EngagementPolicy,
    now: float,
) -> EngagementState:
    """Apply an operator decision, or the fail-safe timeout when None."""
    if state.phase is not Phase.AWAITING_OPERATOR:
        state.log(now, "OPERATOR", "status=stale_decision")
        raise StaleDecision(state.engagement_id)
    if decision is None:
        state.log(now, "TIMEOUT", f"action={policy.timeout_action.value}")
        if policy.timeout_action is Outcome.PROCEED:
            state.evidence.operator_override = True
            state.operator_deadline = None
            state.transition(now, Phase.TARGET, "reason=timeout_proceed")
        else:
            state.operator_decided = "timeout"
            state.operator_deadline = None
            state.transition(now, Phase.ABORTED, "reason=operator_timeout")
        return state
    state.log(
        now, "OPERATOR", f"decision={decision.decision} operator={decision.operator_id}"
    )
    state.operator_decided = decision.decision
    state.operator_deadline = None
    if decision.decision == "abort":
        state.transition(now, Phase.ABORTED, "reason=operator_abort")
    elif decision.decision == "proceed":
        state.evidence.operator_override = True
        state.transition(now, Phase.TARGET, "reason=operator_proceed")
    else:
        raise ValueError(f"unknown operator decision {decision.decision!r}")
    return state


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def replay_log(events: Sequence[LogEvent]) -> Phase:
    """Fold PHASE events back into the terminal phase, validating every edge.

    Pure function of the log; used to audit that a recorded engagement
    reached its terminal state through legal transitions only.
    """
    phase = Phase.FIND
    for event in events:
        if event.code != "PHASE":
            continue
        fields = dict(
            part.split("=", 1) for part in event.detail.split() if "=" in part
        )
        frm = Phase(fields["from"])
        to = Phase(fields["to"])
        if frm is not phase:
            raise ValueError(f"replay mismatch: log says {frm.value}, walk says {phase.value}")
        if (frm, to) not in ALLOWED_TRANSITIONS:
            raise ValueError(f"illegal logged transition {frm.value} -> {to.value}")
        phase = to
    return phase
