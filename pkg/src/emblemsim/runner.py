"""Deterministic tick-based simulation loop.

One logical thread owns the world.  Operator traffic crosses the boundary
only through an ``OperatorBridge``: the null bridge for hitl=off, a
scripted bridge for reproducible acceptance runs, and the websocket console
bridge for live sessions.  Identical (scenario, seed) pairs produce
byte-identical decision logs.
"""

from __future__ import annotations

import os
import time as _time
from dataclasses import dataclass, field

from . import rand
from .channel import DeliveryStatus, Emitter, JamMode, JammerField, deliver
from .codec import encode_beacon
from .engagement import (
    BeaconReception,
    ChallengeOutcome,
    EngagementPolicy,
    EngagementState,
    Outcome,
    OperatorDecision,
    Phase,
    RegistryMatch,
    RfidView,
    StageFlags,
    StaleDecision,
    TagScreen,
    TERMINAL_PHASES,
    Verdict,
    WorldInputs,
    resolve_operator,
    step,
)
from .metrics import MetricsReport
from .model import (
    DEFAULT_BANDS,
    EntityKind,
    Entity,
    NOMINAL_EARTH_RADIUS_M,
    Position,
    WorldMode,
    distance,
    entity_id,
    entity_name,
)
from .oracle import (
    PassiveOracleConfig,
    bearing_observation,
    make_satellite_signals,
    passive_recognize,
)
from .rfid import Tag, TagKind, TagPower
from .scenario import PolicySpec, Scenario
from .trust import (
    CertificateRequest,
    Ed25519Signer,
    EmblemCertificate,
    MockSigner,
    Registry,
    RegistryRecord,
    RevocationList,
    Signer,
    TrustChain,
    build_chain,
    issue_certificate,
    key_from_seed,
    revoke,
)


class SafetyInvariantViolation(Exception):
    """A run reached Engage against conclusively protected evidence."""

    def __init__(self, violations: list[str], log_lines: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations
        self.log_lines = log_lines


class OperatorBridge:
    """Boundary between the simulation thread and the operator world."""

    paced = False

    def emit(self, message: dict) -> None:  # pragma: no cover - interface
        pass

    def poll_decisions(self, now: float) -> list[OperatorDecision]:
        return []


class ScriptedBridge(OperatorBridge):
    """Replays scenario-scripted decisions relative to each abort request."""

    def __init__(self, scenario: Scenario):
        self._scripts: dict[str, list] = {}
        for d in scenario.hitl.decisions:
            self._scripts.setdefault(d.engagement, []).append(d)
        self._pending: list[tuple[float, OperatorDecision]] = []

    def emit(self, message: dict) -> None:
        if message.get("type") != "abort_request":
            return
        eid = message["engagement_id"]
        scripts = self._scripts.get(eid, [])
        if scripts:
            d = scripts.pop(0)
            due = message["sim_time"] + d.after_s
            self._pending.append(
                (due, OperatorDecision(eid, d.decision, d.operator_id))
            )

    def poll_decisions(self, now: float) -> list[OperatorDecision]:
        due = [d for t, d in self._pending if t <= now]
        self._pending = [(t, d) for t, d in self._pending if t > now]
        return due


@dataclass
class _EmitterState:
    emitter: Emitter
    spec_index: int
    period_ticks: int


@dataclass
class _WeaponState:
    entity: Entity
    policy: EngagementPolicy
    passive_cfg: PassiveOracleConfig
    passive_enabled: bool
    rfid_range_m: float
    # latest delivery per emitter index, refreshed every firing
    inbox: dict[int, object] = field(default_factory=dict)
    # bearing observations per emitter index
    tracks: dict[int, list] = field(default_factory=dict)


def _build_policy(spec: PolicySpec) -> EngagementPolicy:
    return EngagementPolicy(
        on_protected=Outcome.DISINTEGRATE if spec.on_protected == "disintegrate" else Outcome.ABORT,
        mobile_screening=spec.mobile_screening,
        inventory=spec.inventory,
        aloha_frame_size=spec.aloha_frame_size,
        aloha_max_rounds=spec.aloha_max_rounds,
        passive_enabled=spec.passive.enabled,
        passive_bar_action=Outcome.ESCALATE if spec.passive.bar_action == "escalate" else Outcome.ABORT,
        registry_match_radius_m=spec.registry_match_radius_m,
        operator_timeout_s=spec.operator_timeout_s,
        timeout_action=Outcome.PROCEED if spec.timeout_action == "proceed" else Outcome.ABORT,
        stages=StageFlags(
            gps=spec.stages.gps,
            bearing=spec.stages.bearing,
            registry=spec.stages.registry,
            rfid=spec.stages.rfid,
        ),
        recheck_in_engage=spec.recheck_in_engage,
    )


class World:
    """Everything the scenario instantiates, keyed for deterministic walks."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.signer: Signer = Ed25519Signer() if scenario.signer == "ed25519" else MockSigner()
        self.mode = scenario.mode
        self.surface_radius_m = (
            NOMINAL_EARTH_RADIUS_M if scenario.mode is WorldMode.EARTH else None
        )

        # trust material
        self.issuer_keys: dict[str, bytes] = {}
        root = scenario.trust.root
        self.issuer_keys[root.id] = key_from_seed(root.key_seed)
        intermediates = []
        for spec in scenario.trust.intermediates:
            self.issuer_keys[spec.id] = key_from_seed(spec.key_seed)
            intermediates.append((_issuer_id8(spec.id), self.issuer_keys[spec.id]))
        self.chain: TrustChain = build_chain(
            _issuer_id8(root.id), self.issuer_keys[root.id], intermediates, self.signer
        )
        crl_issuer = scenario.trust.crl_issuer or root.id
        self.crl_key = self.issuer_keys[crl_issuer]
        self.crl: RevocationList = RevocationList.empty(
            _issuer_id8(crl_issuer), self.crl_key, issued_at=0, signer=self.signer
        )

        # emblems and certificates
        self.emblem_bytes: dict[str, bytes] = {}
        self.certs: dict[str, EmblemCertificate] = {}
        for e in scenario.emblems:
            emblem_b = entity_id(e.emblem_id)
            self.emblem_bytes[e.emblem_id] = emblem_b
            request = CertificateRequest(
                emblem_id=emblem_b,
                issuer_id=_issuer_id8(e.issuer),
                subject_type=e.subject_type,
                valid_from=e.valid_from,
                valid_to=e.valid_to,
                subject_pubkey=self.signer.public_key(key_from_seed(e.subject_key_seed)),
                lat_deg=e.lat_deg,
                lon_deg=e.lon_deg,
                zone_radius_m=e.zone_radius_m,
            )
            if e.sign_key_seed is not None:
                # scenario-forged credential: sign with a key outside the chain
                cert = issue_certificate(
                    request, self.issuer_keys[e.issuer], self.chain, self.signer
                )
                forged_sig = self.signer.sign(cert.signed_bytes(), key_from_seed(e.sign_key_seed))
                cert = EmblemCertificate.from_bytes(cert.to_bytes()[:-64] + forged_sig)
            else:
                cert = issue_certificate(
                    request, self.issuer_keys[e.issuer], self.chain, self.signer
                )
            self.certs[e.emblem_id] = cert

        # registry
        self.registry = Registry()
        for r in scenario.registry:
            self.registry.upsert(
                RegistryRecord(self.emblem_bytes[r.emblem], r.position, r.zone_radius_m)
            )

        # entities
        self.entities: dict[str, Entity] = {}
        for spec in scenario.entities:
            self.entities[spec.id] = Entity(
                id=entity_id(spec.id),
                kind=spec.kind,
                position=spec.position,
                mobility=spec.mobility,
                ground_truth_protected=spec.protected,
                velocity=spec.velocity,
            )
        self.satellites: list[tuple[str, Position]] = [
            (s.id, s.position) for s in scenario.satellites
        ]

        # channel hardware
        def band_range(band) -> float:
            override = scenario.bands.get(band, {})
            return float(override.get("nominal_range_m", DEFAULT_BANDS[band].nominal_range))

        self.emitters: list[_EmitterState] = []
        for idx, spec in enumerate(scenario.emitters):
            owner = self.entities[spec.owner]
            frame = encode_beacon(self.certs[spec.emblem], spec.band)
            emitter = Emitter(
                owner=owner.id,
                band=spec.band,
                frame=frame,
                period_s=spec.period_s,
                range_multiplier=spec.range_multiplier,
                position=owner.position,
                nominal_range_m=band_range(spec.band),
            )
            period_ticks = max(1, round(spec.period_s / scenario.tick_s))
            self.emitters.append(_EmitterState(emitter, idx, period_ticks))

        self.jammers: list[JammerField] = []
        for spec in scenario.jammers:
            owner = self.entities[spec.owner]
            self.jammers.append(
                JammerField(
                    owner=owner.id,
                    band=spec.band,
                    center=owner.position,
                    radius_m=spec.radius_m,
                    mode=JamMode(spec.mode),
                    rate=spec.rate,
                    active=spec.active,
                )
            )

        self.tags: list[Tag] = []
        for spec in scenario.tags:
            owner = self.entities[spec.owner]
            tag = Tag(
                tag_id=spec.tag_id,
                kind=TagKind.WEAPON if spec.kind == "weapon" else TagKind.EMBLEM,
                powered=TagPower.ACTIVE if spec.powered == "active" else TagPower.PASSIVE,
                emblem_id=self.emblem_bytes[spec.emblem] if spec.emblem else None,
                owner=owner.id,
                position=owner.position,
            )
            self.tags.append(tag)
            owner.carried_tags.append(spec.tag_id)

        # weapons
        self.weapons: dict[str, _WeaponState] = {}
        for name, entity in self.entities.items():
            if entity.kind is not EntityKind.WEAPON_SYSTEM:
                continue
            spec = scenario.policies.get(name, PolicySpec())
            self.weapons[name] = _WeaponState(
                entity=entity,
                policy=_build_policy(spec),
                passive_cfg=PassiveOracleConfig(
                    false_positive_rate=spec.passive.false_positive_rate,
                    false_negative_rate=spec.passive.false_negative_rate,
                    sensor_range_m=spec.passive.sensor_range_m,
                    confidence_low=spec.passive.confidence[0],
                    confidence_high=spec.passive.confidence[1],
                ),
                passive_enabled=spec.passive.enabled,
                rfid_range_m=spec.rfid_range_m,
            )

    def move(self, tick_s: float) -> None:
        for name in sorted(self.entities):
            e = self.entities[name]
            vx, vy, vz = e.velocity
            if vx or vy or vz:
                e.position = Position(
                    e.position.x + vx * tick_s,
                    e.position.y + vy * tick_s,
                    e.position.z + vz * tick_s,
                )
        for es in self.emitters:
            owner = entity_name(es.emitter.owner)
            es.emitter.position = self.entities[owner].position
        for tag in self.tags:
            if tag.owner is not None:
                tag.position = self.entities[entity_name(tag.owner)].position


def _issuer_id8(name: str) -> bytes:
    raw = name.encode("utf-8")
    if len(raw) > 8:
        raise ValueError(f"issuer id {name!r} longer than 8 bytes")
    return raw.ljust(8, b"\x00")


@dataclass
class RunResult:
    metrics: MetricsReport
    log_lines: list[str]
    states: dict[str, EngagementState]
    seed: int
    safety_violations: list[str]


def format_log_lines(states: dict[str, EngagementState]) -> list[str]:
    lines = []
    for eid in sorted(states):
        for event in states[eid].decision_log:
            line = f"{event.sim_time:.3f} {eid} {event.phase.value} {event.code}"
            if event.detail:
                line += f" {event.detail}"
            lines.append(line)
    return lines


def run(
    scenario: Scenario,
    seed_override: int | None = None,
    max_ticks: int | None = None,
    bridge: OperatorBridge | None = None,
    pace_factor: float = 0.0,
) -> RunResult:
    """Execute a scenario to completion and report metrics.

    ``pace_factor`` > 0 paces the loop against the wall clock (sim seconds
    per wall second) — used only for live console sessions; deterministic
    modes never branch on wall time.
    """
    seed = seed_override
    if seed is None:
        env = os.environ.get("EMBLEM_SIM_SEED")
        seed = int(env) if env else scenario.seed
    world = World(scenario, seed)
    if bridge is None:
        bridge = ScriptedBridge(scenario) if scenario.hitl.mode == "scripted" else OperatorBridge()

    tick_s = scenario.tick_s
    n_ticks = int(round(scenario.duration_s / tick_s))
    if max_ticks is not None:
        n_ticks = min(n_ticks, max_ticks)

    states: dict[str, EngagementState] = {}
    oracle_protected: dict[str, bool] = {}
    taskings = sorted(
        scenario.taskings, key=lambda t: (t.start_s, t.weapon, t.target)
    )
    created: set[str] = set()
    events = sorted(
        enumerate(scenario.events), key=lambda iv: (iv[1].at_s, iv[0])
    )
    applied_events: set[int] = set()
    crl_counter = 0

    def emit_state_update(state: EngagementState, now: float) -> None:
        bridge.emit(
            {
                "type": "state_update",
                "engagement_id": state.engagement_id,
                "phase": state.phase.value,
                "sim_time": now,
            }
        )

    for tick in range(n_ticks):
        now = tick * tick_s
        if bridge.paced and pace_factor > 0:
            _time.sleep(tick_s / pace_factor)

        # 1. timeline events
        for idx, ev in events:
            if idx in applied_events or ev.at_s > now:
                continue
            applied_events.add(idx)
            if ev.action == "revoke_emblem":
                crl_counter += 1
                world.crl = revoke(
                    world.emblem_bytes[ev.emblem], world.crl, world.crl_key,
                    issued_at=crl_counter, signer=world.signer,
                )
            elif ev.action == "revoke_issuer":
                crl_counter += 1
                world.crl = revoke(
                    _issuer_id8(ev.issuer), world.crl, world.crl_key,
                    issued_at=crl_counter, signer=world.signer,
                )
            elif ev.action == "registry_offline":
                world.registry.online = False
            elif ev.action == "registry_online":
                world.registry.online = True
            elif ev.action in ("jammer_on", "jammer_off"):
                owner = entity_id(ev.owner)
                for jam in world.jammers:
                    if jam.owner == owner:
                        jam.active = ev.action == "jammer_on"

        # 2. operator decisions
        for decision in bridge.poll_decisions(now):
            state = states.get(decision.engagement_id)
            if state is None or state.phase is not Phase.AWAITING_OPERATOR:
                bridge.emit(
                    {
                        "type": "ack",
                        "engagement_id": decision.engagement_id,
                        "applied": False,
                        "reason": "stale_decision",
                    }
                )
                if state is not None:
                    try:
                        resolve_operator(state, decision, _policy_of(world, state), now)
                    except StaleDecision:
                        pass
                continue
            resolve_operator(state, decision, _policy_of(world, state), now)
            bridge.emit(
                {
                    "type": "ack",
                    "engagement_id": decision.engagement_id,
                    "applied": True,
                    "reason": f"applied_{decision.decision}",
                }
            )
            emit_state_update(state, now)

        # 3. operator timeouts
        for eid in sorted(states):
            state = states[eid]
            if (
                state.phase is Phase.AWAITING_OPERATOR
                and state.operator_deadline is not None
                and now >= state.operator_deadline
            ):
                resolve_operator(state, None, _policy_of(world, state), now)
                emit_state_update(state, now)

        # 4. motion
        world.move(tick_s)

        # 5. beacon firing into weapon inboxes
        for es in world.emitters:
            if tick % es.period_ticks != 0:
                continue
            for wname in sorted(world.weapons):
                weapon = world.weapons[wname]
                rng = rand.substream(seed, "deliver", es.spec_index, wname, tick)
                delivery = deliver(es.emitter, weapon.entity.position, world.jammers, rng)
                if delivery.status is DeliveryStatus.OUT_OF_RANGE:
                    continue
                weapon.inbox[es.spec_index] = delivery
                if delivery.status in (DeliveryStatus.RECEIVED, DeliveryStatus.CORRUPTED):
                    brng = rand.substream(seed, "bearing", es.spec_index, wname, tick)
                    obs = bearing_observation(
                        weapon.entity.position,
                        es.emitter.position,
                        scenario.bearing_noise_deg,
                        brng,
                    )
                    track = weapon.tracks.setdefault(es.spec_index, [])
                    track.append((weapon.entity.position, obs))
                    del track[:-16]

        # 6. create due engagements
        for tasking in taskings:
            eid = f"{tasking.weapon}:{tasking.target}"
            if eid in created or tasking.start_s > now:
                continue
            created.add(eid)
            target = world.entities[tasking.target]
            state = EngagementState(engagement_id=eid, target=target.id)
            states[eid] = state
            state.log(now, "CREATED", f"weapon={tasking.weapon} target={tasking.target}")
            state.log(
                now, "ORACLE",
                f"protected={'true' if target.ground_truth_protected else 'false'}",
            )
            emit_state_update(state, now)

        # 7. step engagements
        for eid in sorted(states):
            state = states[eid]
            if state.phase in TERMINAL_PHASES or state.phase is Phase.AWAITING_OPERATOR:
                continue
            weapon_name, target_name = eid.split(":", 1)
            weapon = world.weapons[weapon_name]
            inputs = _build_inputs(world, weapon, weapon_name, target_name, eid, now, tick, seed)
            before = state.phase
            step(state, inputs, weapon.policy)
            if state.phase is not before:
                emit_state_update(state, now)
                if state.phase is Phase.AWAITING_OPERATOR:
                    bridge.emit(
                        {
                            "type": "abort_request",
                            "engagement_id": eid,
                            "sim_time": now,
                            "evidence": state.evidence.to_dict(),
                            "timeout_s": weapon.policy.operator_timeout_s,
                        }
                    )

        # 8. early stop once nothing can happen anymore (batch modes only;
        # a live console session stays up for the scenario duration)
        if (
            not bridge.paced
            and len(created) == len(taskings)
            and all(s.phase in TERMINAL_PHASES for s in states.values())
            and len(applied_events) == len(events)
        ):
            break

    for name, entity in sorted(world.entities.items()):
        for tasking in taskings:
            if tasking.target == name:
                oracle_protected[f"{tasking.weapon}:{name}"] = entity.ground_truth_protected

    log_lines = format_log_lines(states)
    metrics = compute_metrics(states, oracle_protected, seed)
    violations = check_safety(states, world)
    return RunResult(metrics, log_lines, states, seed, violations)


def _policy_of(world: World, state: EngagementState) -> EngagementPolicy:
    weapon_name = state.engagement_id.split(":", 1)[0]
    return world.weapons[weapon_name].policy


def _build_inputs(
    world: World,
    weapon: _WeaponState,
    weapon_name: str,
    target_name: str,
    eid: str,
    now: float,
    tick: int,
    seed: int,
) -> WorldInputs:
    target = world.entities[target_name]

    receptions: list[BeaconReception] = []
    for idx in sorted(weapon.inbox):
        delivery = weapon.inbox[idx]
        owner = world.emitters[idx].emitter.owner
        receptions.append(
            BeaconReception(owner, delivery, tuple(weapon.tracks.get(idx, ())))
        )
    gps_rng = rand.substream(seed, "gps", weapon_name, tick)
    satellites = make_satellite_signals(
        world.satellites,
        weapon.entity.position,
        world.scenario.gps.clock_bias_s,
        world.scenario.gps.noise_sigma_m,
        gps_rng,
    )

    def registry_query_view(position: Position, radius: float):
        return world.registry.query(position, radius)

    passive_rng = rand.substream(seed, "passive", eid, tick)
    truth = target.ground_truth_protected
    target_distance = distance(weapon.entity.position, target.position)
    passive_cfg = weapon.passive_cfg

    def passive_view() -> tuple[str, float]:
        return passive_recognize(truth, passive_cfg, passive_rng, target_distance)

    rfid_jammers = [j for j in world.jammers if j.band.value.startswith("RFID")]
    rfid = RfidView(
        tags=world.tags,
        reader_pos=weapon.entity.position,
        nominal_range_m=weapon.rfid_range_m,
        jammers=rfid_jammers,
        rng=rand.substream(seed, "rfid", eid, tick),
    )

    return WorldInputs(
        now=now,
        target_mobility=target.mobility,
        receptions=receptions,
        satellites=satellites,
        registry_query=registry_query_view,
        chain=world.chain,
        crl=world.crl,
        rfid=rfid,
        passive_classify=passive_view if weapon.passive_enabled else None,
        inventory_rng=rand.pystream(seed, "inventory", eid, tick),
        signer=world.signer,
        surface_radius_m=world.surface_radius_m,
    )


def compute_metrics(
    states: dict[str, EngagementState],
    oracle_protected: dict[str, bool],
    seed: int,
) -> MetricsReport:
    """Metrics from live state objects (the log fold is the audit path)."""
    report = MetricsReport(engagements_total=len(states))
    for eid, state in states.items():
        protected = oracle_protected.get(eid, False)
        engaged = state.phase in (Phase.ENGAGE, Phase.ASSESS)
        if engaged and protected:
            report.false_engagements += 1
        if (
            state.phase in (Phase.ABORTED, Phase.DISINTEGRATED)
            and not protected
            and state.operator_decided != "abort"
        ):
            report.missed_legitimate += 1
        for event in state.decision_log:
            if event.code == "PHASE" and "to=AwaitingOperator" in event.detail:
                report.escalations += 1
            elif event.code == "MISUSE":
                report.misuse_events += 1
    report.per_seed[seed] = report.counts()
    return report


def check_safety(states: dict[str, EngagementState], world: World) -> list[str]:
    """Tripwire for the hard safety invariant; must always return []."""
    violations = []
    for eid, state in states.items():
        if state.phase not in (Phase.ENGAGE, Phase.ASSESS):
            continue
        ev = state.evidence
        if (
            ev.beacon is not None
            and ev.beacon[1] is Verdict.VALID
            and ev.registry_match is RegistryMatch.MATCH
            and ev.rfid_confirm is ChallengeOutcome.CONFIRMED
        ):
            violations.append(f"{eid}: engaged despite confirmed protective emblem")
        policy = _policy_of(world, state)
        if ev.tag_screen is TagScreen.NO_TAGS and policy.mobile_screening:
            violations.append(f"{eid}: engaged despite NoTags screen")
    return violations


def run_sweep(
    scenario: Scenario, seeds: list[int]
) -> dict[int, RunResult]:
    """Run the same scenario across seeds (per-seed metrics breakdowns)."""
    return {seed: run(scenario, seed_override=seed) for seed in seeds}
