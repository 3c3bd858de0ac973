"""Scenario documents: parsing, validation, canonical serialization.

Scenarios are JSON with a published schema (``schema/scenario.schema.json``).
Loading validates structure first (every schema error reported, not just the
first), then resolves references (every dangling id reported).  The
canonical form — sorted keys, two-space indent, trailing newline, defaults
materialized — round-trips byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import jsonschema

from .model import (
    EntityKind,
    FrequencyBand,
    Mobility,
    Position,
    WorldMode,
    validate_ground_position,
)
from .trust import SubjectType

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Validation failure carrying the full list of problems."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class SchemaError(ScenarioError):
    pass


class DanglingReference(ScenarioError):
    pass


def _load_schema() -> dict:
    with resources.files("emblemsim.schema").joinpath("scenario.schema.json").open() as f:
        return json.load(f)


_SCHEMA: dict | None = None


def scenario_schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = _load_schema()
    return _SCHEMA


# ---------------------------------------------------------------------------
# Typed scenario
# ---------------------------------------------------------------------------


@dataclass
class IssuerSpec:
    id: str
    key_seed: int


@dataclass
class TrustSpec:
    root: IssuerSpec
    intermediates: list[IssuerSpec] = field(default_factory=list)
    crl_issuer: str = ""

    def issuer_ids(self) -> list[str]:
        return [self.root.id] + [i.id for i in self.intermediates]


@dataclass
class EmblemSpec:
    emblem_id: str
    issuer: str
    subject_type: SubjectType
    valid_from: int
    valid_to: int
    zone_radius_m: int = 0
    lat_deg: float = 0.0
    lon_deg: float = 0.0
    subject_key_seed: int = 0
    sign_key_seed: int | None = None  # forgery knob: mismatched signing key


@dataclass
class EntitySpec:
    id: str
    kind: EntityKind
    position: Position
    mobility: Mobility
    protected: bool
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class SatelliteSpec:
    id: str
    position: Position


@dataclass
class EmitterSpec:
    owner: str
    band: FrequencyBand
    emblem: str
    period_s: float
    range_multiplier: float = 1.0


@dataclass
class JammerSpec:
    owner: str
    band: FrequencyBand
    radius_m: float
    mode: str  # "block" | "bitflip"
    rate: float = 0.0
    active: bool = True


@dataclass
class TagSpec:
    tag_id: int
    kind: str  # "weapon" | "emblem"
    owner: str
    powered: str = "active"
    emblem: str | None = None


@dataclass
class RegistrySpec:
    emblem: str
    position: Position
    zone_radius_m: float


@dataclass
class PassivePolicySpec:
    enabled: bool = True
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0
    sensor_range_m: float = 2000.0
    confidence: tuple[float, float] = (0.7, 0.99)
    bar_action: str = "abort"  # or "escalate"


@dataclass
class StagesSpec:
    gps: bool = True
    bearing: bool = True
    registry: bool = True
    rfid: bool = True


@dataclass
class PolicySpec:
    on_protected: str = "abort"  # or "disintegrate"
    mobile_screening: bool = True
    inventory: str = "tree"
    aloha_frame_size: int = 16
    aloha_max_rounds: int = 32
    passive: PassivePolicySpec = field(default_factory=PassivePolicySpec)
    registry_match_radius_m: float = 500.0
    operator_timeout_s: float = 30.0
    timeout_action: str = "abort"  # or "proceed"
    stages: StagesSpec = field(default_factory=StagesSpec)
    rfid_range_m: float = 100.0
    recheck_in_engage: bool = False


@dataclass
class TaskingSpec:
    weapon: str
    target: str
    start_s: float = 0.0


@dataclass
class EventSpec:
    at_s: float
    action: str
    emblem: str | None = None
    issuer: str | None = None
    owner: str | None = None


@dataclass
class ScriptedDecisionSpec:
    engagement: str
    decision: str  # "abort" | "proceed"
    operator_id: str = "script"
    after_s: float = 0.0  # delay from the abort request


@dataclass
class HitlSpec:
    mode: str = "off"  # off | scripted | console
    decisions: list[ScriptedDecisionSpec] = field(default_factory=list)


@dataclass
class GpsSpec:
    clock_bias_s: float = 0.0
    noise_sigma_m: float = 0.0


@dataclass
class Scenario:
    seed: int
    duration_s: float
    trust: TrustSpec
    tick_s: float = 0.1
    mode: WorldMode = WorldMode.FLAT
    signer: str = "mock"
    bands: dict[FrequencyBand, dict[str, float]] = field(default_factory=dict)
    emblems: list[EmblemSpec] = field(default_factory=list)
    entities: list[EntitySpec] = field(default_factory=list)
    satellites: list[SatelliteSpec] = field(default_factory=list)
    emitters: list[EmitterSpec] = field(default_factory=list)
    jammers: list[JammerSpec] = field(default_factory=list)
    tags: list[TagSpec] = field(default_factory=list)
    registry: list[RegistrySpec] = field(default_factory=list)
    gps: GpsSpec = field(default_factory=GpsSpec)
    bearing_noise_deg: float = 0.0
    policies: dict[str, PolicySpec] = field(default_factory=dict)
    taskings: list[TaskingSpec] = field(default_factory=list)
    events: list[EventSpec] = field(default_factory=list)
    hitl: HitlSpec = field(default_factory=HitlSpec)

    def to_document(self) -> dict[str, Any]:
        """Normalized document with every default materialized."""
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "duration_s": float(self.duration_s),
            "tick_s": float(self.tick_s),
            "mode": self.mode.value,
            "signer": self.signer,
            "bands": {
                band.value: {k: float(v) for k, v in sorted(overrides.items())}
                for band, overrides in sorted(self.bands.items(), key=lambda kv: kv[0].value)
            },
            "trust": {
                "root": {"id": self.trust.root.id, "key_seed": self.trust.root.key_seed},
                "intermediates": [
                    {"id": i.id, "key_seed": i.key_seed} for i in self.trust.intermediates
                ],
                "crl_issuer": self.trust.crl_issuer or self.trust.root.id,
            },
            "emblems": [
                {
                    "emblem_id": e.emblem_id,
                    "issuer": e.issuer,
                    "subject_type": e.subject_type.name.lower(),
                    "valid_from": e.valid_from,
                    "valid_to": e.valid_to,
                    "zone_radius_m": e.zone_radius_m,
                    "lat_deg": float(e.lat_deg),
                    "lon_deg": float(e.lon_deg),
                    "subject_key_seed": e.subject_key_seed,
                    **({"sign_key_seed": e.sign_key_seed} if e.sign_key_seed is not None else {}),
                }
                for e in self.emblems
            ],
            "entities": [
                {
                    "id": e.id,
                    "kind": e.kind.value,
                    "position": [float(c) for c in e.position.as_tuple()],
                    "mobility": e.mobility.value,
                    "protected": e.protected,
                    "velocity": [float(c) for c in e.velocity],
                }
                for e in self.entities
            ],
            "satellites": [
                {"id": s.id, "position": [float(c) for c in s.position.as_tuple()]}
                for s in self.satellites
            ],
            "emitters": [
                {
                    "owner": e.owner,
                    "band": e.band.value,
                    "emblem": e.emblem,
                    "period_s": float(e.period_s),
                    "range_multiplier": float(e.range_multiplier),
                }
                for e in self.emitters
            ],
            "jammers": [
                {
                    "owner": j.owner,
                    "band": j.band.value,
                    "radius_m": float(j.radius_m),
                    "mode": j.mode,
                    "rate": float(j.rate),
                    "active": j.active,
                }
                for j in self.jammers
            ],
            "tags": [
                {
                    "tag_id": t.tag_id,
                    "kind": t.kind,
                    "owner": t.owner,
                    "powered": t.powered,
                    **({"emblem": t.emblem} if t.emblem is not None else {}),
                }
                for t in self.tags
            ],
            "registry": [
                {
                    "emblem": r.emblem,
                    "position": [float(c) for c in r.position.as_tuple()],
                    "zone_radius_m": float(r.zone_radius_m),
                }
                for r in self.registry
            ],
            "gps": {
                "clock_bias_s": float(self.gps.clock_bias_s),
                "noise_sigma_m": float(self.gps.noise_sigma_m),
            },
            "bearing_noise_deg": float(self.bearing_noise_deg),
            "policies": {
                weapon: {
                    "on_protected": p.on_protected,
                    "mobile_screening": p.mobile_screening,
                    "inventory": p.inventory,
                    "aloha_frame_size": p.aloha_frame_size,
                    "aloha_max_rounds": p.aloha_max_rounds,
                    "passive": {
                        "enabled": p.passive.enabled,
                        "false_positive_rate": float(p.passive.false_positive_rate),
                        "false_negative_rate": float(p.passive.false_negative_rate),
                        "sensor_range_m": float(p.passive.sensor_range_m),
                        "confidence": [float(p.passive.confidence[0]), float(p.passive.confidence[1])],
                        "bar_action": p.passive.bar_action,
                    },
                    "registry_match_radius_m": float(p.registry_match_radius_m),
                    "operator_timeout_s": float(p.operator_timeout_s),
                    "timeout_action": p.timeout_action,
                    "stages": {
                        "gps": p.stages.gps,
                        "bearing": p.stages.bearing,
                        "registry": p.stages.registry,
                        "rfid": p.stages.rfid,
                    },
                    "rfid_range_m": float(p.rfid_range_m),
                    "recheck_in_engage": p.recheck_in_engage,
                }
                for weapon, p in sorted(self.policies.items())
            },
            "taskings": [
                {"weapon": t.weapon, "target": t.target, "start_s": float(t.start_s)}
                for t in self.taskings
            ],
            "events": [
                {
                    "at_s": float(ev.at_s),
                    "action": ev.action,
                    **({"emblem": ev.emblem} if ev.emblem is not None else {}),
                    **({"issuer": ev.issuer} if ev.issuer is not None else {}),
                    **({"owner": ev.owner} if ev.owner is not None else {}),
                }
                for ev in self.events
            ],
            "hitl": {
                "mode": self.hitl.mode,
                "decisions": [
                    {
                        "engagement": d.engagement,
                        "decision": d.decision,
                        "operator_id": d.operator_id,
                        "after_s": float(d.after_s),
                    }
                    for d in self.hitl.decisions
                ],
            },
        }


def canonical_dumps(document: dict) -> str:
    """The canonical text form: sorted keys, 2-space indent, final newline."""
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dump_scenario(scenario: Scenario) -> str:
    return canonical_dumps(scenario.to_document())


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

_DEFAULT_MOBILITY = {
    EntityKind.STATIONARY_FACILITY: Mobility.STATIONARY,
    EntityKind.JAMMER: Mobility.STATIONARY,
    EntityKind.SATELLITE: Mobility.MOBILE,
    EntityKind.MOBILE_UNIT: Mobility.MOBILE,
    EntityKind.PERSONNEL: Mobility.MOBILE,
    EntityKind.WEAPON_SYSTEM: Mobility.MOBILE,
}


def load_scenario(document: dict | str) -> Scenario:
    """Parse and validate a scenario document.

    Raises SchemaError with every structural problem, then
    DanglingReference with every unresolved id, ``errors`` carrying the
    full lists.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError([f"not valid JSON: {exc}"]) from exc

    validator = jsonschema.Draft202012Validator(scenario_schema())
    schema_errors = [
        f"{'/'.join(str(p) for p in err.absolute_path) or '(root)'}: {err.message}"
        for err in sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    ]
    if schema_errors:
        raise SchemaError(schema_errors)

    scenario = _parse(document)
    _check_references(scenario)
    _check_semantics(scenario)
    return scenario


def _parse(doc: dict) -> Scenario:
    trust_doc = doc["trust"]
    trust = TrustSpec(
        root=IssuerSpec(trust_doc["root"]["id"], trust_doc["root"]["key_seed"]),
        intermediates=[
            IssuerSpec(i["id"], i["key_seed"]) for i in trust_doc.get("intermediates", [])
        ],
        crl_issuer=trust_doc.get("crl_issuer", trust_doc["root"]["id"]),
    )
    entities = []
    for e in doc.get("entities", []):
        kind = EntityKind(e["kind"])
        mobility = Mobility(e["mobility"]) if "mobility" in e else _DEFAULT_MOBILITY[kind]
        entities.append(
            EntitySpec(
                id=e["id"],
                kind=kind,
                position=Position(*e["position"]),
                mobility=mobility,
                protected=e["protected"],
                velocity=tuple(e.get("velocity", (0.0, 0.0, 0.0))),
            )
        )
    policies = {}
    for weapon, p in doc.get("policies", {}).items():
        pas = p.get("passive", {})
        policies[weapon] = PolicySpec(
            on_protected=p.get("on_protected", "abort"),
            mobile_screening=p.get("mobile_screening", True),
            inventory=p.get("inventory", "tree"),
            aloha_frame_size=p.get("aloha_frame_size", 16),
            aloha_max_rounds=p.get("aloha_max_rounds", 32),
            passive=PassivePolicySpec(
                enabled=pas.get("enabled", True),
                false_positive_rate=pas.get("false_positive_rate", 0.0),
                false_negative_rate=pas.get("false_negative_rate", 0.0),
                sensor_range_m=pas.get("sensor_range_m", 2000.0),
                confidence=tuple(pas.get("confidence", (0.7, 0.99))),
                bar_action=pas.get("bar_action", "abort"),
            ),
            registry_match_radius_m=p.get("registry_match_radius_m", 500.0),
            operator_timeout_s=p.get("operator_timeout_s", 30.0),
            timeout_action=p.get("timeout_action", "abort"),
            stages=StagesSpec(**p.get("stages", {})),
            rfid_range_m=p.get("rfid_range_m", 100.0),
            recheck_in_engage=p.get("recheck_in_engage", False),
        )
    hitl_doc = doc.get("hitl", {"mode": "off"})
    hitl = HitlSpec(
        mode=hitl_doc.get("mode", "off"),
        decisions=[
            ScriptedDecisionSpec(
                engagement=d["engagement"],
                decision=d["decision"],
                operator_id=d.get("operator_id", "script"),
                after_s=d.get("after_s", 0.0),
            )
            for d in hitl_doc.get("decisions", [])
        ],
    )
    return Scenario(
        seed=doc["seed"],
        duration_s=doc["duration_s"],
        tick_s=doc.get("tick_s", 0.1),
        mode=WorldMode(doc.get("mode", "flat")),
        signer=doc.get("signer", "mock"),
        bands={
            FrequencyBand.from_name(name): dict(overrides)
            for name, overrides in doc.get("bands", {}).items()
        },
        trust=trust,
        emblems=[
            EmblemSpec(
                emblem_id=e["emblem_id"],
                issuer=e["issuer"],
                subject_type=SubjectType[e["subject_type"].upper()],
                valid_from=e["valid_from"],
                valid_to=e["valid_to"],
                zone_radius_m=e.get("zone_radius_m", 0),
                lat_deg=e.get("lat_deg", 0.0),
                lon_deg=e.get("lon_deg", 0.0),
                subject_key_seed=e.get("subject_key_seed", 0),
                sign_key_seed=e.get("sign_key_seed"),
            )
            for e in doc.get("emblems", [])
        ],
        entities=entities,
        satellites=[
            SatelliteSpec(s["id"], Position(*s["position"]))
            for s in doc.get("satellites", [])
        ],
        emitters=[
            EmitterSpec(
                owner=e["owner"],
                band=FrequencyBand.from_name(e["band"]),
                emblem=e["emblem"],
                period_s=e["period_s"],
                range_multiplier=e.get("range_multiplier", 1.0),
            )
            for e in doc.get("emitters", [])
        ],
        jammers=[
            JammerSpec(
                owner=j["owner"],
                band=FrequencyBand.from_name(j["band"]),
                radius_m=j["radius_m"],
                mode=j["mode"],
                rate=j.get("rate", 0.0),
                active=j.get("active", True),
            )
            for j in doc.get("jammers", [])
        ],
        tags=[
            TagSpec(
                tag_id=t["tag_id"],
                kind=t["kind"],
                owner=t["owner"],
                powered=t.get("powered", "active"),
                emblem=t.get("emblem"),
            )
            for t in doc.get("tags", [])
        ],
        registry=[
            RegistrySpec(r["emblem"], Position(*r["position"]), r["zone_radius_m"])
            for r in doc.get("registry", [])
        ],
        gps=GpsSpec(
            clock_bias_s=doc.get("gps", {}).get("clock_bias_s", 0.0),
            noise_sigma_m=doc.get("gps", {}).get("noise_sigma_m", 0.0),
        ),
        bearing_noise_deg=doc.get("bearing_noise_deg", 0.0),
        policies=policies,
        taskings=[
            TaskingSpec(t["weapon"], t["target"], t.get("start_s", 0.0))
            for t in doc.get("taskings", [])
        ],
        events=[
            EventSpec(
                at_s=ev["at_s"],
                action=ev["action"],
                emblem=ev.get("emblem"),
                issuer=ev.get("issuer"),
                owner=ev.get("owner"),
            )
            for ev in doc.get("events", [])
        ],
        hitl=hitl,
    )


def _check_references(s: Scenario) -> None:
    errors: list[str] = []
    entity_ids = {e.id for e in s.entities}
    emblem_ids = {e.emblem_id for e in s.emblems}
    issuer_ids = set(s.trust.issuer_ids())
    weapon_ids = {e.id for e in s.entities if e.kind is EntityKind.WEAPON_SYSTEM}

    def need(kind: str, ident: str, pool: set[str], where: str) -> None:
        if ident not in pool:
            errors.append(f"{where}: unknown {kind} {ident!r}")

    for e in s.emblems:
        need("issuer", e.issuer, issuer_ids, f"emblem {e.emblem_id!r}")
    for em in s.emitters:
        need("entity", em.owner, entity_ids, f"emitter on {em.owner!r}")
        need("emblem", em.emblem, emblem_ids, f"emitter on {em.owner!r}")
    for j in s.jammers:
        need("entity", j.owner, entity_ids, f"jammer on {j.owner!r}")
    for t in s.tags:
        need("entity", t.owner, entity_ids, f"tag {t.tag_id}")
        if t.kind == "emblem":
            if t.emblem is None:
                errors.append(f"tag {t.tag_id}: emblem tag missing its emblem id")
            else:
                need("emblem", t.emblem, emblem_ids, f"tag {t.tag_id}")
    for r in s.registry:
        need("emblem", r.emblem, emblem_ids, "registry record")
    for weapon in s.policies:
        need("weapon", weapon, weapon_ids, f"policy for {weapon!r}")
    for t in s.taskings:
        need("weapon", t.weapon, weapon_ids, f"tasking {t.weapon!r}->{t.target!r}")
        need("entity", t.target, entity_ids, f"tasking {t.weapon!r}->{t.target!r}")
    for ev in s.events:
        if ev.action in ("revoke_emblem",):
            if ev.emblem is None:
                errors.append(f"event {ev.action}@{ev.at_s}: missing emblem")
            else:
                need("emblem", ev.emblem, emblem_ids, f"event {ev.action}@{ev.at_s}")
        if ev.action in ("revoke_issuer",):
            if ev.issuer is None:
                errors.append(f"event {ev.action}@{ev.at_s}: missing issuer")
            else:
                need("issuer", ev.issuer, issuer_ids, f"event {ev.action}@{ev.at_s}")
        if ev.action in ("jammer_on", "jammer_off"):
            jammer_owners = {j.owner for j in s.jammers}
            if ev.owner is None:
                errors.append(f"event {ev.action}@{ev.at_s}: missing owner")
            else:
                need("jammer", ev.owner, jammer_owners, f"event {ev.action}@{ev.at_s}")
    engagement_ids = {f"{t.weapon}:{t.target}" for t in s.taskings}
    for d in s.hitl.decisions:
        need("engagement", d.engagement, engagement_ids, "scripted decision")
    if s.trust.crl_issuer and s.trust.crl_issuer not in issuer_ids:
        errors.append(f"trust: unknown crl_issuer {s.trust.crl_issuer!r}")
    if errors:
        raise DanglingReference(errors)


def _check_semantics(s: Scenario) -> None:
    errors: list[str] = []
    seen: set[str] = set()
    for e in s.entities:
        if e.id in seen:
            errors.append(f"duplicate entity id {e.id!r}")
        seen.add(e.id)
        if e.kind is EntityKind.STATIONARY_FACILITY and e.mobility is not Mobility.STATIONARY:
            errors.append(f"entity {e.id!r}: a StationaryFacility cannot be Mobile")
        if e.kind is not EntityKind.SATELLITE:
            try:
                validate_ground_position(e.position, s.mode)
            except ValueError as exc:
                errors.append(f"entity {e.id!r}: {exc}")
    sat_seen: set[str] = set()
    for sat in s.satellites:
        if sat.id in sat_seen or sat.id in seen:
            errors.append(f"duplicate satellite id {sat.id!r}")
        sat_seen.add(sat.id)
    emblem_seen: set[str] = set()
    for e in s.emblems:
        if e.emblem_id in emblem_seen:
            errors.append(f"duplicate emblem id {e.emblem_id!r}")
        emblem_seen.add(e.emblem_id)
        if not e.valid_from < e.valid_to:
            errors.append(f"emblem {e.emblem_id!r}: empty validity window")
    tag_seen: set[int] = set()
    for t in s.tags:
        if t.tag_id in tag_seen:
            errors.append(f"duplicate tag id {t.tag_id}")
        tag_seen.add(t.tag_id)
    issuer_seen: set[str] = set()
    for ident in s.trust.issuer_ids():
        if ident in issuer_seen:
            errors.append(f"duplicate issuer id {ident!r}")
        issuer_seen.add(ident)
        if len(ident.encode()) > 8:
            errors.append(f"issuer id {ident!r} longer than 8 bytes")
    for e in s.emblems:
        if len(e.emblem_id.encode()) > 16:
            errors.append(f"emblem id {e.emblem_id!r} longer than 16 bytes")
    if errors:
        raise DanglingReference(errors)
