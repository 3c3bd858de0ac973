import itertools
import pathlib
import random

import numpy as np
import pytest

from emblemsim.channel import Delivery, DeliveryStatus
from emblemsim.engagement import (
    ALLOWED_TRANSITIONS,
    BeaconReception,
    BeaconStatus,
    ChallengeOutcome,
    EngagementPolicy,
    EngagementState,
    Outcome,
    OperatorDecision,
    Phase,
    RegistryMatch,
    RfidView,
    SensorOutOfRange,
    StageStatus,
    StaleDecision,
    TagScreen,
    VerificationEvidence,
    decide_from_evidence,
    replay_log,
    resolve_operator,
    screen_mobile_tags,
    step,
)
from emblemsim.model import Mobility, Position
from emblemsim.oracle import PassiveOracleConfig, passive_recognize
from emblemsim.rand import pystream, substream
from emblemsim.rfid import Tag, TagKind, TagPower
from emblemsim.trust import Verdict
from tests.test_codec import make_cert

CERT = make_cert()


def evidence(**kw) -> VerificationEvidence:
    ev = VerificationEvidence()
    for key, value in kw.items():
        setattr(ev, key, value)
    return ev


def valid_beacon(**kw):
    return evidence(beacon=(CERT, Verdict.VALID), beacon_status=BeaconStatus.OK, **kw)


FULL_SUCCESS = dict(
    self_fix_status=StageStatus.OK,
    emitter_loc_status=StageStatus.OK,
    registry_match=RegistryMatch.MATCH,
    rfid_confirm=ChallengeOutcome.CONFIRMED,
)


class TestDecisionTable:
    def test_nothing_bars_engagement(self):
        decision = decide_from_evidence(evidence(), EngagementPolicy())
        assert decision.outcome is Outcome.PROCEED

    def test_full_pipeline_success_bars(self):
        decision = decide_from_evidence(valid_beacon(**FULL_SUCCESS), EngagementPolicy())
        assert decision.outcome is Outcome.ABORT
        assert decision.reason == "protective_emblem_confirmed"

    def test_missile_policy_disintegrates(self):
        policy = EngagementPolicy(on_protected=Outcome.DISINTEGRATE)
        decision = decide_from_evidence(valid_beacon(**FULL_SUCCESS), policy)
        assert decision.outcome is Outcome.DISINTEGRATE

    def test_registry_unavailable_escalates(self):
        ev = valid_beacon(
            self_fix_status=StageStatus.OK,
            emitter_loc_status=StageStatus.OK,
            registry_match=RegistryMatch.UNAVAILABLE,
        )
        decision = decide_from_evidence(ev, EngagementPolicy())
        assert decision.outcome is Outcome.ESCALATE
        assert decision.reason == "registry_unavailable"

    def test_gps_unavailable_escalates(self):
        ev = valid_beacon(self_fix_status=StageStatus.UNAVAILABLE)
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.ESCALATE

    def test_stage_skipped_by_policy_escalates(self):
        ev = valid_beacon(self_fix_status=StageStatus.SKIPPED)
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.ESCALATE

    def test_revoked_beacon_does_not_bar(self):
        ev = evidence(
            beacon=(CERT, Verdict.REVOKED),
            beacon_status=BeaconStatus.OK,
            misuse=["cert_Revoked"],
        )
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.PROCEED

    def test_blocked_beacon_escalates(self):
        ev = evidence(beacon_status=BeaconStatus.BLOCKED)
        decision = decide_from_evidence(ev, EngagementPolicy())
        assert decision.outcome is Outcome.ESCALATE
        assert decision.reason == "beacon_blocked"

    def test_undecodable_beacon_escalates(self):
        ev = evidence(beacon_status=BeaconStatus.UNDECODABLE)
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.ESCALATE

    def test_no_tags_bars(self):
        ev = evidence(tag_screen=TagScreen.NO_TAGS)
        decision = decide_from_evidence(ev, EngagementPolicy())
        assert decision.outcome is Outcome.ABORT
        assert decision.reason == "no_tags_deemed_protected"

    def test_armed_tag_does_not_bar(self):
        ev = evidence(tag_screen=TagScreen.ARMED_TAG_PRESENT)
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.PROCEED

    def test_passive_protected_bars_or_escalates(self):
        ev = evidence(passive_verdict=("protected", 0.9))
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.ABORT
        policy = EngagementPolicy(passive_bar_action=Outcome.ESCALATE)
        assert decide_from_evidence(ev, policy).outcome is Outcome.ESCALATE

    def test_passive_combatant_proceeds(self):
        ev = evidence(passive_verdict=("combatant", 0.8))
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.PROCEED

    def test_registry_no_match_escalates_not_proceeds(self):
        ev = valid_beacon(
            self_fix_status=StageStatus.OK,
            emitter_loc_status=StageStatus.OK,
            registry_match=RegistryMatch.NO_MATCH,
        )
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.ESCALATE

    def test_rfid_mismatch_escalates(self):
        ev = valid_beacon(
            self_fix_status=StageStatus.OK,
            emitter_loc_status=StageStatus.OK,
            registry_match=RegistryMatch.MATCH,
            rfid_confirm=ChallengeOutcome.MISMATCH,
        )
        assert decide_from_evidence(ev, EngagementPolicy()).outcome is Outcome.ESCALATE

    def test_override_converts_escalations_only(self):
        policy = EngagementPolicy()
        blocked = evidence(beacon_status=BeaconStatus.BLOCKED, operator_override=True)
        assert decide_from_evidence(blocked, policy).outcome is Outcome.PROCEED
        confirmed = valid_beacon(**FULL_SUCCESS)
        confirmed.operator_override = True
        assert decide_from_evidence(confirmed, policy).outcome is Outcome.ABORT
        no_tags = evidence(tag_screen=TagScreen.NO_TAGS, operator_override=True)
        assert decide_from_evidence(no_tags, policy).outcome is Outcome.ABORT

    def test_valid_beacon_never_proceeds_autonomously(self):
        """Brute force: with a Valid verdict and no operator override, no
        combination of downstream outcomes yields Proceed."""
        policy = EngagementPolicy()
        for combo in _evidence_product(verdicts=[Verdict.VALID], override=[False]):
            if combo.beacon is None:
                continue
            decision = decide_from_evidence(combo, policy)
            assert decision.outcome is not Outcome.PROCEED, combo

    def test_confirmed_emblem_always_bars_product_space(self):
        policy = EngagementPolicy()
        for combo in _evidence_product():
            if (
                combo.beacon is not None
                and combo.beacon[1] is Verdict.VALID
                and combo.registry_match is RegistryMatch.MATCH
                and combo.rfid_confirm is ChallengeOutcome.CONFIRMED
            ):
                decision = decide_from_evidence(combo, policy)
                assert decision.outcome in (Outcome.ABORT, Outcome.DISINTEGRATE)

    def test_no_tags_bars_product_space(self):
        policy = EngagementPolicy()
        for combo in _evidence_product():
            if combo.tag_screen is TagScreen.NO_TAGS and not (
                combo.beacon is not None and combo.beacon[1] is Verdict.VALID
            ) and combo.beacon_status not in (BeaconStatus.BLOCKED, BeaconStatus.UNDECODABLE):
                decision = decide_from_evidence(combo, policy)
                assert decision.outcome is Outcome.ABORT


def _evidence_product(verdicts=None, override=(False, True)):
    """Enumerate the full product space of pipeline stage outcomes."""
    beacon_options = [None] + [
        (CERT, v) for v in (verdicts or list(Verdict))
    ]
    for (
        beacon,
        status,
        fix_status,
        loc_status,
        registry,
        rfid,
        screen,
        passive,
        ovr,
    ) in itertools.product(
        beacon_options,
        list(BeaconStatus),
        [StageStatus.NOT_RUN, StageStatus.OK, StageStatus.UNAVAILABLE, StageStatus.SKIPPED],
        [StageStatus.NOT_RUN, StageStatus.OK, StageStatus.UNAVAILABLE],
        [None, RegistryMatch.MATCH, RegistryMatch.NO_MATCH, RegistryMatch.UNAVAILABLE],
        [None, ChallengeOutcome.CONFIRMED, ChallengeOutcome.NO_RESPONSE, ChallengeOutcome.MISMATCH],
        [None, TagScreen.ARMED_TAG_PRESENT, TagScreen.NO_TAGS],
        [None, ("protected", 0.9), ("combatant", 0.9)],
        override,
    ):
        yield evidence(
            beacon=beacon,
            beacon_status=status,
            self_fix_status=fix_status,
            emitter_loc_status=loc_status,
            registry_match=registry,
            rfid_confirm=rfid,
            tag_screen=screen,
            passive_verdict=passive,
            operator_override=ovr,
        )


class TestScreening:
    def tags(self, kinds, pos=Position(10, 0, 0)):
        return [
            Tag(tag_id=i + 1, kind=k, powered=TagPower.ACTIVE, position=pos,
                emblem_id=b"emblem-x".ljust(16, b"\0") if k is TagKind.EMBLEM else None)
            for i, k in enumerate(kinds)
        ]

    def view(self, tags):
        return RfidView(tags=tags, reader_pos=Position(0, 0, 0), nominal_range_m=100.0)

    def test_weapon_tag_detected_by_tree(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        screen = screen_mobile_tags(
            state, self.view(self.tags([TagKind.WEAPON])), EngagementPolicy(), pystream(1)
        )
        assert screen is TagScreen.ARMED_TAG_PRESENT

    def test_no_tags_deemed_protected(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        screen = screen_mobile_tags(
            state, self.view([]), EngagementPolicy(), pystream(2)
        )
        assert screen is TagScreen.NO_TAGS

    def test_emblem_only_tags_mean_no_weapons(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        screen = screen_mobile_tags(
            state, self.view(self.tags([TagKind.EMBLEM])), EngagementPolicy(), pystream(3)
        )
        assert screen is TagScreen.NO_TAGS

    def test_aloha_screen_agrees_with_ground_truth(self):
        """50-tag fields, ALOHA, 32 rounds: >= 99% agreement over seeds."""
        agreements = 0
        trials = 1000
        policy = EngagementPolicy(inventory="aloha", aloha_frame_size=16, aloha_max_rounds=32)
        for seed in range(trials):
            rng = random.Random(seed)
            n_weapons = rng.choice([0, 1, 3, 10])
            kinds = [TagKind.WEAPON] * n_weapons + [TagKind.EMBLEM] * (50 - n_weapons)
            state = EngagementState("w:t", b"t".ljust(16, b"\0"))
            screen = screen_mobile_tags(
                state, self.view(self.tags(kinds)), policy, pystream("screen", seed)
            )
            truth = TagScreen.ARMED_TAG_PRESENT if n_weapons else TagScreen.NO_TAGS
            agreements += screen is truth
        assert agreements >= trials * 0.99


class TestPassiveOracle:
    def test_perfect_oracle(self):
        cfg = PassiveOracleConfig()
        rng = substream(1, "p")
        for truth in (True, False):
            label, confidence = passive_recognize(truth, cfg, rng)
            assert label == ("protected" if truth else "combatant")
            assert 0.7 <= confidence <= 0.99

    def test_false_negative_rate_binomial(self):
        """fn = 0.1 over 10,000 protected targets: misses within 99% CI."""
        cfg = PassiveOracleConfig(false_negative_rate=0.1)
        rng = substream(42, "binomial")
        misses = sum(
            passive_recognize(True, cfg, rng)[0] == "combatant" for _ in range(10_000)
        )
        assert abs(misses - 1000) <= 78  # 2.576 * sqrt(10000 * 0.1 * 0.9)

    def test_sensor_out_of_range(self):
        cfg = PassiveOracleConfig(sensor_range_m=2000.0)
        with pytest.raises(SensorOutOfRange):
            passive_recognize(True, cfg, substream(1, "p"), distance_m=2500.0)


def happy_inputs(now=0.0, **kw):
    from emblemsim.engagement import WorldInputs

    defaults = dict(now=now, target_mobility=Mobility.STATIONARY)
    defaults.update(kw)
    return WorldInputs(**defaults)


class TestStateMachine:
    def test_clean_engage_walk(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        policy = EngagementPolicy(passive_enabled=False, mobile_screening=False)
        phases = [state.phase]
        for tick in range(5):
            step(state, happy_inputs(now=tick * 0.1), policy)
            phases.append(state.phase)
        assert phases == [
            Phase.FIND, Phase.FIX, Phase.TRACK, Phase.TARGET, Phase.ENGAGE, Phase.ASSESS,
        ]

    def test_passive_combatant_engages(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        policy = EngagementPolicy()
        inputs = happy_inputs(passive_classify=lambda: ("combatant", 0.97))
        for tick in range(5):
            step(state, inputs, policy)
        assert state.phase is Phase.ASSESS

    def test_passive_protected_aborts(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        inputs = happy_inputs(passive_classify=lambda: ("protected", 0.93))
        for tick in range(4):
            step(state, inputs, EngagementPolicy())
        assert state.phase is Phase.ABORTED

    def test_terminal_state_rejects_step(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"), phase=Phase.ABORTED)
        with pytest.raises(ValueError):
            step(state, happy_inputs(), EngagementPolicy())

    def test_illegal_transition_rejected(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        with pytest.raises(ValueError):
            state.transition(0.0, Phase.ENGAGE)

    def test_every_transition_logged(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        policy = EngagementPolicy(passive_enabled=False, mobile_screening=False)
        for tick in range(5):
            step(state, happy_inputs(now=tick * 0.1), policy)
        phase_events = [e for e in state.decision_log if e.code == "PHASE"]
        assert len(phase_events) == 5


class TestOperator:
    def escalated_state(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        inputs = happy_inputs(
            receptions=[BeaconReception(b"x".ljust(16, b"\0"), Delivery(DeliveryStatus.BLOCKED))],
        )
        policy = EngagementPolicy(passive_enabled=False, mobile_screening=False)
        for tick in range(4):
            step(state, happy_inputs(now=tick * 0.1) if tick < 3 else inputs, policy)
        assert state.phase is Phase.AWAITING_OPERATOR
        return state, policy

    def test_operator_abort(self):
        state, policy = self.escalated_state()
        resolve_operator(state, OperatorDecision("w:t", "abort", "op-1"), policy, 1.0)
        assert state.phase is Phase.ABORTED
        assert state.operator_decided == "abort"

    def test_timeout_fail_safe_abort(self):
        state, policy = self.escalated_state()
        resolve_operator(state, None, policy, 40.0)
        assert state.phase is Phase.ABORTED
        assert state.operator_decided == "timeout"

    def test_proceed_resumes_target_and_engages(self):
        state, policy = self.escalated_state()
        resolve_operator(state, OperatorDecision("w:t", "proceed", "op-1"), policy, 1.0)
        assert state.phase is Phase.TARGET
        assert state.evidence.operator_override
        # same blocked beacon no longer escalates under override
        inputs = happy_inputs(
            now=1.1,
            receptions=[BeaconReception(b"x".ljust(16, b"\0"), Delivery(DeliveryStatus.BLOCKED))],
        )
        step(state, inputs, policy)
        assert state.phase is Phase.ENGAGE

    def test_stale_decision(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        with pytest.raises(StaleDecision):
            resolve_operator(state, OperatorDecision("w:t", "abort", "op-1"), EngagementPolicy(), 0.0)
        assert state.phase is Phase.FIND

    def test_hold_while_awaiting(self):
        state, policy = self.escalated_state()
        before = state.phase
        step(state, happy_inputs(now=5.0), policy)
        assert state.phase is before


class TestReplay:
    def test_replay_matches_terminal(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        policy = EngagementPolicy(passive_enabled=False, mobile_screening=False)
        for tick in range(5):
            step(state, happy_inputs(now=tick * 0.1), policy)
        assert replay_log(state.decision_log) is state.phase is Phase.ASSESS

    def test_replay_rejects_forged_log(self):
        state = EngagementState("w:t", b"t".ljust(16, b"\0"))
        state.log(0.0, "PHASE", "from=Find to=Engage")
        with pytest.raises(ValueError):
            replay_log(state.decision_log)


class TestGroundTruthIsolation:
    def test_engine_modules_never_touch_ground_truth(self):
        """No compile-visible path from the engine to the oracle field."""
        src_dir = pathlib.Path("src/emblemsim")
        for module in ("engagement.py", "geo.py", "rfid.py", "codec.py", "channel.py", "trust.py"):
            source = (src_dir / module).read_text()
            assert "ground_truth" not in source, module
