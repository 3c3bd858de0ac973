import pytest

from emblemsim import codec
from emblemsim.channel import (
    Delivery,
    DeliveryStatus,
    Emitter,
    JamMode,
    JammerField,
    SlotOutcome,
    collision_set,
    deliver,
    in_range,
)
from emblemsim.model import DEFAULT_BANDS, FrequencyBand, Position
from emblemsim.rand import substream
from tests.test_codec import make_cert


def make_emitter(band=FrequencyBand.L_BAND, pos=Position(0, 0, 0), multiplier=1.0,
                 frame=b"\xaa" * 16):
    return Emitter(
        owner=b"facility-1".ljust(16, b"\0"),
        band=band,
        frame=frame,
        period_s=1.0,
        range_multiplier=multiplier,
        position=pos,
        nominal_range_m=DEFAULT_BANDS[band].nominal_range,
    )


class TestInRange:
    def test_l_band_999_km(self):
        emitter = make_emitter()
        assert in_range(emitter, Position(999_000, 0, 0))

    def test_wifi_101_m(self):
        emitter = make_emitter(band=FrequencyBand.WIFI)
        assert not in_range(emitter, Position(101, 0, 0))

    def test_closed_boundary(self):
        emitter = make_emitter(band=FrequencyBand.WIFI)
        assert in_range(emitter, Position(100.0, 0, 0))

    def test_multiplier_scales_range(self):
        emitter = make_emitter(band=FrequencyBand.WIFI, multiplier=0.5)
        assert in_range(emitter, Position(50, 0, 0))
        assert not in_range(emitter, Position(51, 0, 0))


class TestDeliver:
    def test_clean_channel(self):
        emitter = make_emitter()
        rng = substream(1, "t")
        result = deliver(emitter, Position(1000, 0, 0), [], rng)
        assert result.status is DeliveryStatus.RECEIVED
        assert result.payload == emitter.frame

    def test_out_of_range(self):
        emitter = make_emitter(band=FrequencyBand.WIFI)
        result = deliver(emitter, Position(1e6, 0, 0), [], substream(1, "t"))
        assert result.status is DeliveryStatus.OUT_OF_RANGE

    def test_block_jammer(self):
        emitter = make_emitter()
        jammer = JammerField(
            owner=b"jammer-1".ljust(16, b"\0"),
            band=FrequencyBand.L_BAND,
            center=Position(1000, 0, 0),
            radius_m=5000,
            mode=JamMode.BLOCK,
        )
        result = deliver(emitter, Position(1000, 0, 0), [jammer], substream(1, "t"))
        assert result.status is DeliveryStatus.BLOCKED

    def test_jammer_on_other_band_ignored(self):
        emitter = make_emitter()
        jammer = JammerField(
            owner=b"jammer-1".ljust(16, b"\0"),
            band=FrequencyBand.X_BAND,
            center=Position(1000, 0, 0),
            radius_m=5000,
            mode=JamMode.BLOCK,
        )
        result = deliver(emitter, Position(1000, 0, 0), [jammer], substream(1, "t"))
        assert result.status is DeliveryStatus.RECEIVED

    def test_block_dominates_bitflip(self):
        emitter = make_emitter()
        who = b"jammer-1".ljust(16, b"\0")
        jam_args = dict(band=FrequencyBand.L_BAND, center=Position(1000, 0, 0), radius_m=5000)
        flip = JammerField(owner=who, mode=JamMode.BIT_FLIP, rate=0.5, **jam_args)
        block = JammerField(owner=who, mode=JamMode.BLOCK, **jam_args)
        result = deliver(emitter, Position(1000, 0, 0), [flip, block], substream(1, "t"))
        assert result.status is DeliveryStatus.BLOCKED

    def test_inactive_jammer_ignored(self):
        emitter = make_emitter()
        jammer = JammerField(
            owner=b"jammer-1".ljust(16, b"\0"),
            band=FrequencyBand.L_BAND,
            center=Position(1000, 0, 0),
            radius_m=5000,
            mode=JamMode.BLOCK,
            active=False,
        )
        result = deliver(emitter, Position(1000, 0, 0), [jammer], substream(1, "t"))
        assert result.status is DeliveryStatus.RECEIVED

    def test_bitflip_deterministic_per_seed(self):
        emitter = make_emitter(frame=bytes(range(64)))
        jammer = JammerField(
            owner=b"jammer-1".ljust(16, b"\0"),
            band=FrequencyBand.L_BAND,
            center=Position(1000, 0, 0),
            radius_m=5000,
            mode=JamMode.BIT_FLIP,
            rate=0.01,
        )
        results = [
            deliver(emitter, Position(1000, 0, 0), [jammer], substream(9, "emitter", 3))
            for _ in range(2)
        ]
        assert results[0] == results[1]
        different_slot = deliver(
            emitter, Position(1000, 0, 0), [jammer], substream(9, "emitter", 4)
        )
        assert different_slot.payload != results[0].payload or (
            different_slot.flipped_bits != results[0].flipped_bits
        )

    def test_bitflip_monte_carlo_matches_analytic_decode_rate(self):
        """1,000 seeds of rate-0.001 noise over the 272-byte beacon frame:
        decode success must sit within 3% of the per-block analytic rate."""
        cert = make_cert()
        frame = codec.encode_beacon(cert, FrequencyBand.L_BAND)
        assert len(frame) == 272
        emitter = make_emitter(frame=frame)
        jammer = JammerField(
            owner=b"jammer-1".ljust(16, b"\0"),
            band=FrequencyBand.L_BAND,
            center=Position(1000, 0, 0),
            radius_m=5000,
            mode=JamMode.BIT_FLIP,
            rate=0.001,
        )
        receiver = Position(1000, 0, 0)
        successes = 0
        flipped_total = 0
        trials = 1000
        for seed in range(trials):
            result = deliver(emitter, receiver, [jammer], substream(seed, "mc"))
            flipped_total += result.flipped_bits
            try:
                decoded = codec.decode_beacon(result.payload)
            except codec.CodecError:
                continue
            if decoded.certificate == cert:
                successes += 1
        # expected flips: 2176 bits x 0.001 = 2.176 per frame
        assert flipped_total / trials == pytest.approx(2.176, rel=0.15)
        p = 0.001
        per_block_ok = (1 - p) ** 7 + 7 * p * (1 - p) ** 6
        analytic = per_block_ok ** 310
        assert successes / trials == pytest.approx(analytic, abs=0.03)


class TestCollisionSet:
    def test_idle(self):
        assert collision_set([], Position(0, 0, 0)).outcome is SlotOutcome.IDLE

    def test_singleton(self):
        emitter = make_emitter()
        result = collision_set([emitter], Position(1000, 0, 0), frames=[emitter.frame])
        assert result.outcome is SlotOutcome.SINGLETON
        assert result.frame == emitter.frame

    def test_collision(self):
        emitters = [make_emitter(), make_emitter(pos=Position(10, 0, 0))]
        result = collision_set(emitters, Position(1000, 0, 0))
        assert result.outcome is SlotOutcome.COLLISION

    def test_out_of_range_transmitters_do_not_count(self):
        near = make_emitter(band=FrequencyBand.WIFI)
        far = make_emitter(band=FrequencyBand.WIFI, pos=Position(1e6, 0, 0))
        result = collision_set([near, far], Position(50, 0, 0), frames=[b"a", b"b"])
        assert result.outcome is SlotOutcome.SINGLETON
        assert result.frame == b"a"
