import math

import pytest
from hypothesis import given, strategies as st

from emblemsim.model import (
    DEFAULT_BANDS,
    Entity,
    EntityKind,
    FrequencyBand,
    Mobility,
    Position,
    ProtectionMode,
    Sensing,
    VerificationStrategy,
    WorldMode,
    distance,
    entity_id,
    entity_name,
    protection_matrix_lookup,
    validate_ground_position,
)

finite = st.floats(min_value=-1e7, max_value=1e7, allow_nan=False)
positions = st.builds(Position, finite, finite, finite)


class TestProtectionMatrix:
    def test_active_stationary(self):
        mode = ProtectionMode(Sensing.ACTIVE, Mobility.STATIONARY)
        assert protection_matrix_lookup(mode) is VerificationStrategy.BEACON_PIPELINE

    def test_passive_mobile(self):
        mode = ProtectionMode(Sensing.PASSIVE, Mobility.MOBILE)
        assert protection_matrix_lookup(mode) is VerificationStrategy.PASSIVE_RECOGNITION_MOBILE

    def test_active_mobile(self):
        mode = ProtectionMode(Sensing.ACTIVE, Mobility.MOBILE)
        assert protection_matrix_lookup(mode) is VerificationStrategy.BEACON_PIPELINE_MOBILE

    def test_total_and_pure(self):
        seen = set()
        for sensing in Sensing:
            for mobility in Mobility:
                mode = ProtectionMode(sensing, mobility)
                first = protection_matrix_lookup(mode)
                assert protection_matrix_lookup(mode) is first
                seen.add(first)
        assert len(seen) == 4


class TestDistance:
    def test_identity(self):
        p = Position(0, 0, 0)
        assert distance(p, p) == 0.0

    def test_pythagorean_triple(self):
        assert distance(Position(3, 4, 0), Position(0, 0, 0)) == 5.0

    @given(positions, positions)
    def test_matches_sum_of_squares_oracle(self, a, b):
        oracle = math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)
        got = distance(a, b)
        assert got == pytest.approx(oracle, rel=1e-9, abs=1e-12)

    @given(positions, positions)
    def test_symmetric_nonnegative(self, a, b):
        assert distance(a, b) == distance(b, a) >= 0.0

    @given(positions, positions, positions)
    def test_triangle_inequality(self, a, b, c):
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-6


class TestPosition:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Position(float("nan"), 0, 0)
        with pytest.raises(ValueError):
            Position(0, float("inf"), 0)

    def test_earth_mode_shell(self):
        validate_ground_position(Position(6.371e6, 0, 0), WorldMode.EARTH)
        with pytest.raises(ValueError):
            validate_ground_position(Position(100.0, 0, 0), WorldMode.EARTH)
        # flat mode is unconstrained
        validate_ground_position(Position(100.0, 0, 0), WorldMode.FLAT)


class TestBands:
    def test_table_defaults(self):
        expect = {
            FrequencyBand.L_BAND: (1e9, 2e9, 1_000_000.0),
            FrequencyBand.X_BAND: (8e9, 12e9, 100_000.0),
            FrequencyBand.MICROWAVE: (1e9, 100e9, 100_000.0),
            FrequencyBand.INFRARED: (1e12, 100e12, 100.0),
            FrequencyBand.OPTICAL: (430e12, 750e12, 2000.0),
            FrequencyBand.RFID_LF: (119e3, 135e3, 100.0),
            FrequencyBand.RFID_HF: (13.553e6, 13.567e6, 100.0),
            FrequencyBand.RFID_UHF: (860e6, 960e6, 100.0),
            FrequencyBand.WIFI: (2.4e9, 5.875e9, 100.0),
        }
        for band, (lo, hi, rng) in expect.items():
            spec = DEFAULT_BANDS[band]
            assert spec.freq_low == lo and spec.freq_high == hi
            assert spec.nominal_range == rng

    def test_thermal_band_is_9_to_14_micron(self):
        spec = DEFAULT_BANDS[FrequencyBand.THERMAL]
        c = 299_792_458.0
        assert spec.freq_low == pytest.approx(c / 14e-6)
        assert spec.freq_high == pytest.approx(c / 9e-6)
        assert spec.nominal_range == 2000.0

    def test_rfid_bands_cover_cited_frequencies(self):
        for band, freq in [
            (FrequencyBand.RFID_LF, 125e3),
            (FrequencyBand.RFID_HF, 13.56e6),
            (FrequencyBand.RFID_UHF, 900e6),
        ]:
            spec = DEFAULT_BANDS[band]
            assert spec.freq_low <= freq <= spec.freq_high

    def test_ordinals_roundtrip(self):
        for band in FrequencyBand:
            assert FrequencyBand.from_ordinal(band.ordinal) is band
        with pytest.raises(ValueError):
            FrequencyBand.from_ordinal(10)


class TestEntity:
    def test_stationary_facility_cannot_be_mobile(self):
        with pytest.raises(ValueError):
            Entity(
                id=entity_id("hospital-1"),
                kind=EntityKind.STATIONARY_FACILITY,
                position=Position(0, 0, 0),
                mobility=Mobility.MOBILE,
                ground_truth_protected=True,
            )

    def test_id_roundtrip(self):
        ident = entity_id("weapon-1")
        assert len(ident) == 16
        assert entity_name(ident) == "weapon-1"

    def test_id_rejects_whitespace_and_oversize(self):
        with pytest.raises(ValueError):
            entity_id("has space")
        with pytest.raises(ValueError):
            entity_id("x" * 17)
