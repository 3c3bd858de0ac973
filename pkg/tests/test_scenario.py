import json

import pytest

from emblemsim.model import FrequencyBand, Mobility, WorldMode
from emblemsim.scenario import (
    DanglingReference,
    SchemaError,
    canonical_dumps,
    dump_scenario,
    load_scenario,
    scenario_schema,
)
from tests.scenario_fixtures import FIXTURES, fixture_path, minimal


class TestLoading:
    def test_minimal_fixture_loads(self):
        scenario = load_scenario(minimal())
        assert scenario.seed == 42
        assert scenario.mode is WorldMode.FLAT
        assert len(scenario.satellites) == 4
        assert scenario.entities[0].mobility is Mobility.STATIONARY

    def test_loads_from_text(self):
        scenario = load_scenario(json.dumps(minimal()))
        assert scenario.duration_s == 2.0

    def test_invalid_json(self):
        with pytest.raises(SchemaError):
            load_scenario("{not json")

    def test_band_overrides_parsed(self):
        doc = minimal()
        doc["bands"] = {"RFID-UHF": {"nominal_range_m": 2000.0}}
        scenario = load_scenario(doc)
        assert scenario.bands[FrequencyBand.RFID_UHF]["nominal_range_m"] == 2000.0


class TestSchemaErrors:
    def test_missing_required_fields_all_reported(self):
        with pytest.raises(SchemaError) as exc:
            load_scenario({"schema_version": 1})
        text = " ".join(exc.value.errors)
        assert "seed" in text and "duration_s" in text and "trust" in text

    def test_unknown_top_level_key(self):
        doc = minimal()
        doc["surprise"] = 1
        with pytest.raises(SchemaError) as exc:
            load_scenario(doc)
        assert any("surprise" in e for e in exc.value.errors)

    def test_bad_enum_value(self):
        doc = minimal()
        doc["entities"][0]["kind"] = "Castle"
        with pytest.raises(SchemaError):
            load_scenario(doc)

    def test_multiple_errors_collected(self):
        doc = minimal()
        doc["entities"][0]["kind"] = "Castle"
        doc["mode"] = "donut"
        with pytest.raises(SchemaError) as exc:
            load_scenario(doc)
        assert len(exc.value.errors) >= 2


class TestReferences:
    def test_emitter_unknown_owner(self):
        doc = minimal()
        doc["emblems"] = [
            {"emblem_id": "emblem-1", "issuer": "icrc-eu", "subject_type": "stationary",
             "valid_from": 0, "valid_to": 10, "zone_radius_m": 5}
        ]
        doc["emitters"] = [
            {"owner": "ghost-1", "band": "LBand", "emblem": "emblem-1", "period_s": 1.0}
        ]
        with pytest.raises(DanglingReference) as exc:
            load_scenario(doc)
        assert any("ghost-1" in e for e in exc.value.errors)

    def test_all_dangling_references_reported(self):
        doc = minimal()
        doc["taskings"] = [
            {"weapon": "nobody-1", "target": "clinic-1"},
            {"weapon": "weapon-1", "target": "nothing-1"},
        ]
        with pytest.raises(DanglingReference) as exc:
            load_scenario(doc)
        text = " ".join(exc.value.errors)
        assert "nobody-1" in text and "nothing-1" in text

    def test_duplicate_entity_ids(self):
        doc = minimal()
        doc["entities"].append(dict(doc["entities"][0]))
        with pytest.raises(DanglingReference) as exc:
            load_scenario(doc)
        assert any("duplicate" in e for e in exc.value.errors)

    def test_stationary_facility_mobility_conflict(self):
        doc = minimal()
        doc["entities"][0]["mobility"] = "Mobile"
        with pytest.raises(DanglingReference):
            load_scenario(doc)

    def test_earth_mode_requires_surface_positions(self):
        doc = minimal()
        doc["mode"] = "earth"
        with pytest.raises(DanglingReference) as exc:
            load_scenario(doc)
        assert any("earth mode" in e for e in exc.value.errors)

    def test_scripted_decision_for_unknown_engagement(self):
        doc = minimal()
        doc["hitl"] = {
            "mode": "scripted",
            "decisions": [{"engagement": "weapon-1:ghost-9", "decision": "abort"}],
        }
        with pytest.raises(DanglingReference):
            load_scenario(doc)


class TestCanonicalRoundTrip:
    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_fixture_corpus_roundtrips_byte_identical(self, name):
        raw = fixture_path(name).read_text()
        scenario = load_scenario(raw)
        assert dump_scenario(scenario) == raw

    def test_canonicalization_idempotent(self):
        doc = load_scenario(minimal()).to_document()
        once = canonical_dumps(doc)
        assert canonical_dumps(json.loads(once)) == once

    def test_defaults_materialized(self):
        scenario = load_scenario(minimal())
        doc = scenario.to_document()
        assert doc["tick_s"] == 0.1
        assert doc["hitl"] == {"mode": "off", "decisions": []}
        assert doc["gps"] == {"clock_bias_s": 0.0, "noise_sigma_m": 0.0}


class TestSchemaDocument:
    def test_schema_is_valid_draft_2020(self):
        import jsonschema

        jsonschema.Draft202012Validator.check_schema(scenario_schema())
