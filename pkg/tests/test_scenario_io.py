"""Document formats: validation codes, round trips, canonical bytes, run log."""

import json
from pathlib import Path

import pytest

from blendforge import (
    BlendPlan,
    DocumentError,
    RunLog,
    load_plan,
    load_scenario,
    save_plan,
    save_scenario,
)
from blendforge.scenario_io import SCHEMA_VERSION, canonical_bytes, scenario_hash
from toys import degradation_toy, two_rom_toy, utilization_scenario

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "examples"


def minimal_doc(**overrides):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "scenario": {
            "horizon_periods": 1,
            "days_per_period": 30,
            "attributes": [{"code": "ash", "unit": "percent"}],
            "roms": [
                {"id": "r", "available_tonnes": 10_000.0, "quality": {"ash": 9.0}}
            ],
            "products": [
                {
                    "id": "p",
                    "quality_range": {"ash": {"min": 0.0, "max": 20.0}},
                    "base_price_per_tonne": 100.0,
                    "tonnage_target_tonnes": 10_000.0,
                }
            ],
        },
    }
    doc["scenario"].update(overrides)
    return doc


class TestLoadScenario:
    def test_minimal_document_gets_defaults(self):
        scenario = load_scenario(json.dumps(minimal_doc()))
        assert scenario.logistics.lot_size_tonnes == 1000.0
        assert scenario.logistics.min_lots_per_used_rom == 1
        assert scenario.market.discount_rate_per_period == 0.0
        assert scenario.roms[0].available_tonnes == [10_000.0]  # scalar broadcast

    def test_bad_yield_names_the_knot_path(self):
        doc = minimal_doc()
        doc["scenario"]["roms"][0]["wash_curve"] = {
            "bypass_allowed": False,
            "knots": [
                {"cut_point_density": 1.4, "product_ash_percent": 8.0, "yield_fraction": 0.6},
                {"cut_point_density": 1.6, "product_ash_percent": 9.0, "yield_fraction": 1.2},
            ],
        }
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        issues = {(i.code, i.path) for i in err.value.issues}
        assert (
            "curve.yield.range",
            "$.scenario.roms[0].wash_curve.knots[1].yield_fraction",
        ) in issues

    def test_decreasing_densities_rejected(self):
        doc = minimal_doc()
        doc["scenario"]["roms"][0]["wash_curve"] = {
            "knots": [
                {"cut_point_density": 1.6, "product_ash_percent": 8.0, "yield_fraction": 0.6},
                {"cut_point_density": 1.6, "product_ash_percent": 9.0, "yield_fraction": 0.8},
            ]
        }
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        assert any(i.code == "curve.density.order" for i in err.value.issues)

    def test_unknown_field_rejected(self):
        doc = minimal_doc()
        doc["scenario"]["roms"][0]["colour"] = "black"
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        assert any(
            i.code == "unknown-field" and i.path.endswith("colour") for i in err.value.issues
        )

    def test_future_schema_version_rejected(self):
        doc = minimal_doc()
        doc["schema_version"] = SCHEMA_VERSION + 1
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        assert any(i.code == "schema.version" for i in err.value.issues)

    def test_malformed_syntax_rejected(self):
        with pytest.raises(DocumentError) as err:
            load_scenario(b"{not json")
        assert err.value.issues[0].code == "syntax"

    def test_multiple_issues_collected(self):
        doc = minimal_doc()
        doc["scenario"]["roms"][0]["available_tonnes"] = -5.0
        doc["scenario"]["products"][0]["base_price_per_tonne"] = -1.0
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        codes = {i.code for i in err.value.issues}
        assert {"rom.available.negative", "product.price.negative"} <= codes

    def test_percent_out_of_range_rejected(self):
        doc = minimal_doc()
        doc["scenario"]["roms"][0]["quality"]["ash"] = 140.0
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        assert any(i.code == "quality.percent-range" for i in err.value.issues)

    def test_contract_above_target_rejected(self):
        doc = minimal_doc()
        doc["scenario"]["products"][0]["contract_min_tonnes"] = 20_000.0
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        assert any(i.code == "product.contract.exceeds-target" for i in err.value.issues)

    def test_missing_registry_attribute_rejected(self):
        doc = minimal_doc(
            attributes=[
                {"code": "ash", "unit": "percent"},
                {"code": "moisture", "unit": "percent"},
            ]
        )
        with pytest.raises(DocumentError) as err:
            load_scenario(json.dumps(doc))
        assert any(i.code == "quality.missing-attribute" for i in err.value.issues)


class TestRoundTrips:
    @pytest.mark.parametrize(
        "scenario", [two_rom_toy(), utilization_scenario(), degradation_toy()]
    )
    def test_scenario_round_trip(self, scenario):
        assert load_scenario(save_scenario(scenario)) == scenario

    def test_save_is_canonical_and_stable(self):
        scenario = two_rom_toy()
        first = save_scenario(scenario)
        second = save_scenario(load_scenario(first))
        assert first == second
        assert first.decode("utf-8").endswith("\n")

    def test_plan_round_trip(self):
        plan = BlendPlan(
            [(0, "p", "b", 3), (0, "p", "a", 2), (1, "q", "a", 1)],
            {("a", 0): 1.45, ("b", 0): "bypass"},
            [(0, "a", 500.0)],
        )
        assert load_plan(save_plan(plan)) == plan

    def test_empty_plan_round_trip(self):
        assert load_plan(save_plan(BlendPlan.empty())) == BlendPlan.empty()

    def test_plan_bytes_stable_across_authoring_order(self):
        forward = BlendPlan([(0, "p", "a", 2), (0, "p", "b", 3)])
        backward = BlendPlan([(0, "p", "b", 3), (0, "p", "a", 2)])
        assert save_plan(forward) == save_plan(backward)

    def test_plan_future_version_rejected(self):
        doc = json.loads(save_plan(BlendPlan.empty()))
        doc["schema_version"] = 99
        with pytest.raises(DocumentError) as err:
            load_plan(json.dumps(doc))
        assert any(i.code == "schema.version" for i in err.value.issues)

    def test_dangling_ids_load_fine_but_fail_at_bind(self):
        from blendforge import PlanStructureError, evaluate_plan

        plan = load_plan(
            json.dumps(
                {
                    "schema_version": 1,
                    "plan": {
                        "allotments": [
                            {"period": 0, "product_id": "ghost", "rom_id": "r", "lots": 1}
                        ],
                        "cut_points": [],
                        "rehandles": [],
                    },
                }
            )
        )
        scenario = two_rom_toy()
        with pytest.raises(PlanStructureError):
            evaluate_plan(scenario, plan)


class TestPaperExampleFile:
    def test_ships_and_loads(self):
        data = (EXAMPLES / "paper-five-rom.scenario").read_bytes()
        scenario = load_scenario(data)
        assert len(scenario.roms) == 5
        assert len(scenario.products) == 2
        assert save_scenario(scenario) == data  # file is canonical

    def test_lot_budgets_match_the_worked_example(self):
        data = (EXAMPLES / "paper-five-rom.scenario").read_bytes()
        scenario = load_scenario(data)
        assert scenario.target_lots("coking", 0) == 100
        assert scenario.target_lots("thermal", 0) == 100


class TestRunLog:
    def test_fresh_store_empty(self, tmp_path):
        log = RunLog(tmp_path / "runs.runlog")
        assert log.entries() == []

    def test_appends_in_order(self, tmp_path):
        log = RunLog(tmp_path / "runs.runlog")
        log.append("h1", {"name": "anneal"}, [], 10.0, timestamp=1.0)
        log.append("h2", {"name": "anneal"}, [], 20.0, timestamp=2.0)
        entries = log.entries()
        assert [e["scenario_hash"] for e in entries] == ["h1", "h2"]

    def test_survives_restart(self, tmp_path):
        path = tmp_path / "runs.runlog"
        RunLog(path).append("h1", {"name": "anneal"}, [], 10.0, timestamp=1.0)
        fresh_handle = RunLog(path)  # a new process would construct anew
        fresh_handle.append("h2", {"name": "anneal"}, [], 20.0, timestamp=2.0)
        assert len(fresh_handle.entries()) == 2

    def test_unwritable_store_is_loud(self, tmp_path):
        from blendforge import RunLogError

        log = RunLog(tmp_path / "missing-dir" / "runs.runlog")
        with pytest.raises(RunLogError):
            log.append("h", {}, [], 0.0)

    def test_hash_is_stable(self):
        data = save_scenario(two_rom_toy())
        assert scenario_hash(data) == scenario_hash(data)


class TestCanonicalBytes:
    def test_sorted_keys_and_newline(self):
        data = canonical_bytes({"b": 1, "a": {"d": 2, "c": 3}})
        text = data.decode("utf-8")
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")
