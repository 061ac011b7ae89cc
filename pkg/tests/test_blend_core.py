"""Unit tests for the blending, washing, pricing, and evaluation ops."""

import pytest

from blendforge import (
    Adjustment,
    Allotment,
    AshYieldCurve,
    BlendPlan,
    CurveDomainError,
    CurveKnot,
    DegradationModel,
    EmptyBlendError,
    LogisticsConstraints,
    MarketModel,
    OffSpecError,
    PlanStructureError,
    blend_quality,
    check_spec,
    compute_costs,
    degrade_quality,
    evaluate_plan,
    npv,
    price_blend,
    wash_parcel,
)
from oracles import discounted_sum, exact_weighted_mean, linear_interpolate
from toys import make_product, make_registry, make_rom, make_scenario


class TestBlendQuality:
    def test_single_parcel_identity(self):
        assert blend_quality([(500.0, {"ash": 10.0})]) == {"ash": 10.0}

    def test_symmetric_mix(self):
        assert blend_quality([(500.0, {"ash": 10.0}), (500.0, {"ash": 20.0})]) == {"ash": 15.0}

    def test_weighted_mean_against_exact_oracle(self):
        pairs = [(1000.0, 8.0), (3000.0, 12.0)]
        expected = exact_weighted_mean(pairs)
        assert expected == 11  # frozen from the rational oracle
        got = blend_quality([(t, {"ash": v}) for t, v in pairs])
        assert got["ash"] == pytest.approx(float(expected), abs=1e-12)

    def test_zero_tonnage_rejected(self):
        with pytest.raises(EmptyBlendError):
            blend_quality([(0.0, {"ash": 10.0})])

    def test_mismatched_attribute_sets_rejected(self):
        with pytest.raises(ValueError):
            blend_quality([(1.0, {"ash": 1.0}), (1.0, {"ash": 1.0, "s": 2.0})])


CURVE = AshYieldCurve(
    knots=[CurveKnot(1.40, 8.0, 0.60), CurveKnot(1.60, 12.0, 0.80)], bypass_allowed=True
)


class TestWashParcel:
    def rom(self, curve=CURVE):
        return make_rom("w", {"ash": 14.0}, 10_000.0, curve=curve)

    def test_midpoint_interpolation(self):
        tonnes, quality = wash_parcel(self.rom(), 1000.0, 1.50)
        assert tonnes == pytest.approx(700.0)
        assert quality["ash"] == pytest.approx(10.0)

    def test_interpolation_matches_rational_oracle(self):
        cut = 1.47
        tonnes, quality = wash_parcel(self.rom(), 1000.0, cut)
        assert quality["ash"] == pytest.approx(
            float(linear_interpolate(1.40, 8.0, 1.60, 12.0, cut)), abs=1e-12
        )
        assert tonnes == pytest.approx(
            1000.0 * float(linear_interpolate(1.40, 0.60, 1.60, 0.80, cut)), abs=1e-9
        )

    def test_bypass_is_identity(self):
        tonnes, quality = wash_parcel(self.rom(), 1000.0, "bypass")
        assert tonnes == 1000.0
        assert quality == {"ash": 14.0}

    def test_knot_evaluation(self):
        tonnes, quality = wash_parcel(self.rom(), 1000.0, 1.40)
        assert (tonnes, quality["ash"]) == (600.0, 8.0)

    def test_cut_outside_range_rejected(self):
        with pytest.raises(CurveDomainError):
            wash_parcel(self.rom(), 1000.0, 1.30)

    def test_washing_curveless_rom_rejected(self):
        rom = make_rom("plain", {"ash": 9.0}, 1000.0)
        with pytest.raises(CurveDomainError):
            wash_parcel(rom, 1000.0, 1.50)

    def test_bypass_requires_permission(self):
        curve = AshYieldCurve(knots=CURVE.knots, bypass_allowed=False)
        with pytest.raises(CurveDomainError):
            wash_parcel(self.rom(curve), 1000.0, "bypass")

    def test_non_ash_attributes_pass_through(self):
        rom = make_rom("w", {"ash": 14.0, "sulfur": 0.6}, 10_000.0, curve=CURVE)
        _, quality = wash_parcel(rom, 1000.0, 1.50)
        assert quality["sulfur"] == 0.6
        assert quality["ash"] == pytest.approx(10.0)


class TestDegradeQuality:
    def test_zero_age_identity(self):
        model = DegradationModel(rate_per_day={"ash": 0.5}, cap={"ash": 3.0})
        assert degrade_quality({"ash": 10.0}, 0, model) == {"ash": 10.0}

    def test_zero_rate_identity(self):
        assert degrade_quality({"ash": 10.0}, 100, DegradationModel()) == {"ash": 10.0}

    def test_linear_below_cap(self):
        model = DegradationModel(rate_per_day={"moisture": 0.01}, cap={"moisture": 2.0})
        got = degrade_quality({"moisture": 8.0}, 10, model)
        assert got["moisture"] == pytest.approx(8.1)

    def test_cap_clamps_cumulative_change(self):
        model = DegradationModel(rate_per_day={"moisture": 0.5}, cap={"moisture": 2.0})
        got = degrade_quality({"moisture": 8.0}, 100, model)
        assert got["moisture"] == pytest.approx(10.0)

    def test_negative_rate_capped_and_floored(self):
        registry = make_registry("ash")
        model = DegradationModel(rate_per_day={"ash": -1.0}, cap={"ash": 100.0})
        got = degrade_quality({"ash": 3.0}, 50, model, registry)
        assert got["ash"] == 0.0  # percent unit floor

    def test_percent_ceiling(self):
        registry = make_registry("moisture")
        model = DegradationModel(rate_per_day={"moisture": 5.0})
        got = degrade_quality({"moisture": 99.0}, 10, model, registry)
        assert got["moisture"] == 100.0


class TestCheckSpec:
    def spec(self, lo=6.0, hi=10.0):
        return make_product("p", 100.0, 10, {"ash": (lo, hi)})

    def test_interior_point(self):
        assert check_spec({"ash": 9.0}, 1000.0, self.spec()) == []

    def test_boundary_is_in_spec(self):
        assert check_spec({"ash": 10.0}, 1000.0, self.spec()) == []
        assert check_spec({"ash": 6.0}, 1000.0, self.spec()) == []

    def test_signed_magnitudes(self):
        assert check_spec({"ash": 11.0}, 1000.0, self.spec()) == [("ash", pytest.approx(1.0))]
        assert check_spec({"ash": 5.0}, 1000.0, self.spec()) == [("ash", pytest.approx(-1.0))]


class TestPriceBlend:
    def spec(self):
        return make_product(
            "p",
            100.0,
            10,
            {"ash": (0.0, 20.0), "sulfur": (0.0, 2.0)},
            adjustments={
                "ash": Adjustment(target=9.0, rate_above=-5.0, rate_below=0.0),
                "sulfur": Adjustment(target=0.5, rate_above=-20.0, rate_below=2.0),
            },
        )

    def test_on_target_zero_adjustment(self):
        gross, adjustment = price_blend({"ash": 9.0, "sulfur": 0.5}, 1000.0, self.spec(), 0)
        assert (gross, adjustment) == (100_000.0, 0.0)

    def test_linear_schedule_frozen_value(self):
        # Hand/spreadsheet evaluation: 1000 t * (-5/t per %) * 1% over target.
        gross, adjustment = price_blend({"ash": 10.0, "sulfur": 0.5}, 1000.0, self.spec(), 0)
        assert gross == pytest.approx(100_000.0)
        assert adjustment == pytest.approx(-5_000.0)

    def test_two_attribute_additivity(self):
        only_ash = price_blend({"ash": 10.0, "sulfur": 0.5}, 1000.0, self.spec(), 0)[1]
        only_sulfur = price_blend({"ash": 9.0, "sulfur": 0.4}, 1000.0, self.spec(), 0)[1]
        both = price_blend({"ash": 10.0, "sulfur": 0.4}, 1000.0, self.spec(), 0)[1]
        assert both == pytest.approx(only_ash + only_sulfur)
        assert only_sulfur == pytest.approx(1000.0 * 2.0 * 0.1)  # below-target bonus

    def test_off_spec_is_unsaleable(self):
        with pytest.raises(OffSpecError):
            price_blend({"ash": 25.0, "sulfur": 0.5}, 1000.0, self.spec(), 0)


class TestNpv:
    def test_zero_rate_plain_sum(self):
        assert npv([100.0, 200.0, -50.0], 0.0) == pytest.approx(250.0)

    def test_single_term_discount(self):
        assert npv([0.0, 110.0], 0.10) == pytest.approx(100.0)

    def test_period_zero_identity(self):
        assert npv([100.0], 0.37) == pytest.approx(100.0)

    def test_matches_rational_oracle(self):
        flows = [1234.5, -250.0, 990.0, 10.0]
        assert npv(flows, 0.07) == pytest.approx(discounted_sum(flows, 0.07), rel=1e-12)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            npv([1.0], -0.1)


def _cost_scenario():
    rom = make_rom("w", {"ash": 14.0}, 40_000.0, curve=CURVE, haul=0.01, staging=0.004)
    logistics = LogisticsConstraints(
        wash_fixed_cost_per_period=50_000.0,
        wash_variable_cost_per_tonne=2.0,
        rehandle_cost_per_tonne=3.0,
        rehandle_loss_fraction=0.005,
        haul_cost_per_hour=50.0,
    )
    product = make_product("p", 100.0, 20, {"ash": (0.0, 20.0)})
    return make_scenario([rom], [product], logistics=logistics)


class TestComputeCosts:
    def test_empty_plan_all_zero(self):
        costs, usage = compute_costs(_cost_scenario(), BlendPlan.empty())
        assert costs[0].haul == costs[0].wash == costs[0].rehandle == 0.0
        assert usage[0].haul_hours == usage[0].washed_tonnes == 0.0

    def test_wash_cost_fixed_plus_variable(self):
        scenario = _cost_scenario()
        plan = BlendPlan([Allotment(0, "p", "w", 10)], {("w", 0): 1.50})
        costs, usage = compute_costs(scenario, plan)
        assert usage[0].washed_tonnes == 10_000.0
        assert costs[0].wash == pytest.approx(50_000.0 + 2.0 * 10_000.0)

    def test_bypass_feed_is_not_washed(self):
        scenario = _cost_scenario()
        plan = BlendPlan([Allotment(0, "p", "w", 10)], {("w", 0): "bypass"})
        costs, usage = compute_costs(scenario, plan)
        assert usage[0].washed_tonnes == 0.0
        assert costs[0].wash == 0.0

    def test_rehandle_cost_and_loss(self):
        scenario = _cost_scenario()
        plan = BlendPlan([], {}, [(0, "w", 1000.0)])
        costs, _ = compute_costs(scenario, plan)
        assert costs[0].rehandle == pytest.approx(3_000.0)
        # 0.5% loss: 995 t arrive at staging.
        from blendforge.evaluate import _staging_draw

        split, _ = _staging_draw(
            scenario, BlendPlan([Allotment(0, "p", "w", 1)], {("w", 0): 1.5}, [(0, "w", 1000.0)])
        )
        staged, pit = split[("w", 0)]
        assert staged == pytest.approx(995.0)
        assert pit == pytest.approx(5.0)

    def test_staging_feed_hauls_cheaper(self):
        scenario = _cost_scenario()
        plan = BlendPlan(
            [Allotment(0, "p", "w", 1)], {("w", 0): 1.5}, [(0, "w", 2000.0)]
        )
        _, usage = compute_costs(scenario, plan)
        # All 1000 t of feed come from staging at 0.004 h/t.
        assert usage[0].haul_hours == pytest.approx(4.0)


class TestEvaluatePlan:
    def test_empty_plan_contract_violations(self):
        registry = make_registry("ash")
        rom = make_rom("r", {"ash": 9.0}, 30_000.0, horizon=2)
        product = make_product(
            "p", 100.0, 10, {"ash": (0.0, 20.0)}, horizon=2, contract_lots=5
        )
        scenario = make_scenario([rom], [product], horizon=2, registry=registry)
        report = evaluate_plan(scenario, BlendPlan.empty())
        assert report.total_revenue == 0.0
        assert report.kpis.total_sold_tonnes == 0.0
        codes = [(v.code, v.period) for v in report.violations]
        assert ("contract:p", 0) in codes and ("contract:p", 1) in codes

    def test_single_rom_pipeline_matches_composed_ops(self):
        registry = make_registry("ash", "moisture")
        rom = make_rom(
            "w",
            {"ash": 12.0, "moisture": 8.0},
            10_000.0,
            curve=CURVE,
            haul=0.01,
            degradation=DegradationModel(rate_per_day={"moisture": 0.02}, cap={"moisture": 5.0}),
        )
        product = make_product(
            "p",
            100.0,
            10,
            {"ash": (0.0, 11.0), "moisture": (0.0, 10.0)},
            adjustments={"ash": Adjustment(target=9.0, rate_above=-5.0)},
        )
        logistics = LogisticsConstraints(
            wash_fixed_cost_per_period=5_000.0,
            wash_variable_cost_per_tonne=2.0,
            haul_cost_per_hour=50.0,
        )
        scenario = make_scenario(
            [rom], [product], registry=registry, logistics=logistics,
            market=MarketModel(0.1),
        )
        plan = BlendPlan([Allotment(0, "p", "w", 3)], {("w", 0): 1.50})
        report = evaluate_plan(scenario, plan)

        # Straight-line composition of the published ops.
        age = 15  # period midpoint of a 30-day period, excavation day 0
        degraded = degrade_quality(rom.quality, age, rom.degradation, registry)
        washed_tonnes, washed_quality = wash_parcel(rom, 3000.0, 1.50, degraded)
        blended = blend_quality([(washed_tonnes, washed_quality)])
        assert check_spec(blended, washed_tonnes, product) == []
        gross, adjustment = price_blend(blended, washed_tonnes, product, 0)
        haul_cost = 3000.0 * 0.01 * 50.0
        wash_cost = 5_000.0 + 2.0 * 3000.0
        net = gross + adjustment - haul_cost - wash_cost
        expected_npv = npv([net], 0.1)

        row = report.row("p", 0)
        assert row.tonnes == pytest.approx(2100.0)
        assert row.blended_quality["ash"] == pytest.approx(10.0)
        assert row.blended_quality["moisture"] == pytest.approx(8.3)
        assert row.gross_revenue == pytest.approx(gross)
        assert row.adjustment_revenue == pytest.approx(adjustment)
        assert report.costs[0].haul == pytest.approx(haul_cost)
        assert report.costs[0].wash == pytest.approx(wash_cost)
        assert report.npv == pytest.approx(expected_npv)
        # Frozen hand arithmetic for the same numbers.
        assert row.gross_revenue == pytest.approx(210_000.0)
        assert row.adjustment_revenue == pytest.approx(-10_500.0)
        assert report.npv == pytest.approx(210_000.0 - 10_500.0 - 1_500.0 - 11_000.0)

    def test_blend_cardinality_violation(self):
        registry = make_registry("ash")
        roms = [make_rom(f"r{i}", {"ash": 8.0 + i * 0.5}, 30_000.0) for i in range(6)]
        product = make_product("p", 100.0, 12, {"ash": (0.0, 20.0)})
        logistics = LogisticsConstraints(max_rom_types_per_blend=5)
        scenario = make_scenario(roms, [product], registry=registry, logistics=logistics)
        plan = BlendPlan([Allotment(0, "p", f"r{i}", 2) for i in range(6)])
        report = evaluate_plan(scenario, plan)
        cardinality = [v for v in report.violations if v.code.startswith("blend-cardinality")]
        assert len(cardinality) == 1
        assert cardinality[0].magnitude == 1

    def test_dangling_ids_raise_before_evaluation(self):
        scenario = _cost_scenario()
        with pytest.raises(PlanStructureError):
            evaluate_plan(scenario, BlendPlan([Allotment(0, "p", "ghost", 1)]))
        with pytest.raises(PlanStructureError):
            evaluate_plan(scenario, BlendPlan([Allotment(0, "ghost", "w", 1)], {("w", 0): 1.5}))

    def test_missing_cut_point_is_structural(self):
        scenario = _cost_scenario()
        with pytest.raises(PlanStructureError):
            evaluate_plan(scenario, BlendPlan([Allotment(0, "p", "w", 1)]))

    def test_off_spec_blend_earns_nothing_but_costs_stand(self):
        registry = make_registry("ash")
        rom = make_rom("dirty", {"ash": 18.0}, 30_000.0, haul=0.01)
        product = make_product("p", 100.0, 10, {"ash": (0.0, 10.0)})
        logistics = LogisticsConstraints(haul_cost_per_hour=10.0)
        scenario = make_scenario([rom], [product], registry=registry, logistics=logistics)
        report = evaluate_plan(scenario, BlendPlan([Allotment(0, "p", "dirty", 5)]))
        row = report.row("p", 0)
        assert not row.in_spec and row.gross_revenue == 0.0
        assert report.costs[0].haul > 0
        assert report.npv == pytest.approx(-report.costs[0].haul)
        assert any(v.code == "quality:p:ash" for v in report.violations)

    def test_npv_equals_npv_of_own_cashflows_exactly(self):
        scenario = _cost_scenario()
        plan = BlendPlan([Allotment(0, "p", "w", 4)], {("w", 0): 1.55})
        report = evaluate_plan(scenario, plan)
        assert report.npv == npv(report.net_cashflows, scenario.market.discount_rate_per_period)

    def test_deterministic_reports(self):
        scenario = _cost_scenario()
        plan = BlendPlan([Allotment(0, "p", "w", 4)], {("w", 0): 1.55}, [(0, "w", 1000.0)])
        first = evaluate_plan(scenario, plan)
        second = evaluate_plan(scenario, plan)
        assert first == second
