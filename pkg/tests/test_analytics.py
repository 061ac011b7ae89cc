"""Analytics: contributions, slack, marginal values, sensitivity, deadlines."""

import random

import pytest

from blendforge import (
    Allotment,
    BlendPlan,
    Strategy,
    UnknownRomError,
    build_report,
    constraint_slack,
    degradation_deadline,
    evaluate_plan,
    marginal_rom_value,
    optimize,
    price_sensitivity,
    quality_contribution,
)
from toys import (
    degradation_toy,
    make_product,
    make_rom,
    make_scenario,
    nfl_scenario,
    oracle_scenarios,
    random_valid_plan,
)

STRATEGY = Strategy("anneal", {"seed": 23, "budget_evaluations": 2500, "restarts": 2})


class TestQualityContribution:
    def test_single_rom_full_share(self, toy_scenario):
        plan = BlendPlan([Allotment(0, "blend-a", "sweet", 4)])
        rows = quality_contribution(toy_scenario, plan, "blend-a", 0)
        assert len(rows) == 1
        assert rows[0].share == pytest.approx(1.0)

    def test_even_split_even_shares(self, toy_scenario):
        plan = BlendPlan(
            [Allotment(0, "blend-a", "sweet", 5), Allotment(0, "blend-a", "dirty", 5)]
        )
        rows = quality_contribution(toy_scenario, plan, "blend-a", 0)
        assert [r.share for r in rows] == [pytest.approx(0.5), pytest.approx(0.5)]

    def test_contributions_reconstruct_blend(self, toy_scenario):
        plan = BlendPlan(
            [Allotment(0, "blend-a", "sweet", 7), Allotment(0, "blend-a", "dirty", 3)]
        )
        rows = quality_contribution(toy_scenario, plan, "blend-a", 0)
        report = evaluate_plan(toy_scenario, plan)
        blended = report.row("blend-a", 0).blended_quality
        assert sum(r.share for r in rows) == pytest.approx(1.0, abs=1e-9)
        for code, value in blended.items():
            total = sum(r.contributions[code] for r in rows)
            assert total == pytest.approx(value, rel=1e-9)

    def test_empty_blend_empty_breakdown(self, toy_scenario):
        assert quality_contribution(toy_scenario, BlendPlan.empty(), "blend-a", 0) == []


class TestConstraintSlack:
    def test_empty_plan_shows_full_limits_and_contract_deficit(self):
        rom = make_rom("r", {"ash": 9.0}, 10_000.0, haul=0.01)
        product = make_product("p", 100.0, 10, {"ash": (0.0, 20.0)}, contract_lots=4)
        from blendforge import LogisticsConstraints

        scenario = make_scenario(
            [rom],
            [product],
            logistics=LogisticsConstraints(haul_fleet_hours=[500.0]),
        )
        rows = {(s.code, s.period): s.slack for s in constraint_slack(scenario, BlendPlan.empty())}
        assert rows[("haul-hours", 0)] == pytest.approx(500.0)
        assert rows[("availability:r", 0)] == pytest.approx(10_000.0)
        assert rows[("contract:p", 0)] == pytest.approx(-4_000.0)

    def test_exact_capacity_zero_slack(self):
        from blendforge import AshYieldCurve, CurveKnot, LogisticsConstraints

        curve = AshYieldCurve([CurveKnot(1.4, 8.0, 0.6), CurveKnot(1.6, 10.0, 0.8)])
        rom = make_rom("w", {"ash": 12.0}, 20_000.0, curve=curve)
        product = make_product("p", 100.0, 10, {"ash": (0.0, 20.0)})
        scenario = make_scenario(
            [rom], [product], logistics=LogisticsConstraints(wash_capacity_tonnes=[5_000.0])
        )
        plan = BlendPlan([Allotment(0, "p", "w", 5)], {("w", 0): 1.5})
        rows = {(s.code, s.period): s.slack for s in constraint_slack(scenario, plan)}
        assert rows[("wash-capacity", 0)] == pytest.approx(0.0)

    def test_sign_agrees_with_violations_on_1000_random_plans(self):
        rng = random.Random(909)
        cases = oracle_scenarios()
        for index in range(1000):
            name, scenario, _ = cases[index % len(cases)]
            plan = random_valid_plan(scenario, rng)
            report = evaluate_plan(scenario, plan)
            codes = {(v.code, v.period) for v in report.violations}
            for row in constraint_slack(scenario, plan):
                violated = (row.code, row.period) in codes
                if row.slack < -1e-6:
                    assert violated, (name, row)
                elif row.slack > 1e-6:
                    assert not violated, (name, row)


class TestMarginalRomValue:
    def test_abundant_unused_rom_is_worthless(self):
        scenario = nfl_scenario(reward_premium=True)
        incumbent = optimize(scenario, STRATEGY)
        value = marginal_rom_value(scenario, incumbent.plan, "dirty", 1_000.0, STRATEGY)
        assert value == pytest.approx(0.0, abs=1e-9)

    def test_scarce_sweetener_is_valuable(self):
        scenario = nfl_scenario(reward_premium=True)
        incumbent = optimize(scenario, STRATEGY)
        value = marginal_rom_value(scenario, incumbent.plan, "sweet", 1_000.0, STRATEGY)
        # One more sweet lot moves a premium lot off the penalty: 8 $/t.
        assert value > 0.0

    def test_diminishing_returns_at_larger_delta(self):
        scenario = nfl_scenario(reward_premium=True)
        incumbent = optimize(scenario, STRATEGY)
        small = marginal_rom_value(scenario, incumbent.plan, "sweet", 1_000.0, STRATEGY)
        large = marginal_rom_value(scenario, incumbent.plan, "sweet", 8_000.0, STRATEGY)
        assert large <= small + 1e-9

    def test_unknown_rom_rejected(self, toy_scenario):
        with pytest.raises(UnknownRomError):
            marginal_rom_value(toy_scenario, BlendPlan.empty(), "ghost", 1.0, STRATEGY)


class TestPriceSensitivity:
    def test_zero_delta_identity(self, toy_scenario):
        incumbent = optimize(toy_scenario, STRATEGY)
        objective, changed = price_sensitivity(
            toy_scenario, incumbent.plan, "blend-a", 0.0, STRATEGY
        )
        assert objective == pytest.approx(incumbent.objective_value)
        assert changed is False

    def test_reevaluation_is_affine_with_sold_tonnes_slope(self, toy_scenario):
        incumbent = optimize(toy_scenario, STRATEGY)
        sold = incumbent.report.kpis.total_sold_tonnes
        base = incumbent.objective_value
        for delta in (5.0, -3.0, 12.5):
            objective, _ = price_sensitivity(
                toy_scenario, incumbent.plan, "blend-a", delta, STRATEGY
            )
            assert objective == pytest.approx(base + sold * delta, rel=1e-9)

    def test_large_delta_flips_plan(self):
        scenario = nfl_scenario(reward_premium=True)
        incumbent = optimize(scenario, STRATEGY)
        # Hoisting the basic product's price far above premium rearranges
        # the sweetener.
        _, changed = price_sensitivity(scenario, incumbent.plan, "basic", 400.0, STRATEGY)
        assert changed is True


class TestDegradationDeadline:
    def test_zero_rates_always_safe(self, toy_scenario):
        plan = BlendPlan(
            [Allotment(0, "blend-a", "sweet", 5), Allotment(0, "blend-a", "dirty", 5)]
        )
        deadlines = degradation_deadline(toy_scenario, plan, "sweet")
        assert deadlines["blend-a"].kind == "always"

    def test_moisture_drift_cuts_off_in_period_one(self):
        scenario = degradation_toy()
        plan = BlendPlan(
            [Allotment(0, "steam", "wet", 2), Allotment(0, "steam", "dry", 2)]
        )
        deadlines = degradation_deadline(scenario, plan, "wet")
        # In spec at period 0 (ages 15 days), off spec from period 1 onward.
        assert deadlines["steam"].kind == "period"
        assert deadlines["steam"].period == 0

    def test_faster_rates_never_extend_deadlines(self):
        from dataclasses import replace

        from blendforge import DegradationModel

        scenario = degradation_toy()
        plan = BlendPlan([Allotment(0, "steam", "wet", 2), Allotment(0, "steam", "dry", 2)])
        base = degradation_deadline(scenario, plan, "wet")["steam"]
        slower_roms = []
        for rom in scenario.roms:
            if rom.id == "wet":
                rom = replace(
                    rom,
                    degradation=DegradationModel(
                        rate_per_day={"moisture": 0.01}, cap={"moisture": 10.0}
                    ),
                )
            slower_roms.append(rom)
        slower = make_scenario(
            slower_roms,
            scenario.products,
            horizon=scenario.horizon_periods,
            registry=scenario.registry,
        )
        relaxed = degradation_deadline(slower, plan, "wet")["steam"]
        order = {"never": -1, "period": 0, "always": 10**6}
        base_rank = order[base.kind] + (base.period or 0)
        relaxed_rank = order[relaxed.kind] + (relaxed.period or 0)
        assert relaxed_rank >= base_rank


class TestBuildReport:
    def test_full_report_assembles(self, toy_scenario):
        incumbent = optimize(toy_scenario, STRATEGY)
        report = build_report(toy_scenario, incumbent.plan, strategy=STRATEGY)
        assert ("blend-a", 0) in report.contributions
        assert report.slacks
        assert set(report.marginals) == {"dirty", "sweet"}

    def test_marginals_skipped_without_strategy(self, toy_scenario):
        incumbent = optimize(toy_scenario, STRATEGY)
        report = build_report(toy_scenario, incumbent.plan)
        assert report.marginals == {}
