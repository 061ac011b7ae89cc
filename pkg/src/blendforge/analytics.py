"""Blend analytics: the consequence numbers a planner reasons with.

Everything here is a pure read over an immutable scenario and plan, except
the marginal-value and sensitivity probes, which spawn isolated re-optimizer
runs with the caller's frozen strategy seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import UnknownRomError
from .evaluate import blend_quality, check_spec, compute_costs, evaluate_plan, wash_parcel
from .evaluate import _degraded_quality
from .optimizer import Strategy, marginal_availability_run, optimize
from .plan import BYPASS, BlendPlan
from .types import Scenario


@dataclass(eq=True)
class ContributionRow:
    rom_id: str
    tonnes: float
    share: float
    contributions: dict[str, float]  # attribute -> share * attribute value


@dataclass(eq=True)
class SlackRow:
    code: str
    period: int
    slack: float  # negative exactly when the matching violation fires


@dataclass(eq=True)
class Deadline:
    kind: str  # "always" | "never" | "period"
    period: int | None = None


@dataclass(eq=True)
class AnalyticsReport:
    contributions: dict[tuple[str, int], list[ContributionRow]] = field(default_factory=dict)
    slacks: list[SlackRow] = field(default_factory=list)
    marginals: dict[str, float] = field(default_factory=dict)
    deadlines: dict[str, dict[str, Deadline]] = field(default_factory=dict)


def _washed_parcels(
    scenario: Scenario, plan: BlendPlan, product_id: str, period: int
) -> list[tuple[str, float, dict[str, float]]]:
    lot = scenario.logistics.lot_size_tonnes
    parcels = []
    for a in plan.allotments:
        if a.product_id != product_id or a.period != period:
            continue
        rom = scenario.rom(a.rom_id)
        quality = _degraded_quality(scenario, rom, period)
        feed = a.lots * lot
        if rom.wash_curve is None:
            tonnes, out_q = feed, dict(quality)
        else:
            cut = plan.cut_points[(a.rom_id, period)]
            tonnes, out_q = wash_parcel(rom, feed, cut, quality)
        parcels.append((a.rom_id, tonnes, out_q))
    return parcels


def quality_contribution(
    scenario: Scenario, plan: BlendPlan, product_id: str, period: int
) -> list[ContributionRow]:
    """Per-ROM tonnage shares and attribute contributions for one blend.

    Shares are washed tonnes over blend tonnes and sum to 1; share-weighted
    attribute values sum back to the blended attribute. An empty blend gives
    an empty breakdown.
    """
    parcels = _washed_parcels(scenario, plan, product_id, period)
    total = sum(t for _, t, _ in parcels)
    if total <= 0:
        return []
    rows = []
    for rom_id, tonnes, quality in sorted(parcels):
        share = tonnes / total
        rows.append(
            ContributionRow(
                rom_id=rom_id,
                tonnes=tonnes,
                share=share,
                contributions={code: share * value for code, value in sorted(quality.items())},
            )
        )
    return rows


def constraint_slack(scenario: Scenario, plan: BlendPlan) -> list[SlackRow]:
    """Signed slack per capacity constraint: limit minus usage for haul
    hours, wash tonnes, and availability; sold minus contract for contracts.
    Negative slack corresponds one-to-one with an evaluation violation."""
    log = scenario.logistics
    costs_, usage = compute_costs(scenario, plan)
    report = evaluate_plan(scenario, plan)
    rows: list[SlackRow] = []
    for period in range(scenario.horizon_periods):
        if log.haul_fleet_hours is not None:
            rows.append(
                SlackRow("haul-hours", period, log.haul_fleet_hours[period] - usage[period].haul_hours)
            )
        if log.wash_capacity_tonnes is not None:
            rows.append(
                SlackRow(
                    "wash-capacity",
                    period,
                    log.wash_capacity_tonnes[period] - usage[period].washed_tonnes,
                )
            )
    for rom in scenario.roms:
        balance = 0.0
        for period in range(scenario.horizon_periods):
            balance += rom.available_tonnes[period]
            balance -= usage[period].pit_tonnes_by_rom.get(rom.id, 0.0)
            rows.append(SlackRow(f"availability:{rom.id}", period, balance))
    sold: dict[tuple[str, int], float] = {}
    for row in report.per_product_period:
        if row.in_spec:
            sold[(row.product_id, row.period)] = row.tonnes
    for product in scenario.products:
        for period in range(scenario.horizon_periods):
            rows.append(
                SlackRow(
                    f"contract:{product.id}",
                    period,
                    sold.get((product.id, period), 0.0) - product.contract_min_tonnes[period],
                )
            )
    return rows


def marginal_rom_value(
    scenario: Scenario,
    plan: BlendPlan,
    rom_id: str,
    delta_tonnes: float,
    strategy: Strategy,
) -> float:
    """Money per tonne of one more tonne of a ROM: re-optimize with the
    availability bump (same frozen seed) and difference against the
    incumbent's objective."""
    if delta_tonnes <= 0:
        raise ValueError("delta_tonnes must be positive")
    if not scenario.has_rom(rom_id):
        raise UnknownRomError(f"unknown rom {rom_id!r}")
    incumbent = evaluate_plan(scenario, plan).objective(strategy.objective_kind())
    bumped = marginal_availability_run(scenario, strategy, rom_id, delta_tonnes)
    return (bumped.objective_value - incumbent) / delta_tonnes


def price_sensitivity(
    scenario: Scenario,
    plan: BlendPlan,
    product_id: str,
    price_delta: float,
    strategy: Strategy,
) -> tuple[float, bool]:
    """(re-evaluated incumbent objective under the shifted price, whether the
    same-seed re-optimized argmax plan differs from the incumbent)."""
    if not scenario.has_product(product_id):
        raise ValueError(f"unknown product {product_id!r}")
    product = scenario.product(product_id)
    if any(p + price_delta < 0 for p in product.base_price_per_tonne):
        raise ValueError("price delta would drive the base price negative")
    shifted = shifted_price_scenario(scenario, product_id, price_delta)
    new_objective = evaluate_plan(shifted, plan).objective(strategy.objective_kind())
    reopt = optimize(shifted, strategy)
    return new_objective, reopt.plan != plan


def degradation_deadline(
    scenario: Scenario, plan: BlendPlan, rom_id: str
) -> dict[str, Deadline]:
    """Last period each product using this ROM stays in spec at the
    incumbent's blend proportions as everything ages; "always" and "never"
    are returned explicitly."""
    if not scenario.has_rom(rom_id):
        raise UnknownRomError(f"unknown rom {rom_id!r}")
    deadlines: dict[str, Deadline] = {}
    for product in scenario.products:
        first_period = None
        for a in plan.allotments:
            if a.product_id == product.id and a.rom_id == rom_id:
                first_period = a.period if first_period is None else min(first_period, a.period)
        if first_period is None:
            continue
        mix = [
            (a.rom_id, a.lots)
            for a in plan.allotments
            if a.product_id == product.id and a.period == first_period
        ]
        cuts = {
            rid: plan.cut_points.get((rid, first_period))
            for rid, _ in mix
            if scenario.rom(rid).wash_curve is not None
        }
        lot = scenario.logistics.lot_size_tonnes
        last_safe = None
        for period in range(scenario.horizon_periods):
            parcels = []
            for rid, lots in mix:
                rom = scenario.rom(rid)
                quality = _degraded_quality(scenario, rom, period)
                feed = lots * lot
                if rom.wash_curve is None:
                    parcels.append((feed, dict(quality)))
                else:
                    cut = cuts[rid] if cuts[rid] is not None else BYPASS
                    parcels.append(wash_parcel(rom, feed, cut, quality))
            blended = blend_quality(parcels)
            if check_spec(blended, sum(t for t, _ in parcels), product):
                break
            last_safe = period
        if last_safe is None:
            deadlines[product.id] = Deadline("never")
        elif last_safe == scenario.horizon_periods - 1:
            deadlines[product.id] = Deadline("always")
        else:
            deadlines[product.id] = Deadline("period", last_safe)
    return deadlines


def build_report(
    scenario: Scenario,
    plan: BlendPlan,
    strategy: Strategy | None = None,
    marginal_delta_tonnes: float | None = None,
) -> AnalyticsReport:
    """Assemble the full analytics view of a plan.

    Marginal ROM values re-optimize once per ROM and are only computed when a
    strategy (with its frozen seed) is supplied.
    """
    report = AnalyticsReport()
    seen = sorted({(a.product_id, a.period) for a in plan.allotments})
    for product_id, period in seen:
        report.contributions[(product_id, period)] = quality_contribution(
            scenario, plan, product_id, period
        )
    report.slacks = constraint_slack(scenario, plan)
    for rom_id in sorted({a.rom_id for a in plan.allotments}):
        deadlines = degradation_deadline(scenario, plan, rom_id)
        if deadlines:
            report.deadlines[rom_id] = deadlines
    if strategy is not None:
        delta = marginal_delta_tonnes or scenario.logistics.lot_size_tonnes
        for rom in scenario.roms:
            report.marginals[rom.id] = marginal_rom_value(
                scenario, plan, rom.id, delta, strategy
            )
    return report


def analytics_to_doc(report: AnalyticsReport) -> dict:
    return {
        "contributions": [
            {
                "product_id": product_id,
                "period": period,
                "rows": [
                    {
                        "rom_id": r.rom_id,
                        "tonnes": r.tonnes,
                        "share": r.share,
                        "contributions": r.contributions,
                    }
                    for r in rows
                ],
            }
            for (product_id, period), rows in sorted(report.contributions.items())
        ],
        "slacks": [
            {"code": s.code, "period": s.period, "slack": s.slack} for s in report.slacks
        ],
        "marginals": dict(sorted(report.marginals.items())),
        "deadlines": {
            rom_id: {
                product_id: {"kind": d.kind, "period": d.period}
                for product_id, d in sorted(products.items())
            }
            for rom_id, products in sorted(report.deadlines.items())
        },
    }


def shifted_price_scenario(
    scenario: Scenario, product_id: str, price_delta: float
) -> Scenario:
    """The scenario with one product's base price moved by a flat delta."""
    products = []
    for product in scenario.products:
        if product.id == product_id:
            prices = [p + price_delta for p in product.base_price_per_tonne]
            product = replace(product, base_price_per_tonne=prices)
        products.append(product)
    return Scenario(
        horizon_periods=scenario.horizon_periods,
        days_per_period=scenario.days_per_period,
        registry=scenario.registry,
        roms=scenario.roms,
        products=products,
        logistics=scenario.logistics,
        market=scenario.market,
    )
