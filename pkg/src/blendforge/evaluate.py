"""Deterministic plan evaluation: blending math, washing, degradation,
pricing, costs, NPV, and KPIs.

Every function here is pure; `evaluate_plan` composes them into the
per-period pipeline degrade -> wash -> blend -> spec-check -> price ->
costs -> cashflows. Infeasible plans evaluate normally and come back with
violations listed; nothing is silently repaired.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import CurveDomainError, EmptyBlendError, OffSpecError
from .plan import BYPASS, BlendPlan
from .types import (
    DegradationModel,
    ProductSpec,
    QualityVector,
    RomParcel,
    Scenario,
)


def blend_quality(parcels: list[tuple[float, QualityVector]]) -> QualityVector:
    """Mass-weighted mean quality of the given (tonnes, quality) parcels.

    Attributes are the union of the inputs'; every parcel is assumed to share
    the same registry. Raises EmptyBlendError when total tonnage is zero.
    """
    total = 0.0
    for tonnes, _ in parcels:
        total += tonnes
    if total <= 0.0:
        raise EmptyBlendError("cannot blend zero total tonnage")
    codes = sorted({code for _, q in parcels for code in q})
    for _, q in parcels:
        if len(q) != len(codes):
            raise ValueError("parcels must share one attribute set to blend")
    blended: QualityVector = {}
    for code in codes:
        acc = 0.0
        for tonnes, q in parcels:
            acc += tonnes * q[code]
        blended[code] = acc / total
    return blended


def wash_parcel(
    rom: RomParcel,
    feed_tonnes: float,
    cut_point: float | str,
    quality: QualityVector | None = None,
) -> tuple[float, QualityVector]:
    """Pass feed through the wash plant at the given cut-point density.

    Product ash and yield are linearly interpolated between the bracketing
    curve knots; the output quality is the input quality with ash replaced.
    BYPASS skips the plant entirely (yield 1, quality unchanged). `quality`
    overrides the ROM's as-excavated quality (used for degraded feed).
    """
    q = dict(rom.quality if quality is None else quality)
    curve = rom.wash_curve
    if cut_point == BYPASS:
        if curve is not None and not curve.bypass_allowed:
            raise CurveDomainError(f"rom {rom.id!r} does not allow bypass")
        return feed_tonnes, q
    if curve is None:
        raise CurveDomainError(f"rom {rom.id!r} has no ash-yield curve to wash with")
    ash, yield_fraction = interpolate_curve(curve, cut_point)
    q["ash"] = ash
    return feed_tonnes * yield_fraction, q


def interpolate_curve(curve, cut_point: float) -> tuple[float, float]:
    """(product ash, yield) at a cut-point density, linear between knots."""
    knots = curve.knots
    if not knots[0].cut_point_density <= cut_point <= knots[-1].cut_point_density:
        raise CurveDomainError(
            f"cut-point {cut_point} outside curve range "
            f"[{knots[0].cut_point_density}, {knots[-1].cut_point_density}]"
        )
    densities = [k.cut_point_density for k in knots]
    i = bisect_left(densities, cut_point)
    if densities[i] == cut_point:
        return knots[i].product_ash_percent, knots[i].yield_fraction
    lo, hi = knots[i - 1], knots[i]
    frac = (cut_point - lo.cut_point_density) / (hi.cut_point_density - lo.cut_point_density)
    ash = lo.product_ash_percent + frac * (hi.product_ash_percent - lo.product_ash_percent)
    yf = lo.yield_fraction + frac * (hi.yield_fraction - lo.yield_fraction)
    return ash, yf


def degrade_quality(
    q: QualityVector, age_days: int, model: DegradationModel, registry=None
) -> QualityVector:
    """Stockpile drift: value + clamp(rate * age, +-cap), then unit bounds."""
    if age_days < 0:
        raise ValueError("age must be >= 0 days")
    out = dict(q)
    for code, rate in model.rate_per_day.items():
        if code not in out:
            continue
        change = rate * age_days
        cap = model.cap.get(code)
        if cap is not None:
            change = min(cap, max(-cap, change))
        value = out[code] + change
        if registry is not None and code in registry:
            value = registry.get(code).clamp(value)
        out[code] = value
    return out


def check_spec(
    q: QualityVector, tonnes: float, spec: ProductSpec
) -> list[tuple[str, float]]:
    """Quality-range violations as (attribute, signed magnitude) pairs.

    Magnitude is positive above max, negative below min; an empty list means
    the blend is in spec. Ranges are closed intervals.
    """
    violations: list[tuple[str, float]] = []
    for code in sorted(spec.quality_range):
        rng = spec.quality_range[code]
        value = q.get(code)
        if value is None:
            continue
        if value > rng.max:
            violations.append((code, value - rng.max))
        elif value < rng.min:
            violations.append((code, value - rng.min))
    return violations


def price_blend(
    q: QualityVector, tonnes: float, spec: ProductSpec, period: int
) -> tuple[float, float]:
    """(gross, adjustment) revenue for an in-spec blend in one period.

    Gross is base price times tonnes. Each scheduled attribute contributes
    tonnes * rate(side) * |value - target|, with rate_above applying above
    target and rate_below below; exactly-on-target attributes contribute 0.
    Off-spec blends are unsaleable and raise OffSpecError.
    """
    failures = check_spec(q, tonnes, spec)
    if failures:
        raise OffSpecError(
            f"blend is out of spec for {spec.id!r}: "
            + ", ".join(f"{code} by {mag:+g}" for code, mag in failures)
        )
    gross = spec.base_price_per_tonne[period] * tonnes
    adjustment = 0.0
    for code in sorted(spec.adjustments):
        adj = spec.adjustments[code]
        value = q.get(code)
        if value is None:
            continue
        deviation = value - adj.target
        if deviation > 0:
            adjustment += tonnes * adj.rate_above * deviation
        elif deviation < 0:
            adjustment += tonnes * adj.rate_below * (-deviation)
    return gross, adjustment


def npv(net_cashflow_per_period: list[float], discount_rate_per_period: float) -> float:
    """Discounted sum of per-period cashflows; period 0 is undiscounted."""
    if discount_rate_per_period < 0:
        raise ValueError("discount rate must be >= 0")
    base = 1.0 + discount_rate_per_period
    total = 0.0
    for t, cashflow in enumerate(net_cashflow_per_period):
        total += cashflow / base**t
    return total


@dataclass(eq=True)
class PeriodCosts:
    haul: float = 0.0
    wash: float = 0.0
    rehandle: float = 0.0

    def total(self) -> float:
        return self.haul + self.wash + self.rehandle


@dataclass(eq=True)
class PeriodUsage:
    haul_hours: float = 0.0
    washed_tonnes: float = 0.0
    pit_tonnes_by_rom: dict[str, float] = field(default_factory=dict)
    staging_fed_by_rom: dict[str, float] = field(default_factory=dict)


@dataclass(eq=True)
class Violation:
    code: str
    period: int
    magnitude: float


@dataclass(eq=True)
class ProductPeriodRow:
    product_id: str
    period: int
    tonnes: float
    blended_quality: QualityVector
    in_spec: bool
    gross_revenue: float
    adjustment_revenue: float


@dataclass(eq=True)
class Kpis:
    total_sold_tonnes: float
    avg_revenue_per_tonne: float
    wash_utilization: list[float]


@dataclass(eq=True)
class EvaluationReport:
    per_product_period: list[ProductPeriodRow]
    costs: list[PeriodCosts]
    violations: list[Violation]
    net_cashflows: list[float]
    total_revenue: float
    npv: float
    kpis: Kpis

    def row(self, product_id: str, period: int) -> ProductPeriodRow | None:
        for r in self.per_product_period:
            if r.product_id == product_id and r.period == period:
                return r
        return None

    def objective(self, kind: str = "npv") -> float:
        return self.npv if kind == "npv" else self.total_revenue

    def violation_codes(self) -> set[str]:
        return {v.code for v in self.violations}


def _staging_draw(scenario: Scenario, plan: BlendPlan):
    """Per (rom, period): split feed tonnes into staging-fed and pit-fed.

    Rehandled material arrives at staging the same period it moves, shrunk by
    the loss fraction, and is drawn before pit material from then on.
    """
    lot = scenario.logistics.lot_size_tonnes
    loss = scenario.logistics.rehandle_loss_fraction
    feed: dict[tuple[str, int], float] = {}
    for a in plan.allotments:
        key = (a.rom_id, a.period)
        feed[key] = feed.get(key, 0.0) + a.lots * lot
    moved: dict[tuple[str, int], float] = {}
    for r in plan.rehandles:
        key = (r.rom_id, r.period)
        moved[key] = moved.get(key, 0.0) + r.tonnes
    split: dict[tuple[str, int], tuple[float, float]] = {}
    for rom in scenario.roms:
        stock = 0.0
        for period in range(scenario.horizon_periods):
            stock += moved.get((rom.id, period), 0.0) * (1.0 - loss)
            wanted = feed.get((rom.id, period), 0.0)
            from_staging = min(stock, wanted)
            stock -= from_staging
            split[(rom.id, period)] = (from_staging, wanted - from_staging)
    return split, moved


def compute_costs(
    scenario: Scenario, plan: BlendPlan
) -> tuple[list[PeriodCosts], list[PeriodUsage]]:
    """Per-period haul/wash/rehandle costs and resource usage for a plan.

    Haul hours charge the staging rate for staging-fed tonnes and the full
    rate for pit-fed tonnes; the rehandle move itself costs money and loses
    material but uses no fleet hours. The fixed wash cost is charged only in
    periods the plant actually runs.
    """
    log = scenario.logistics
    lot = log.lot_size_tonnes
    horizon = scenario.horizon_periods
    split, moved = _staging_draw(scenario, plan)

    washed: dict[int, float] = {p: 0.0 for p in range(horizon)}
    for a in plan.allotments:
        rom = scenario.rom(a.rom_id)
        if rom.wash_curve is None:
            continue
        if plan.cut_points.get((a.rom_id, a.period), BYPASS) != BYPASS:
            washed[a.period] += a.lots * lot

    costs = [PeriodCosts() for _ in range(horizon)]
    usage = [PeriodUsage() for _ in range(horizon)]
    for rom in scenario.roms:
        for period in range(horizon):
            staged, pit = split[(rom.id, period)]
            hours = staged * rom.staging_haul_hours_per_tonne + pit * rom.haul_hours_per_tonne
            if hours:
                usage[period].haul_hours += hours
            if pit:
                usage[period].pit_tonnes_by_rom[rom.id] = pit
            if staged:
                usage[period].staging_fed_by_rom[rom.id] = staged
            moved_t = moved.get((rom.id, period), 0.0)
            if moved_t:
                pit_use = usage[period].pit_tonnes_by_rom.get(rom.id, 0.0)
                usage[period].pit_tonnes_by_rom[rom.id] = pit_use + moved_t
                costs[period].rehandle += moved_t * log.rehandle_cost_per_tonne
    for period in range(horizon):
        usage[period].washed_tonnes = washed[period]
        if washed[period] > 0.0:
            costs[period].wash = (
                log.wash_fixed_cost_per_period
                + log.wash_variable_cost_per_tonne * washed[period]
            )
        costs[period].haul = usage[period].haul_hours * log.haul_cost_per_hour
    return costs, usage


def _degraded_quality(scenario: Scenario, rom: RomParcel, period: int) -> QualityVector:
    cache = getattr(scenario, "_degraded_cache", None)
    if cache is None:
        cache = {}
        scenario._degraded_cache = cache
    key = (rom.id, period)
    got = cache.get(key)
    if got is None:
        age = max(0, scenario.period_midpoint_day(period) - rom.excavation_day)
        got = degrade_quality(rom.quality, age, rom.degradation, scenario.registry)
        cache[key] = got
    return got


def evaluate_plan(scenario: Scenario, plan: BlendPlan) -> EvaluationReport:
    """Full deterministic evaluation of a plan against a scenario.

    Pipeline per period: degrade each ROM to its period-midpoint age, wash at
    the plan's (ROM, period) cut-point, mass-blend per product, check the
    product's quality ranges, price in-spec blends (off-spec sells nothing and
    adds violations), then costs, net cashflows, NPV, and KPIs. Identical
    inputs produce bit-identical reports.
    """
    plan.validate_structure(scenario)
    log = scenario.logistics
    lot = log.lot_size_tonnes
    horizon = scenario.horizon_periods

    costs, usage = compute_costs(scenario, plan)
    violations: list[Violation] = []

    # Availability: cumulative pit usage (feed + rehandle moves) may never
    # outrun cumulative tonnes excavated to date.
    for rom in scenario.roms:
        balance = 0.0
        for period in range(horizon):
            balance += rom.available_tonnes[period]
            balance -= usage[period].pit_tonnes_by_rom.get(rom.id, 0.0)
            if balance < -1e-9:
                violations.append(Violation(f"availability:{rom.id}", period, -balance))

    for period in range(horizon):
        if log.haul_fleet_hours is not None:
            excess = usage[period].haul_hours - log.haul_fleet_hours[period]
            if excess > 1e-9:
                violations.append(Violation("haul-hours", period, excess))
        if log.wash_capacity_tonnes is not None:
            excess = usage[period].washed_tonnes - log.wash_capacity_tonnes[period]
            if excess > 1e-9:
                violations.append(Violation("wash-capacity", period, excess))

    # Per (product, period): wash each contributing ROM, then blend.
    blends: dict[tuple[str, int], list[tuple[float, QualityVector]]] = {}
    lots_in_blend: dict[tuple[str, int], dict[str, int]] = {}
    for a in plan.allotments:
        rom = scenario.rom(a.rom_id)
        quality = _degraded_quality(scenario, rom, a.period)
        feed = a.lots * lot
        if rom.wash_curve is None:
            tonnes, out_q = feed, quality
        else:
            cut = plan.cut_points[(a.rom_id, a.period)]
            tonnes, out_q = wash_parcel(rom, feed, cut, quality)
        key = (a.product_id, a.period)
        blends.setdefault(key, []).append((tonnes, out_q))
        lots_in_blend.setdefault(key, {})[a.rom_id] = (
            lots_in_blend.get(key, {}).get(a.rom_id, 0) + a.lots
        )

    max_roms = scenario.max_blend_roms()
    rows: list[ProductPeriodRow] = []
    revenue_by_period = [0.0] * horizon
    total_revenue = 0.0
    sold_tonnes = 0.0
    sold_by_product_period: dict[tuple[str, int], float] = {}

    for product in scenario.products:
        for period in range(horizon):
            key = (product.id, period)
            parcels = blends.get(key)
            if not parcels:
                continue
            by_rom = lots_in_blend[key]
            if len(by_rom) > max_roms:
                violations.append(
                    Violation(f"blend-cardinality:{product.id}", period, len(by_rom) - max_roms)
                )
            for rom_id in sorted(by_rom):
                lots_used = by_rom[rom_id]
                if 0 < lots_used < log.min_lots_per_used_rom:
                    violations.append(
                        Violation(
                            f"min-lots:{product.id}:{rom_id}",
                            period,
                            log.min_lots_per_used_rom - lots_used,
                        )
                    )
            tonnes = sum(t for t, _ in parcels)
            quality = blend_quality(parcels)
            failures = check_spec(quality, tonnes, product)
            if failures:
                for code, magnitude in failures:
                    violations.append(
                        Violation(f"quality:{product.id}:{code}", period, magnitude)
                    )
                rows.append(
                    ProductPeriodRow(product.id, period, tonnes, quality, False, 0.0, 0.0)
                )
            else:
                gross, adjustment = price_blend(quality, tonnes, product, period)
                revenue_by_period[period] += gross + adjustment
                total_revenue += gross + adjustment
                sold_tonnes += tonnes
                sold_by_product_period[key] = tonnes
                rows.append(
                    ProductPeriodRow(
                        product.id, period, tonnes, quality, True, gross, adjustment
                    )
                )

    for product in scenario.products:
        for period in range(horizon):
            shortfall = product.contract_min_tonnes[period] - sold_by_product_period.get(
                (product.id, period), 0.0
            )
            if shortfall > 1e-9:
                violations.append(Violation(f"contract:{product.id}", period, shortfall))

    net_cashflows = [
        revenue_by_period[p] - costs[p].total() for p in range(horizon)
    ]
    utilization = []
    for period in range(horizon):
        cap = None if log.wash_capacity_tonnes is None else log.wash_capacity_tonnes[period]
        if cap:
            utilization.append(usage[period].washed_tonnes / cap)
        else:
            utilization.append(0.0)
    kpis = Kpis(
        total_sold_tonnes=sold_tonnes,
        avg_revenue_per_tonne=(total_revenue / sold_tonnes) if sold_tonnes else 0.0,
        wash_utilization=utilization,
    )
    violations.sort(key=lambda v: (v.period, v.code))
    return EvaluationReport(
        per_product_period=rows,
        costs=costs,
        violations=violations,
        net_cashflows=net_cashflows,
        total_revenue=total_revenue,
        npv=npv(net_cashflows, scenario.market.discount_rate_per_period),
        kpis=kpis,
    )
