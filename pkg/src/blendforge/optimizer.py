"""Plan construction, repair, neighborhood moves, and strategy search.

Strategies are pluggable because no single heuristic wins everywhere: the
three classic constructors (most-profitable-product-first, best average
value per tonne, maximum productive tonnes) rank differently on different
scenarios, and the stochastic searchers (hill climb, simulated annealing)
trade evaluation budget for solution quality. All strategies optimize the
same objective: NPV of net cashflows by default, switchable to total
revenue.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, NamedTuple

from .constraints import ConstraintSet
from .errors import UnknownRomError
from .evaluate import (
    EvaluationReport,
    _degraded_quality,
    evaluate_plan,
    interpolate_curve,
)
from .plan import BYPASS, BlendPlan, Cell
from .types import ProductSpec, Scenario

STRATEGY_NAMES = (
    "greedy-profit-first",
    "avg-value",
    "max-tonnes",
    "local-search",
    "anneal",
)
STOCHASTIC_STRATEGIES = ("local-search", "anneal")

_EPS = 1e-9


@dataclass(eq=True)
class Strategy:
    """A named optimization strategy plus its parameters.

    Recognized parameters: seed (required for stochastic strategies),
    budget_evaluations, restarts, initial_temperature, cooling_factor,
    stall_evaluations, objective ("npv" or "revenue"), cut_grid (list of
    densities; stochastic cut moves snap to it when present).
    """

    name: str
    parameters: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.name not in STRATEGY_NAMES:
            raise ValueError(
                f"unknown strategy {self.name!r}; expected one of {', '.join(STRATEGY_NAMES)}"
            )
        if self.budget() < 0:
            raise ValueError("budget_evaluations must be >= 0")
        if self.name in STOCHASTIC_STRATEGIES and "seed" not in self.parameters:
            raise ValueError(f"strategy {self.name!r} requires a seed")
        objective = self.parameters.get("objective", "npv")
        if objective not in ("npv", "revenue"):
            raise ValueError("objective must be 'npv' or 'revenue'")

    def budget(self) -> int:
        return int(self.parameters.get("budget_evaluations", 2000))

    def objective_kind(self) -> str:
        return self.parameters.get("objective", "npv")

    def to_doc(self) -> dict:
        return {"name": self.name, "parameters": dict(self.parameters)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Strategy":
        if not isinstance(doc, dict) or not isinstance(doc.get("name"), str):
            raise ValueError("strategy document needs a 'name'")
        params = doc.get("parameters", {})
        if not isinstance(params, dict):
            raise ValueError("strategy parameters must be a mapping")
        strategy = cls(doc["name"], dict(params))
        strategy.validate()
        return strategy


@dataclass(eq=True)
class OptimizeResult:
    plan: BlendPlan
    report: EvaluationReport
    trace: list[tuple[int, float]]
    feasible: bool
    objective_value: float
    objective_kind: str
    evaluations: int


class StrategyRanking(NamedTuple):
    name: str
    objective: float
    feasible: bool


def _default_cut(rom) -> float | str:
    curve = rom.wash_curve
    return BYPASS if curve.bypass_allowed else curve.max_density


def _lot_cap(scenario: Scenario, constraints: ConstraintSet, product_id: str, period: int) -> int:
    """Demand cap in feed lots, tightened by any directive tonnage upper
    bound (conservative under washing: sold tonnes never exceed feed)."""
    cap = scenario.target_lots(product_id, period)
    bound = constraints.tonnage_bounds.get((product_id, period))
    if bound is not None and bound.upper is not None:
        cap = min(cap, int(bound.upper // scenario.logistics.lot_size_tonnes))
    return cap


def _washed_fraction(rom, cut) -> tuple[float, float | None]:
    """(yield, product ash) for a cut; bypass and curve-less feed pass through."""
    if rom.wash_curve is None or cut == BYPASS:
        return 1.0, None
    ash, yf = interpolate_curve(rom.wash_curve, cut)
    return yf, ash


class _Budgets:
    """Incremental resource ledger used by construction and move checks:
    per-ROM cumulative availability slack, haul hours, wash feed, per-cell
    lot totals, and per-blend ROM sets."""

    def __init__(self, scenario: Scenario, constraints: ConstraintSet):
        self.scenario = scenario
        self.constraints = constraints
        self.lot = scenario.logistics.lot_size_tonnes
        self.horizon = scenario.horizon_periods
        self.slack: dict[str, list[float]] = {}
        for rom in scenario.roms:
            inflows = constraints.effective_inflows(scenario, rom.id)
            running, cum = 0.0, []
            for inflow in inflows:
                running += inflow
                cum.append(running)
            self.slack[rom.id] = cum
        self.haul_used = [0.0] * self.horizon
        self.wash_used = [0.0] * self.horizon
        self.cell_lots: dict[tuple[int, str], int] = {}
        self.blend_roms: dict[tuple[int, str], dict[str, int]] = {}

    @classmethod
    def from_plan(
        cls, scenario: Scenario, constraints: ConstraintSet, plan: BlendPlan
    ) -> "_Budgets":
        budgets = cls(scenario, constraints)
        for a in plan.allotments:
            washed = _plan_washes(scenario, plan, a.rom_id, a.period)
            budgets.add(a.period, a.product_id, a.rom_id, a.lots, washed)
        for r in plan.rehandles:
            budgets.consume_tonnes(r.rom_id, r.period, r.tonnes)
        return budgets

    def consume_tonnes(self, rom_id: str, period: int, tonnes: float) -> None:
        slack = self.slack[rom_id]
        for p in range(period, self.horizon):
            slack[p] -= tonnes

    def release_tonnes(self, rom_id: str, period: int, tonnes: float) -> None:
        self.consume_tonnes(rom_id, period, -tonnes)

    def rom_can_take(self, rom_id: str, period: int, tonnes: float) -> bool:
        slack = self.slack[rom_id]
        return all(slack[p] >= tonnes - _EPS for p in range(period, self.horizon))

    def add(self, period: int, product_id: str, rom_id: str, lots: int, washed: bool) -> None:
        tonnes = lots * self.lot
        self.consume_tonnes(rom_id, period, tonnes)
        rom = self.scenario.rom(rom_id)
        self.haul_used[period] += tonnes * rom.haul_hours_per_tonne
        if washed:
            self.wash_used[period] += tonnes
        key = (period, product_id)
        self.cell_lots[key] = self.cell_lots.get(key, 0) + lots
        roms = self.blend_roms.setdefault(key, {})
        roms[rom_id] = roms.get(rom_id, 0) + lots

    def remove(self, period: int, product_id: str, rom_id: str, lots: int, washed: bool) -> None:
        tonnes = lots * self.lot
        self.release_tonnes(rom_id, period, tonnes)
        rom = self.scenario.rom(rom_id)
        self.haul_used[period] -= tonnes * rom.haul_hours_per_tonne
        if washed:
            self.wash_used[period] -= tonnes
        key = (period, product_id)
        self.cell_lots[key] = self.cell_lots.get(key, 0) - lots
        roms = self.blend_roms.setdefault(key, {})
        roms[rom_id] = roms.get(rom_id, 0) - lots
        if roms[rom_id] <= 0:
            del roms[rom_id]

    def can_add(self, period: int, product_id: str, rom_id: str, lots: int, washed: bool) -> bool:
        log = self.scenario.logistics
        tonnes = lots * self.lot
        if not self.rom_can_take(rom_id, period, tonnes):
            return False
        rom = self.scenario.rom(rom_id)
        if log.haul_fleet_hours is not None:
            if (
                self.haul_used[period] + tonnes * rom.haul_hours_per_tonne
                > log.haul_fleet_hours[period] + _EPS
            ):
                return False
        if washed and log.wash_capacity_tonnes is not None:
            if self.wash_used[period] + tonnes > log.wash_capacity_tonnes[period] + _EPS:
                return False
        key = (period, product_id)
        cap = _lot_cap(self.scenario, self.constraints, product_id, period)
        if self.cell_lots.get(key, 0) + lots > cap:
            return False
        roms = self.blend_roms.get(key, {})
        if rom_id not in roms:
            if len(roms) >= self.scenario.max_blend_roms():
                return False
            if lots < log.min_lots_per_used_rom:
                return False
        return True


def _plan_washes(scenario: Scenario, plan: BlendPlan, rom_id: str, period: int) -> bool:
    rom = scenario.rom(rom_id)
    if rom.wash_curve is None:
        return False
    return plan.cut_points.get((rom_id, period), BYPASS) != BYPASS


class _BlendState:
    """Running mass-weighted blend per (period, product) during construction."""

    __slots__ = ("tonnes", "weighted")

    def __init__(self):
        self.tonnes = 0.0
        self.weighted: dict[str, float] = {}

    def preview(self, add_tonnes: float, quality: dict[str, float]) -> dict[str, float]:
        total = self.tonnes + add_tonnes
        blended = {}
        codes = set(self.weighted) | set(quality)
        for code in codes:
            acc = self.weighted.get(code, 0.0) + add_tonnes * quality.get(
                code, self.weighted.get(code, 0.0) / self.tonnes if self.tonnes else 0.0
            )
            blended[code] = acc / total
        return blended

    def push(self, add_tonnes: float, quality: dict[str, float]) -> None:
        for code, value in quality.items():
            self.weighted[code] = self.weighted.get(code, 0.0) + add_tonnes * value
        self.tonnes += add_tonnes

    def quality(self) -> dict[str, float]:
        if not self.tonnes:
            return {}
        return {code: w / self.tonnes for code, w in self.weighted.items()}


def _spec_distance(quality: dict[str, float], product: ProductSpec) -> float:
    distance = 0.0
    for code, rng in product.quality_range.items():
        value = quality.get(code)
        if value is None:
            continue
        if value > rng.max:
            distance += value - rng.max
        elif value < rng.min:
            distance += rng.min - value
    return distance


def _adjustment_per_tonne(quality: dict[str, float], product: ProductSpec) -> float:
    total = 0.0
    for code, adj in product.adjustments.items():
        value = quality.get(code)
        if value is None:
            continue
        deviation = value - adj.target
        if deviation > 0:
            total += adj.rate_above * deviation
        elif deviation < 0:
            total += adj.rate_below * (-deviation)
    return total


class _Builder:
    """Shared greedy construction machinery for the initial plan and the
    three heuristic strategies."""

    def __init__(self, scenario: Scenario, constraints: ConstraintSet, value_aware: bool):
        self.scenario = scenario
        self.constraints = constraints
        self.value_aware = value_aware
        self.budgets = _Budgets(scenario, constraints)
        self.cells: dict[Cell, int] = {}
        self.cuts: dict[tuple[str, int], float | str] = {}
        self.states: dict[tuple[str, int], _BlendState] = {}
        self.lot = scenario.logistics.lot_size_tonnes
        for cell, lots in sorted(constraints.pins.items()):
            if lots <= 0:
                continue
            period, product_id, rom_id = cell
            self._place(period, product_id, rom_id, lots)

    def _cut_for(self, rom_id: str, period: int):
        rom = self.scenario.rom(rom_id)
        if rom.wash_curve is None:
            return None
        key = (rom_id, period)
        if key not in self.cuts:
            self.cuts[key] = _default_cut(rom)
        return self.cuts[key]

    def _washed_parcel(self, rom_id: str, period: int, lots: int):
        rom = self.scenario.rom(rom_id)
        cut = self._cut_for(rom_id, period)
        quality = dict(_degraded(self.scenario, rom_id, period))
        yf, ash = _washed_fraction(rom, BYPASS if cut is None else cut)
        if ash is not None:
            quality["ash"] = ash
        return lots * self.lot * yf, quality, cut is not None and cut != BYPASS

    def _place(self, period: int, product_id: str, rom_id: str, lots: int) -> None:
        tonnes, quality, washed = self._washed_parcel(rom_id, period, lots)
        self.budgets.add(period, product_id, rom_id, lots, washed)
        state = self.states.setdefault((product_id, period), _BlendState())
        state.push(tonnes, quality)
        cell = (period, product_id, rom_id)
        self.cells[cell] = self.cells.get(cell, 0) + lots

    def candidate(
        self, period: int, product_id: str, require_in_spec: bool
    ) -> tuple[tuple, str, int] | None:
        """Best (score, rom, batch) for adding lots to one blend, or None."""
        product = self.scenario.product(product_id)
        state = self.states.setdefault((product_id, period), _BlendState())
        blend_key = (period, product_id)
        present = self.budgets.blend_roms.get(blend_key, {})
        min_lots = self.scenario.logistics.min_lots_per_used_rom
        best: tuple[tuple, str, int] | None = None
        for rom in self.scenario.roms:
            cell = (period, product_id, rom.id)
            if cell in self.constraints.excludes or cell in self.constraints.pins:
                continue
            batch = 1 if rom.id in present else min_lots
            tonnes, quality, washed = self._washed_parcel(rom.id, period, batch)
            if not self.budgets.can_add(period, product_id, rom.id, batch, washed):
                continue
            blended = state.preview(tonnes, quality)
            distance = _spec_distance(blended, product)
            if require_in_spec and distance > _EPS:
                continue
            if self.value_aware:
                score = (distance, -_adjustment_per_tonne(blended, product), rom.id)
            else:
                score = (distance, rom.id)
            if best is None or score < best[0]:
                best = (score, rom.id, batch)
        return best

    def fill_contract(self) -> None:
        scenario = self.scenario
        for period in range(scenario.horizon_periods):
            order = sorted(
                scenario.products,
                key=lambda p: (-p.base_price_per_tonne[period], p.id),
            )
            for product in order:
                needed = math.ceil(product.contract_min_tonnes[period] / self.lot - _EPS)
                while self.budgets.cell_lots.get((period, product.id), 0) < needed:
                    pick = self.candidate(period, product.id, require_in_spec=False)
                    if pick is None:
                        break
                    _, rom_id, batch = pick
                    self._place(period, product.id, rom_id, batch)

    def cell_order(self, mode: str) -> list[tuple[int, str]]:
        pairs = [
            (period, product.id)
            for product in self.scenario.products
            for period in range(self.scenario.horizon_periods)
        ]
        if mode == "max-tonnes":
            pairs.sort(key=lambda c: (c[0], c[1]))
        else:
            pairs.sort(
                key=lambda c: (
                    -self.scenario.product(c[1]).base_price_per_tonne[c[0]],
                    c[1],
                    c[0],
                )
            )
        return pairs

    def fill_spare_sequential(self, mode: str) -> None:
        for period, product_id in self.cell_order(mode):
            cap = _lot_cap(self.scenario, self.constraints, product_id, period)
            while self.budgets.cell_lots.get((period, product_id), 0) < cap:
                state = self.states.setdefault((product_id, period), _BlendState())
                in_spec_now = (
                    _spec_distance(state.quality(), self.scenario.product(product_id)) <= _EPS
                )
                pick = self.candidate(period, product_id, require_in_spec=in_spec_now)
                if pick is None:
                    break
                _, rom_id, batch = pick
                self._place(period, product_id, rom_id, batch)

    def fill_spare_avg_value(self) -> None:
        """Keep adding the highest per-tonne candidate while it does not
        dilute the plan's running average revenue per tonne."""
        scenario = self.scenario
        while True:
            total_rev, total_tonnes = self._current_revenue()
            average = total_rev / total_tonnes if total_tonnes else None
            best = None
            for period, product_id in self.cell_order("avg-value"):
                cap = _lot_cap(scenario, self.constraints, product_id, period)
                if self.budgets.cell_lots.get((period, product_id), 0) >= cap:
                    continue
                pick = self.candidate(period, product_id, require_in_spec=True)
                if pick is None:
                    continue
                _, rom_id, batch = pick
                marginal = self._marginal_per_tonne(period, product_id, rom_id, batch)
                if marginal is None:
                    continue
                if best is None or marginal > best[0] + _EPS:
                    best = (marginal, period, product_id, rom_id, batch)
            if best is None:
                break
            marginal, period, product_id, rom_id, batch = best
            if average is not None and marginal < average - _EPS:
                break
            self._place(period, product_id, rom_id, batch)

    def _marginal_per_tonne(
        self, period: int, product_id: str, rom_id: str, batch: int
    ) -> float | None:
        product = self.scenario.product(product_id)
        state = self.states.setdefault((product_id, period), _BlendState())
        tonnes, quality, _ = self._washed_parcel(rom_id, period, batch)
        if tonnes <= 0:
            return None
        blended = state.preview(tonnes, quality)
        if _spec_distance(blended, product) > _EPS:
            return None
        price = product.base_price_per_tonne[period]
        new_rev = (state.tonnes + tonnes) * (price + _adjustment_per_tonne(blended, product))
        old_quality = state.quality()
        old_in_spec = state.tonnes > 0 and _spec_distance(old_quality, product) <= _EPS
        old_rev = (
            state.tonnes * (price + _adjustment_per_tonne(old_quality, product))
            if old_in_spec
            else 0.0
        )
        return (new_rev - old_rev) / tonnes

    def _current_revenue(self) -> tuple[float, float]:
        total_rev, total_tonnes = 0.0, 0.0
        for (product_id, period), state in self.states.items():
            if not state.tonnes:
                continue
            product = self.scenario.product(product_id)
            quality = state.quality()
            if _spec_distance(quality, product) > _EPS:
                continue
            price = product.base_price_per_tonne[period]
            total_rev += state.tonnes * (price + _adjustment_per_tonne(quality, product))
            total_tonnes += state.tonnes
        return total_rev, total_tonnes

    def build(self) -> BlendPlan:
        used_cuts = {
            (rom_id, period): cut
            for (rom_id, period), cut in self.cuts.items()
            if any(c[0] == period and c[2] == rom_id for c in self.cells)
        }
        return BlendPlan.from_cells(self.cells, used_cuts, [])


def _degraded(scenario: Scenario, rom_id: str, period: int) -> dict[str, float]:
    return _degraded_quality(scenario, scenario.rom(rom_id), period)


def _construct(scenario: Scenario, constraints: ConstraintSet, mode: str) -> BlendPlan:
    builder = _Builder(scenario, constraints, value_aware=mode != "initial")
    builder.fill_contract()
    if mode == "avg-value":
        builder.fill_spare_avg_value()
    else:
        builder.fill_spare_sequential(mode)
    return builder.build()


def initial_plan(scenario: Scenario, constraints: ConstraintSet | None = None) -> BlendPlan:
    """Satisficing constructor: fill contract tonnes first, then spare lots
    by descending base price, never breaking an in-spec blend on purpose."""
    return _construct(scenario, constraints or ConstraintSet.empty(), "initial")


def max_throughput_plan(scenario: Scenario) -> BlendPlan:
    """Maximum-throughput baseline: every blend filled to its lot budget and
    every washed ROM cut at its maximum-yield setting. The utilization
    darling, not the NPV one."""
    plan = _construct(scenario, ConstraintSet.empty(), "max-tonnes")
    cuts = dict(plan.cut_points)
    for a in plan.allotments:
        rom = scenario.rom(a.rom_id)
        if rom.wash_curve is not None:
            cuts[(a.rom_id, a.period)] = rom.wash_curve.max_density
    return BlendPlan(list(plan.allotments), cuts, list(plan.rehandles))


def repair(
    scenario: Scenario, plan: BlendPlan, constraints: ConstraintSet | None = None
) -> BlendPlan:
    """Drop-based feasibility repair; never adds lots and is idempotent.

    Restores demand caps, blend cardinality, minimum lots per used ROM,
    availability (with reservations), haul hours, and wash capacity by
    dropping the lowest-marginal-revenue lots first. Pinned allotments are
    never dropped; missing cut-points for used washed ROMs are filled with
    the ROM's default setting.
    """
    cons = constraints or ConstraintSet.empty()
    plan = cons.apply_pins(plan)
    cells = plan.cells()
    for cell in list(cells):
        if cell in cons.excludes and cell not in cons.pins:
            del cells[cell]
    cuts = dict(plan.cut_points)
    rehandles = {(r.period, r.rom_id): r.tonnes for r in plan.rehandles}
    log = scenario.logistics
    lot = log.lot_size_tonnes

    def price(cell: Cell) -> float:
        period, product_id, _ = cell
        return scenario.product(product_id).base_price_per_tonne[period]

    def washed(cell: Cell) -> bool:
        period, _, rom_id = cell
        rom = scenario.rom(rom_id)
        if rom.wash_curve is None:
            return False
        return cuts.get((rom_id, period), BYPASS) != BYPASS

    for (period, product_id, rom_id) in cells:
        rom = scenario.rom(rom_id)
        if rom.wash_curve is not None and (rom_id, period) not in cuts:
            cuts[(rom_id, period)] = _default_cut(rom)

    def droppable(cell: Cell) -> bool:
        return cell not in cons.pins

    changed = True
    while changed:
        changed = False
        # Demand caps: drain the biggest contributor first.
        blend_cells: dict[tuple[int, str], list[Cell]] = {}
        for cell in cells:
            blend_cells.setdefault((cell[0], cell[1]), []).append(cell)
        for (period, product_id), members in sorted(blend_cells.items()):
            cap = _lot_cap(scenario, cons, product_id, period)
            total = sum(cells[c] for c in members)
            while total > cap:
                pool = sorted(
                    (c for c in members if droppable(c) and cells.get(c, 0) > 0),
                    key=lambda c: (-cells[c], c[2]),
                )
                if not pool:
                    break
                cells[pool[0]] -= 1
                total -= 1
                changed = True
        cells = {c: n for c, n in cells.items() if n > 0}

        # Blend cardinality: remove the smallest-contribution ROM outright.
        blend_cells = {}
        for cell in cells:
            blend_cells.setdefault((cell[0], cell[1]), []).append(cell)
        max_roms = scenario.max_blend_roms()
        for (period, product_id), members in sorted(blend_cells.items()):
            while len([c for c in members if cells.get(c, 0) > 0]) > max_roms:
                pool = sorted(
                    (c for c in members if droppable(c) and cells.get(c, 0) > 0),
                    key=lambda c: (cells[c], c[2]),
                )
                if not pool:
                    break
                cells.pop(pool[0])
                members.remove(pool[0])
                changed = True

        # Minimum lots per used ROM: stragglers are removed, not topped up.
        for cell in sorted(cells):
            if droppable(cell) and 0 < cells[cell] < log.min_lots_per_used_rom:
                del cells[cell]
                changed = True

        # Availability (including reservations): drop cheapest lots drawn
        # before the shortfall period.
        for rom in scenario.roms:
            inflows = cons.effective_inflows(scenario, rom.id)
            balance, short_period = 0.0, None
            for period in range(scenario.horizon_periods):
                balance += inflows[period]
                balance -= sum(
                    n * lot for c, n in cells.items() if c[2] == rom.id and c[0] == period
                )
                balance -= rehandles.get((period, rom.id), 0.0)
                if balance < -_EPS:
                    short_period = period
                    break
            if short_period is None:
                continue
            excess = -balance
            pool = sorted(
                (c for c in cells if c[2] == rom.id and c[0] <= short_period and droppable(c)),
                key=lambda c: (price(c), c[0], c[1]),
            )
            for cell in pool:
                while cells.get(cell, 0) > 0 and excess > _EPS:
                    cells[cell] -= 1
                    excess -= lot
                    changed = True
                if cells.get(cell) == 0:
                    del cells[cell]
            for (period, rom_id) in sorted(rehandles):
                if rom_id != rom.id or period > short_period:
                    continue
                while rehandles[(period, rom_id)] > _EPS and excess > _EPS:
                    trim = min(rehandles[(period, rom_id)], excess)
                    rehandles[(period, rom_id)] -= trim
                    excess -= trim
                    changed = True
        rehandles = {k: t for k, t in rehandles.items() if t > _EPS}

        # Haul hours and wash capacity, cheapest lots first.
        if log.haul_fleet_hours is not None or log.wash_capacity_tonnes is not None:
            for period in range(scenario.horizon_periods):
                if log.haul_fleet_hours is not None:
                    while True:
                        hours = sum(
                            n * lot * scenario.rom(c[2]).haul_hours_per_tonne
                            for c, n in cells.items()
                            if c[0] == period
                        )
                        if hours <= log.haul_fleet_hours[period] + _EPS:
                            break
                        pool = sorted(
                            (c for c in cells if c[0] == period and droppable(c)),
                            key=lambda c: (
                                price(c),
                                -scenario.rom(c[2]).haul_hours_per_tonne,
                                c[1],
                                c[2],
                            ),
                        )
                        if not pool:
                            break
                        cells[pool[0]] -= 1
                        if cells[pool[0]] == 0:
                            del cells[pool[0]]
                        changed = True
                if log.wash_capacity_tonnes is not None:
                    while True:
                        feed = sum(
                            n * lot for c, n in cells.items() if c[0] == period and washed(c)
                        )
                        if feed <= log.wash_capacity_tonnes[period] + _EPS:
                            break
                        pool = sorted(
                            (
                                c
                                for c in cells
                                if c[0] == period and washed(c) and droppable(c)
                            ),
                            key=lambda c: (price(c), c[1], c[2]),
                        )
                        if not pool:
                            break
                        cells[pool[0]] -= 1
                        if cells[pool[0]] == 0:
                            del cells[pool[0]]
                        changed = True

    rehandle_list = [
        (period, rom_id, tonnes) for (period, rom_id), tonnes in sorted(rehandles.items())
    ]
    return BlendPlan.from_cells(cells, cuts, rehandle_list)


def _propose(
    scenario: Scenario,
    plan: BlendPlan,
    rng: random.Random,
    constraints: ConstraintSet,
    cut_grid: list[float] | None,
) -> BlendPlan:
    """One feasibility-preserving random move; returns the plan unchanged
    when no valid move is found."""
    budgets = _Budgets.from_plan(scenario, constraints, plan)
    moves = ["move-lot", "swap-lots"]
    if any((scenario.rom(a.rom_id).wash_curve is not None) for a in plan.allotments) or any(
        rom.wash_curve is not None for rom in scenario.roms
    ):
        moves.append("adjust-cut")
    moves.append("toggle-rehandle")
    weights = {"move-lot": 0.45, "swap-lots": 0.25, "adjust-cut": 0.2, "toggle-rehandle": 0.1}
    order = rng.choices(moves, weights=[weights[m] for m in moves], k=len(moves))
    seen = []
    for move in order:
        if move in seen:
            continue
        seen.append(move)
        if move == "move-lot":
            result = _move_lot(scenario, plan, rng, constraints, budgets)
        elif move == "swap-lots":
            result = _swap_lots(scenario, plan, rng, constraints, budgets)
        elif move == "adjust-cut":
            result = _adjust_cut(scenario, plan, rng, budgets, cut_grid)
        else:
            result = _toggle_rehandle(scenario, plan, rng, budgets)
        if result is not None:
            return result
    return plan


def _movable_sources(plan: BlendPlan, constraints: ConstraintSet):
    return [a for a in plan.allotments if (a.period, a.product_id, a.rom_id) not in constraints.pins]


def _move_lot(scenario, plan, rng, constraints, budgets) -> BlendPlan | None:
    sources = _movable_sources(plan, constraints)
    if not sources or not scenario.roms or not scenario.products:
        return None
    min_lots = scenario.logistics.min_lots_per_used_rom
    rom_ids = [r.id for r in scenario.roms]
    product_ids = [p.id for p in scenario.products]
    for _ in range(10):
        src = sources[rng.randrange(len(sources))]
        src_cell = (src.period, src.product_id, src.rom_id)
        if src.lots - 1 != 0 and src.lots - 1 < min_lots:
            continue
        if rng.random() < 0.6:
            target = (src.period, src.product_id, rom_ids[rng.randrange(len(rom_ids))])
        else:
            target = (
                rng.randrange(scenario.horizon_periods),
                product_ids[rng.randrange(len(product_ids))],
                rom_ids[rng.randrange(len(rom_ids))],
            )
        if target == src_cell or constraints.cell_locked(target):
            continue
        t_period, t_product, t_rom = target
        washed_src = _plan_washes(scenario, plan, src.rom_id, src.period)
        budgets.remove(src.period, src.product_id, src.rom_id, 1, washed_src)
        cut_known = (t_rom, t_period) in plan.cut_points
        rom = scenario.rom(t_rom)
        t_cut = plan.cut_points.get(
            (t_rom, t_period), _default_cut(rom) if rom.wash_curve is not None else None
        )
        washed_t = rom.wash_curve is not None and t_cut != BYPASS
        if budgets.can_add(t_period, t_product, t_rom, 1, washed_t):
            cells = plan.cells()
            cells[src_cell] -= 1
            cells[target] = cells.get(target, 0) + 1
            cuts = plan.cut_points
            if rom.wash_curve is not None and not cut_known:
                cuts = dict(cuts)
                cuts[(t_rom, t_period)] = t_cut
            return BlendPlan.from_cells(cells, cuts, plan.rehandles)
        budgets.add(src.period, src.product_id, src.rom_id, 1, washed_src)
    return None


def _swap_lots(scenario, plan, rng, constraints, budgets) -> BlendPlan | None:
    sources = _movable_sources(plan, constraints)
    if len(sources) < 2:
        return None
    min_lots = scenario.logistics.min_lots_per_used_rom
    for _ in range(10):
        a = sources[rng.randrange(len(sources))]
        b = sources[rng.randrange(len(sources))]
        if (a.period, a.product_id, a.rom_id) == (b.period, b.product_id, b.rom_id):
            continue
        if a.rom_id == b.rom_id:
            continue
        if (a.lots - 1 != 0 and a.lots - 1 < min_lots) or (
            b.lots - 1 != 0 and b.lots - 1 < min_lots
        ):
            continue
        cell_ab = (a.period, a.product_id, b.rom_id)
        cell_ba = (b.period, b.product_id, a.rom_id)
        if constraints.cell_locked(cell_ab) or constraints.cell_locked(cell_ba):
            continue
        washed_a = _plan_washes(scenario, plan, a.rom_id, a.period)
        washed_b = _plan_washes(scenario, plan, b.rom_id, b.period)
        budgets.remove(a.period, a.product_id, a.rom_id, 1, washed_a)
        budgets.remove(b.period, b.product_id, b.rom_id, 1, washed_b)
        rom_b_at_a = scenario.rom(b.rom_id)
        rom_a_at_b = scenario.rom(a.rom_id)
        cut_b_at_a = plan.cut_points.get(
            (b.rom_id, a.period),
            _default_cut(rom_b_at_a) if rom_b_at_a.wash_curve is not None else None,
        )
        cut_a_at_b = plan.cut_points.get(
            (a.rom_id, b.period),
            _default_cut(rom_a_at_b) if rom_a_at_b.wash_curve is not None else None,
        )
        ok = budgets.can_add(
            a.period,
            a.product_id,
            b.rom_id,
            1,
            rom_b_at_a.wash_curve is not None and cut_b_at_a != BYPASS,
        )
        if ok:
            budgets.add(
                a.period,
                a.product_id,
                b.rom_id,
                1,
                rom_b_at_a.wash_curve is not None and cut_b_at_a != BYPASS,
            )
            ok = budgets.can_add(
                b.period,
                b.product_id,
                a.rom_id,
                1,
                rom_a_at_b.wash_curve is not None and cut_a_at_b != BYPASS,
            )
            budgets.remove(
                a.period,
                a.product_id,
                b.rom_id,
                1,
                rom_b_at_a.wash_curve is not None and cut_b_at_a != BYPASS,
            )
        if not ok:
            budgets.add(a.period, a.product_id, a.rom_id, 1, washed_a)
            budgets.add(b.period, b.product_id, b.rom_id, 1, washed_b)
            continue
        cells = plan.cells()
        cells[(a.period, a.product_id, a.rom_id)] -= 1
        cells[(b.period, b.product_id, b.rom_id)] -= 1
        cells[cell_ab] = cells.get(cell_ab, 0) + 1
        cells[cell_ba] = cells.get(cell_ba, 0) + 1
        cuts = dict(plan.cut_points)
        if rom_b_at_a.wash_curve is not None:
            cuts.setdefault((b.rom_id, a.period), cut_b_at_a)
        if rom_a_at_b.wash_curve is not None:
            cuts.setdefault((a.rom_id, b.period), cut_a_at_b)
        return BlendPlan.from_cells(cells, cuts, plan.rehandles)
    return None


def _adjust_cut(scenario, plan, rng, budgets, cut_grid) -> BlendPlan | None:
    keys = sorted(plan.cut_points)
    if not keys:
        return None
    log = scenario.logistics
    lot = log.lot_size_tonnes
    for _ in range(10):
        rom_id, period = keys[rng.randrange(len(keys))]
        rom = scenario.rom(rom_id)
        curve = rom.wash_curve
        if curve is None:
            continue
        current = plan.cut_points[(rom_id, period)]
        options: list[float | str]
        if cut_grid:
            ingrid = [d for d in cut_grid if curve.min_density <= d <= curve.max_density]
            if not ingrid:
                ingrid = [curve.max_density]
            if current == BYPASS:
                new = ingrid[rng.randrange(len(ingrid))]
            else:
                idx = min(range(len(ingrid)), key=lambda i: abs(ingrid[i] - current))
                step = rng.choice([-1, 1])
                if curve.bypass_allowed and rng.random() < 0.2:
                    new = BYPASS
                else:
                    new = ingrid[max(0, min(len(ingrid) - 1, idx + step))]
        else:
            if current == BYPASS or (curve.bypass_allowed and rng.random() < 0.2):
                if current == BYPASS:
                    new = curve.min_density + rng.random() * (
                        curve.max_density - curve.min_density
                    )
                else:
                    new = BYPASS
            else:
                span = curve.max_density - curve.min_density
                new = min(
                    curve.max_density,
                    max(curve.min_density, current + (rng.random() * 2 - 1) * 0.1 * max(span, 1e-6)),
                )
        if new == current:
            continue
        if new != BYPASS and current == BYPASS and log.wash_capacity_tonnes is not None:
            feed = sum(
                a.lots * lot
                for a in plan.allotments
                if a.rom_id == rom_id and a.period == period
            )
            if budgets.wash_used[period] + feed > log.wash_capacity_tonnes[period] + _EPS:
                continue
        cuts = dict(plan.cut_points)
        cuts[(rom_id, period)] = new
        return BlendPlan(list(plan.allotments), cuts, list(plan.rehandles))
    return None


def _toggle_rehandle(scenario, plan, rng, budgets) -> BlendPlan | None:
    lot = scenario.logistics.lot_size_tonnes
    if plan.rehandles and rng.random() < 0.5:
        idx = rng.randrange(len(plan.rehandles))
        rehandles = list(plan.rehandles)
        rehandles.pop(idx)
        return BlendPlan(list(plan.allotments), dict(plan.cut_points), rehandles)
    if not scenario.roms:
        return None
    for _ in range(6):
        rom = scenario.roms[rng.randrange(len(scenario.roms))]
        period = rng.randrange(scenario.horizon_periods)
        if not budgets.rom_can_take(rom.id, period, lot):
            continue
        rehandles = list(plan.rehandles) + [(period, rom.id, lot)]
        return BlendPlan(list(plan.allotments), dict(plan.cut_points), rehandles)
    return None


def neighbors(
    scenario: Scenario,
    plan: BlendPlan,
    rng: random.Random,
    constraints: ConstraintSet | None = None,
    cut_grid: list[float] | None = None,
) -> BlendPlan:
    """One random neighbor of a feasible plan, passed through repair."""
    cons = constraints or ConstraintSet.empty()
    return repair(scenario, _propose(scenario, plan, rng, cons, cut_grid), cons)


def optimize(
    scenario: Scenario,
    strategy: Strategy,
    constraints: ConstraintSet | None = None,
    cancel=None,
    on_progress: Callable[[int, int], None] | None = None,
    seed_plans: list[BlendPlan] | None = None,
    on_candidate: Callable[[BlendPlan, float, float], None] | None = None,
) -> OptimizeResult:
    """Run one strategy to completion and return its best plan.

    The objective is the NPV of net cashflows (or total revenue when the
    strategy says so). Directive constraint sets are honored as hard
    constraints: the search drives their violation to zero before it pushes
    the objective, and plans that violate them never become the incumbent.
    Stochastic strategies are deterministic given their seed; a zero budget
    returns the repaired initial plan. Cancellation is polled between
    evaluations and returns the best plan found so far.

    `seed_plans` are extra starting candidates (a session's incumbent, say);
    `on_candidate(plan, violation, objective)` fires once per distinct plan
    measured, which is how callers harvest near-optimal alternatives.
    """
    strategy.validate()
    cons = constraints or ConstraintSet.empty()
    kind = strategy.objective_kind()
    budget = strategy.budget()
    evaluations = 0
    trace: list[tuple[int, float]] = []
    cache: dict[tuple, tuple[float, float]] = {}

    def measure(plan: BlendPlan) -> tuple[float, float]:
        key = plan.key()
        hit = cache.get(key)
        if hit is None:
            report = evaluate_plan(scenario, plan)
            viol = cons.soft_violation(report)
            viol += sum(abs(v.magnitude) for v in report.violations)
            hit = (viol, report.objective(kind))
            cache[key] = hit
            if on_candidate is not None:
                on_candidate(plan, hit[0], hit[1])
        return hit

    baseline = repair(scenario, initial_plan(scenario, cons), cons)
    base_viol, base_obj = measure(baseline)
    evaluations += 1

    best_plan, best_viol, best_obj = baseline, base_viol, base_obj
    if base_viol <= _EPS:
        trace.append((evaluations, base_obj))

    def consider(plan: BlendPlan, viol: float, obj: float) -> bool:
        nonlocal best_plan, best_viol, best_obj
        if (viol, -obj) < (best_viol, -best_obj):
            best_plan, best_viol, best_obj = plan, viol, obj
            if viol <= _EPS:
                trace.append((evaluations, obj))
            return True
        return False

    for seed_plan in seed_plans or []:
        seeded = repair(scenario, seed_plan, cons)
        viol, obj = measure(seeded)
        evaluations += 1
        consider(seeded, viol, obj)

    cancelled = cancel is not None and cancel.is_set()
    if budget > 0 and not cancelled:
        if strategy.name in ("greedy-profit-first", "avg-value", "max-tonnes"):
            candidate = repair(scenario, _construct(scenario, cons, strategy.name), cons)
            viol, obj = measure(candidate)
            evaluations += 1
            consider(candidate, viol, obj)
        else:
            evaluations = _stochastic_search(
                scenario,
                strategy,
                cons,
                best_plan,
                measure,
                consider,
                evaluations,
                budget,
                cancel,
                on_progress,
            )

    report = evaluate_plan(scenario, best_plan)
    feasible = not report.violations and not cons.violated(scenario, best_plan, report)
    if on_progress is not None:
        on_progress(evaluations, budget)
    return OptimizeResult(
        plan=best_plan,
        report=report,
        trace=trace,
        feasible=feasible,
        objective_value=report.objective(kind),
        objective_kind=kind,
        evaluations=evaluations,
    )


def _stochastic_search(
    scenario,
    strategy,
    cons,
    baseline,
    measure,
    consider,
    evaluations,
    budget,
    cancel,
    on_progress,
) -> int:
    params = strategy.parameters
    rng = random.Random(params["seed"])
    restarts = max(1, int(params.get("restarts", 1)))
    stall_limit = int(params.get("stall_evaluations", 1200))
    cooling = float(params.get("cooling_factor", 0.999))
    cut_grid = params.get("cut_grid")
    greedy_only = strategy.name == "local-search"
    base_viol, base_obj = measure(baseline)
    t0 = params.get("initial_temperature")
    if t0 is None:
        t0 = 0.02 * (abs(base_obj) + 1.0)
    per_restart = max(1, budget // restarts)

    for restart in range(restarts):
        if evaluations >= budget or (cancel is not None and cancel.is_set()):
            break
        current = baseline
        if restart > 0:
            for _ in range(24):
                current = _propose(scenario, current, rng, cons, cut_grid)
        cur_viol, cur_obj = measure(current)
        consider(current, cur_viol, cur_obj)
        temperature = float(t0)
        steps = 0
        stall = 0
        while steps < per_restart and evaluations < budget and stall < stall_limit:
            if cancel is not None and cancel.is_set():
                return evaluations
            candidate = _propose(scenario, current, rng, cons, cut_grid)
            viol, obj = measure(candidate)
            evaluations += 1
            steps += 1
            if on_progress is not None and evaluations % 64 == 0:
                on_progress(evaluations, budget)
            accept = False
            if viol < cur_viol - _EPS:
                accept = True
            elif viol <= cur_viol + _EPS:
                delta = obj - cur_obj
                if delta >= 0:
                    accept = True
                elif not greedy_only and temperature > 1e-12:
                    accept = rng.random() < math.exp(delta / temperature)
            elif not greedy_only and cur_viol > _EPS:
                # Still hunting feasibility: tolerate small violation upticks.
                accept = rng.random() < 0.1
            if accept:
                current, cur_viol, cur_obj = candidate, viol, obj
            if consider(candidate, viol, obj):
                stall = 0
            else:
                stall += 1
            temperature *= cooling
    return evaluations


def compare_strategies(
    scenario: Scenario, strategies: list[Strategy]
) -> list[StrategyRanking]:
    """Run each strategy independently on the same scenario and rank them by
    objective, ties broken by strategy name."""
    if len(strategies) < 2:
        raise ValueError("strategy comparison needs at least 2 strategies")
    rows = []
    for strategy in strategies:
        result = optimize(scenario, strategy)
        rows.append(StrategyRanking(strategy.name, result.objective_value, result.feasible))
    rows.sort(key=lambda r: (-r.objective, r.name))
    return rows


def marginal_availability_run(
    scenario: Scenario, strategy: Strategy, rom_id: str, delta_tonnes: float
) -> OptimizeResult:
    """Re-optimize with extra availability of one ROM in the first period."""
    if not scenario.has_rom(rom_id):
        raise UnknownRomError(f"unknown rom {rom_id!r}")
    roms = []
    for rom in scenario.roms:
        if rom.id == rom_id:
            tonnes = list(rom.available_tonnes)
            tonnes[0] += delta_tonnes
            rom = replace(rom, available_tonnes=tonnes)
        roms.append(rom)
    bumped = Scenario(
        horizon_periods=scenario.horizon_periods,
        days_per_period=scenario.days_per_period,
        registry=scenario.registry,
        roms=roms,
        products=scenario.products,
        logistics=scenario.logistics,
        market=scenario.market,
    )
    return optimize(bumped, strategy)
