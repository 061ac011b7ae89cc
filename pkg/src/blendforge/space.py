"""Exact counting and exhaustive enumeration of the blend decision space.

Counting treats each product-period's tonnage target as an exact lot budget
(the worked-example framing: a 100 kt target in 1000 t allotments is 100
lots), so the unconstrained space is a product of stars-and-bars composition
counts. Shared ROM availability caps are the only coupling modeled; anything
finer (quality, haulage) is what enumeration plus evaluation answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from .errors import SpaceTooLargeError
from .evaluate import EvaluationReport, evaluate_plan
from .plan import BYPASS, Allotment, BlendPlan
from .types import Scenario


def count_compositions(n: int, k: int) -> int:
    """Number of nonnegative integer k-tuples summing to n: C(n+k-1, k-1).

    Exact at arbitrary precision; n >= 0 and k >= 1.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.comb(n + k - 1, k - 1)


@dataclass(eq=True)
class SpaceSummary:
    """Shape of a blend space: one (lot budget, ROM type count) per
    product-period, plus optional shared per-ROM lot caps."""

    per_product: list[tuple[int, int]]
    caps: dict[str, int] | None = None
    rom_ids: list[str] | None = None

    def __post_init__(self):
        for n, k in self.per_product:
            if n < 0 or k < 1:
                raise ValueError("each entry needs n >= 0 and k >= 1")
        if self.caps is not None:
            if self.rom_ids is None:
                raise ValueError("caps require rom_ids")
            if set(self.caps) - set(self.rom_ids):
                raise ValueError("caps reference unknown rom ids")

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "SpaceSummary":
        rom_ids = [r.id for r in scenario.roms]
        k = len(rom_ids)
        per_product = []
        for product in scenario.products:
            for period in range(scenario.horizon_periods):
                per_product.append((scenario.target_lots(product.id, period), k))
        lot = scenario.logistics.lot_size_tonnes
        caps = {r.id: int(r.total_available() // lot) for r in scenario.roms}
        return cls(per_product, caps, rom_ids)


def count_blend_space(summary: SpaceSummary) -> int:
    """Exact size of the blend space described by a summary.

    Without binding caps this is the product of per-product composition
    counts; with binding caps it is a dynamic program over per-ROM lot
    budgets.
    """
    ns = [n for n, _ in summary.per_product]
    total_lots = sum(ns)
    caps = summary.caps
    binding = caps is not None and any(c < total_lots for c in caps.values())
    if not binding:
        result = 1
        for n, k in summary.per_product:
            result *= count_compositions(n, k)
        return result
    assert summary.rom_ids is not None
    cap_list = tuple(caps.get(rom_id, total_lots) for rom_id in summary.rom_ids)
    for _, k in summary.per_product:
        if k != len(summary.rom_ids):
            raise ValueError("capped counting requires every product to draw on all roms")
    return _count_capped(tuple(ns), cap_list)


def _count_capped(ns: tuple[int, ...], caps: tuple[int, ...]) -> int:
    """DP over ROMs: allocate each ROM's lot budget across products."""

    @lru_cache(maxsize=None)
    def ways(rom_index: int, remaining: tuple[int, ...]) -> int:
        if rom_index == len(caps):
            return 1 if not any(remaining) else 0
        budget = caps[rom_index]
        total = 0
        for allocation in _bounded_allocations(remaining, budget):
            left = tuple(r - a for r, a in zip(remaining, allocation))
            total += ways(rom_index + 1, left)
        return total

    result = ways(0, ns)
    ways.cache_clear()
    return result


def _bounded_allocations(
    bounds: tuple[int, ...], budget: int
) -> Iterator[tuple[int, ...]]:
    """All tuples a with 0 <= a_i <= bounds_i and sum(a) <= budget."""
    if not bounds:
        yield ()
        return
    head, rest = bounds[0], bounds[1:]
    for a in range(min(head, budget) + 1):
        for tail in _bounded_allocations(rest, budget - a):
            yield (a,) + tail


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All nonnegative k-tuples summing to n, lexicographic."""
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def cut_point_options(scenario: Scenario, rom_id: str, grid: list[float]) -> list:
    """Admissible enumeration cut settings for one ROM: the grid points inside
    its curve's density range, plus bypass where allowed. Curve-less ROMs have
    no wash setting."""
    rom = scenario.rom(rom_id)
    curve = rom.wash_curve
    if curve is None:
        return []
    options: list = [d for d in grid if curve.min_density <= d <= curve.max_density]
    if not options:
        options = [curve.max_density]
    if curve.bypass_allowed:
        options.append(BYPASS)
    return options


def count_cut_combinations(scenario: Scenario, grid: list[float]) -> int:
    total = 1
    for rom in scenario.roms:
        if rom.wash_curve is None:
            continue
        total *= len(cut_point_options(scenario, rom.id, grid)) ** scenario.horizon_periods
    return total


def _space_size(summary: SpaceSummary, allow_shortfall: bool) -> int:
    if not allow_shortfall:
        return count_blend_space(summary)
    # A slack slot per composition stands in for unallocated lots.
    widened = SpaceSummary(
        [(n, k + 1) for n, k in summary.per_product],
        None if summary.caps is None else dict(summary.caps),
        None if summary.rom_ids is None else ["\x00unallocated"] + list(summary.rom_ids),
    )
    if widened.caps is not None:
        widened.caps["\x00unallocated"] = sum(n for n, _ in summary.per_product)
    return count_blend_space(widened)


def enumerate_plans(
    scenario: Scenario,
    cut_point_grid: list[float] | None = None,
    limit: int = 1_000_000,
    allow_shortfall: bool = False,
) -> Iterator[BlendPlan]:
    """Yield every structurally valid exact-target plan exactly once.

    The lot space matches `count_blend_space` of the scenario's summary
    (exact per-product-period lot budgets under total availability caps);
    cut-points range over the grid options of every washed ROM in every
    period. Refuses with the computed count when the space exceeds `limit`.

    With `allow_shortfall`, totals from zero up to each lot budget are
    enumerated as well; that widened stream is what optimizer validation
    compares against, since a searcher may profitably under-fill a blend.
    """
    grid = cut_point_grid or []
    summary = SpaceSummary.from_scenario(scenario)
    count = _space_size(summary, allow_shortfall) * count_cut_combinations(scenario, grid)
    if count > limit:
        raise SpaceTooLargeError(count, limit)

    cells = [
        (product.id, period)
        for product in scenario.products
        for period in range(scenario.horizon_periods)
    ]
    ns = [n for n, _ in summary.per_product]
    rom_ids = summary.rom_ids or []
    caps = dict(summary.caps or {})
    slots = len(rom_ids) + (1 if allow_shortfall else 0)

    cut_slots = [
        (rom.id, period)
        for rom in scenario.roms
        if rom.wash_curve is not None
        for period in range(scenario.horizon_periods)
    ]
    cut_choices = [cut_point_options(scenario, rom_id, grid) for rom_id, _ in cut_slots]

    def assign(index: int, remaining: dict[str, int], chosen: list[tuple[int, ...]]):
        if index == len(cells):
            yield list(chosen)
            return
        n = ns[index]
        for full in _compositions(n, slots):
            comp = full[1:] if allow_shortfall else full
            if any(comp[i] > remaining[rom_ids[i]] for i in range(len(rom_ids))):
                continue
            for i, rom_id in enumerate(rom_ids):
                remaining[rom_id] -= comp[i]
            chosen.append(comp)
            yield from assign(index + 1, remaining, chosen)
            chosen.pop()
            for i, rom_id in enumerate(rom_ids):
                remaining[rom_id] += comp[i]

    def cut_maps(index: int, current: dict):
        if index == len(cut_slots):
            yield dict(current)
            return
        slot = cut_slots[index]
        for option in cut_choices[index]:
            current[slot] = option
            yield from cut_maps(index + 1, current)
        current.pop(slot, None)

    for lot_choice in assign(0, dict(caps), []):
        allotments = []
        for (product_id, period), comp in zip(cells, lot_choice):
            for rom_id, lots in zip(rom_ids, comp):
                if lots:
                    allotments.append(Allotment(period, product_id, rom_id, lots))
        for cuts in cut_maps(0, {}):
            yield BlendPlan(list(allotments), cuts, [])


def oracle_optimum(
    scenario: Scenario,
    cut_point_grid: list[float] | None = None,
    limit: int = 1_000_000,
    objective: str = "npv",
    require_feasible: bool = True,
    allow_shortfall: bool = False,
) -> tuple[BlendPlan | None, EvaluationReport | None, float]:
    """Brute-force argmax over the enumerated space by full evaluation.

    With require_feasible, only plans whose reports carry no violations
    compete. Ties keep the first plan in enumeration order, so the result is
    deterministic. Returns (plan, report, objective); (None, None, -inf) when
    no plan qualifies.
    """
    best_plan, best_report, best_value = None, None, float("-inf")
    for plan in enumerate_plans(scenario, cut_point_grid, limit, allow_shortfall):
        report = evaluate_plan(scenario, plan)
        if require_feasible and report.violations:
            continue
        value = report.objective(objective)
        if value > best_value:
            best_plan, best_report, best_value = plan, report, value
    return best_plan, best_report, best_value
