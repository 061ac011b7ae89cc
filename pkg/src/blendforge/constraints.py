"""Hard constraint sets compiled from planner directives.

A ConstraintSet is what the optimizer actually honors: exact pinned
allotments, forbidden cells, availability reservations, and bounds on a
product-period's blended quality or sold tonnes. Pins, excludes, and
reservations are enforced structurally during search; quality and tonnage
bounds are checked against evaluation reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .evaluate import EvaluationReport
from .plan import BlendPlan, Cell
from .types import Scenario


@dataclass(eq=True)
class Bound:
    lower: float | None = None
    upper: float | None = None

    def merged(self, other: "Bound") -> "Bound":
        lower = self.lower if other.lower is None else (
            other.lower if self.lower is None else max(self.lower, other.lower)
        )
        upper = self.upper if other.upper is None else (
            other.upper if self.upper is None else min(self.upper, other.upper)
        )
        return Bound(lower, upper)

    def contradictory(self) -> bool:
        return self.lower is not None and self.upper is not None and self.lower > self.upper

    def excess(self, value: float) -> float:
        """How far the value falls outside the bound (0 when satisfied)."""
        over = 0.0
        if self.upper is not None and value > self.upper:
            over += value - self.upper
        if self.lower is not None and value < self.lower:
            over += self.lower - value
        return over


@dataclass(eq=True)
class ConstraintSet:
    """Hard constraints for one optimization run."""

    pins: dict[Cell, int] = field(default_factory=dict)
    excludes: set[Cell] = field(default_factory=set)
    # (product_id, period, attribute) -> bound on the blended value
    quality_bounds: dict[tuple[str, int, str], Bound] = field(default_factory=dict)
    # (product_id, period) -> bound on sold tonnes
    tonnage_bounds: dict[tuple[str, int], Bound] = field(default_factory=dict)
    # rom_id -> list of (tonnes, until_period): availability withheld through
    # the named period
    reservations: dict[str, list[tuple[float, int]]] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "ConstraintSet":
        return cls()

    def is_empty(self) -> bool:
        return not (
            self.pins
            or self.excludes
            or self.quality_bounds
            or self.tonnage_bounds
            or self.reservations
        )

    def effective_inflows(self, scenario: Scenario, rom_id: str) -> list[float]:
        """Per-period availability inflows for a ROM after reservations.

        Reserving R tonnes through period u lowers cumulative availability by
        R for every period <= u and releases it afterwards.
        """
        inflows = list(scenario.rom(rom_id).available_tonnes)
        for tonnes, until in self.reservations.get(rom_id, []):
            # Rebuild inflows from the reserved cumulative profile.
            cum = 0.0
            running = 0.0
            rebuilt = []
            for period, inflow in enumerate(inflows):
                cum += inflow
                reserve = tonnes if period <= until else 0.0
                target = max(0.0, cum - reserve)
                rebuilt.append(target - running)
                running = target
            inflows = rebuilt
        return inflows

    def apply_pins(self, plan: BlendPlan) -> BlendPlan:
        """Force every pinned cell to its exact lot count."""
        if not self.pins:
            return plan
        cells = plan.cells()
        cells.update(self.pins)
        return BlendPlan.from_cells(cells, plan.cut_points, plan.rehandles)

    def cell_locked(self, cell: Cell) -> bool:
        return cell in self.pins or cell in self.excludes

    def violated(
        self, scenario: Scenario, plan: BlendPlan, report: EvaluationReport
    ) -> list[str]:
        """Names of constraints the plan fails, in a stable order."""
        failures: list[str] = []
        cells = plan.cells()
        for cell, lots in sorted(self.pins.items()):
            if cells.get(cell, 0) != lots:
                period, product_id, rom_id = cell
                failures.append(f"pin:{product_id}:{rom_id}:{period}")
        for cell in sorted(self.excludes):
            if cells.get(cell, 0):
                period, product_id, rom_id = cell
                failures.append(f"exclude:{product_id}:{rom_id}:{period}")
        for (product_id, period, attr), bound in sorted(self.quality_bounds.items()):
            row = report.row(product_id, period)
            value = None if row is None else row.blended_quality.get(attr)
            if value is None or bound.excess(value) > 1e-9:
                failures.append(f"quality-bound:{product_id}:{attr}:{period}")
        for (product_id, period), bound in sorted(self.tonnage_bounds.items()):
            row = report.row(product_id, period)
            sold = row.tonnes if row is not None and row.in_spec else 0.0
            if bound.excess(sold) > 1e-9:
                failures.append(f"tonnage-bound:{product_id}:{period}")
        for rom_id in sorted(self.reservations):
            inflows = self.effective_inflows(scenario, rom_id)
            balance = 0.0
            used = _pit_usage_by_period(scenario, plan, rom_id)
            for period in range(scenario.horizon_periods):
                balance += inflows[period] - used[period]
                if balance < -1e-9:
                    failures.append(f"reserve:{rom_id}:{period}")
                    break
        return failures

    def soft_violation(self, report: EvaluationReport) -> float:
        """Total magnitude by which quality/tonnage bounds are missed.

        This is the quantity the search drives to zero before it optimizes
        the objective; pins, excludes, and reservations are structural and
        kept satisfied by construction.
        """
        total = 0.0
        for (product_id, period, attr), bound in self.quality_bounds.items():
            row = report.row(product_id, period)
            if row is None:
                # No blend at all: treat as missing the bound entirely.
                total += 1.0 + sum(
                    abs(b) for b in (bound.lower, bound.upper) if b is not None
                )
                continue
            value = row.blended_quality.get(attr)
            if value is None:
                total += 1.0
            else:
                total += bound.excess(value)
        for (product_id, period), bound in self.tonnage_bounds.items():
            row = report.row(product_id, period)
            sold = row.tonnes if row is not None and row.in_spec else 0.0
            total += bound.excess(sold)
        return total


def _pit_usage_by_period(scenario: Scenario, plan: BlendPlan, rom_id: str) -> list[float]:
    lot = scenario.logistics.lot_size_tonnes
    usage = [0.0] * scenario.horizon_periods
    for a in plan.allotments:
        if a.rom_id == rom_id:
            usage[a.period] += a.lots * lot
    for r in plan.rehandles:
        if r.rom_id == rom_id:
            usage[r.period] += r.tonnes
    return usage
