"""User-guided optimization: planner directives, sessions with an incumbent
plan, and re-optimization that honors the planner's pins.

Directives are hard constraints, not preferences. Relative directives
(quality and tonnage deltas) compile against the incumbent at the moment
they are applied and stay frozen as absolute bounds from then on, so a
later run never silently re-tightens an earlier instruction. Among plans
within 0.1% of the best objective found, a guided run returns the one
closest to the incumbent by lot-assignment Hamming distance; a failed run
never touches the incumbent.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from .constraints import Bound, ConstraintSet
from .errors import DirectiveConflictError, DirectiveError
from .evaluate import EvaluationReport, evaluate_plan
from .optimizer import OptimizeResult, Strategy, optimize
from .plan import BlendPlan
from .types import Scenario

RELATIVE_TOLERANCE = 1e-3  # near-optimal band for the minimal-change pick
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class PinAllotment:
    period: int
    product_id: str
    rom_id: str
    lots: int


@dataclass(frozen=True)
class QualityDelta:
    product_id: str
    attribute: str
    delta: float  # absolute units of the attribute; negative lowers
    first_period: int | None = None
    last_period: int | None = None


@dataclass(frozen=True)
class TonnageDelta:
    product_id: str
    period: int
    delta_tonnes: float


@dataclass(frozen=True)
class ExcludeRom:
    rom_id: str
    product_id: str
    first_period: int | None = None
    last_period: int | None = None


@dataclass(frozen=True)
class ReserveRom:
    rom_id: str
    tonnes: float
    until_period: int


Directive = Union[PinAllotment, QualityDelta, TonnageDelta, ExcludeRom, ReserveRom]

_KINDS = {
    PinAllotment: "pin_allotment",
    QualityDelta: "quality_delta",
    TonnageDelta: "tonnage_delta",
    ExcludeRom: "exclude_rom",
    ReserveRom: "reserve_rom",
}


def directive_to_doc(directive: Directive) -> dict:
    doc = {"kind": _KINDS[type(directive)]}
    doc.update(directive.__dict__)
    return doc


def directive_from_doc(doc: dict) -> Directive:
    if not isinstance(doc, dict):
        raise DirectiveError("directive must be a mapping")
    kind = doc.get("kind")
    fields = {k: v for k, v in doc.items() if k != "kind"}
    for cls, name in _KINDS.items():
        if name == kind:
            try:
                return cls(**fields)
            except TypeError as exc:
                raise DirectiveError(f"bad {kind} directive: {exc}") from exc
    raise DirectiveError(f"unknown directive kind {kind!r}")


def describe_directive(directive: Directive) -> str:
    return f"{_KINDS[type(directive)]}({', '.join(f'{k}={v}' for k, v in sorted(directive.__dict__.items()))})"


def _period_range(
    directive, scenario: Scenario, default: list[int]
) -> list[int]:
    first = directive.first_period
    last = directive.last_period
    if first is None and last is None:
        return default
    lo = 0 if first is None else first
    hi = scenario.horizon_periods - 1 if last is None else last
    if not (0 <= lo <= hi < scenario.horizon_periods):
        raise DirectiveError(
            f"period range [{lo}, {hi}] outside horizon for {describe_directive(directive)}"
        )
    return list(range(lo, hi + 1))


def _validate(directive: Directive, scenario: Scenario) -> None:
    if isinstance(directive, (PinAllotment, ExcludeRom, ReserveRom)):
        if not scenario.has_rom(directive.rom_id):
            raise DirectiveError(f"unknown rom {directive.rom_id!r}")
    if isinstance(directive, (PinAllotment, QualityDelta, TonnageDelta, ExcludeRom)):
        if not scenario.has_product(directive.product_id):
            raise DirectiveError(f"unknown product {directive.product_id!r}")
    if isinstance(directive, PinAllotment):
        if directive.lots < 0:
            raise DirectiveError("pinned lots must be >= 0")
        if not 0 <= directive.period < scenario.horizon_periods:
            raise DirectiveError("pinned period outside horizon")
    if isinstance(directive, QualityDelta):
        if directive.attribute not in scenario.registry:
            raise DirectiveError(f"unknown attribute {directive.attribute!r}")
        if not math.isfinite(directive.delta) or directive.delta == 0:
            raise DirectiveError("quality delta must be finite and nonzero")
    if isinstance(directive, TonnageDelta):
        if not 0 <= directive.period < scenario.horizon_periods:
            raise DirectiveError("tonnage delta period outside horizon")
        if not math.isfinite(directive.delta_tonnes) or directive.delta_tonnes == 0:
            raise DirectiveError("tonnage delta must be finite and nonzero")
    if isinstance(directive, ReserveRom):
        if directive.tonnes <= 0:
            raise DirectiveError("reserved tonnes must be positive")
        if not 0 <= directive.until_period < scenario.horizon_periods:
            raise DirectiveError("reserve period outside horizon")


class _Fragment(NamedTuple):
    directive: Directive
    constraints: ConstraintSet


def _compile_one(
    directive: Directive,
    scenario: Scenario,
    incumbent: BlendPlan,
    report: EvaluationReport,
) -> ConstraintSet:
    _validate(directive, scenario)
    cons = ConstraintSet.empty()
    if isinstance(directive, PinAllotment):
        cons.pins[(directive.period, directive.product_id, directive.rom_id)] = directive.lots
    elif isinstance(directive, ExcludeRom):
        for period in _period_range(directive, scenario, list(range(scenario.horizon_periods))):
            cons.excludes.add((period, directive.product_id, directive.rom_id))
    elif isinstance(directive, ReserveRom):
        cons.reservations.setdefault(directive.rom_id, []).append(
            (directive.tonnes, directive.until_period)
        )
    elif isinstance(directive, QualityDelta):
        default = [
            row.period for row in report.per_product_period if row.product_id == directive.product_id
        ]
        periods = _period_range(directive, scenario, default)
        if not periods:
            raise DirectiveError(
                f"no incumbent blend of {directive.product_id!r} to take the delta from"
            )
        for period in periods:
            row = report.row(directive.product_id, period)
            if row is None or directive.attribute not in row.blended_quality:
                raise DirectiveError(
                    f"no incumbent {directive.attribute} value for "
                    f"{directive.product_id!r} in period {period}"
                )
            base = row.blended_quality[directive.attribute]
            target = base + directive.delta
            bound = Bound(upper=target) if directive.delta < 0 else Bound(lower=target)
            cons.quality_bounds[(directive.product_id, period, directive.attribute)] = bound
    elif isinstance(directive, TonnageDelta):
        row = report.row(directive.product_id, directive.period)
        sold = row.tonnes if row is not None and row.in_spec else 0.0
        target = sold + directive.delta_tonnes
        bound = Bound(lower=target) if directive.delta_tonnes > 0 else Bound(upper=target)
        cons.tonnage_bounds[(directive.product_id, directive.period)] = bound
    return cons


def _merge_fragments(fragments: list[_Fragment], scenario: Scenario) -> ConstraintSet:
    merged = ConstraintSet.empty()
    pin_owner: dict = {}
    quality_owner: dict = {}
    tonnage_owner: dict = {}
    for directive, cons in fragments:
        for cell, lots in cons.pins.items():
            if cell in merged.pins and merged.pins[cell] != lots:
                raise DirectiveConflictError(
                    pin_owner[cell],
                    directive,
                    f"two pins give different lots for {cell}",
                )
            if cell in merged.excludes and lots > 0:
                raise DirectiveConflictError(
                    pin_owner.get(cell, directive),
                    directive,
                    f"pin places lots on an excluded cell {cell}",
                )
            merged.pins[cell] = lots
            pin_owner[cell] = directive
        for cell in cons.excludes:
            if merged.pins.get(cell, 0) > 0:
                raise DirectiveConflictError(
                    pin_owner[cell], directive, f"exclusion contradicts a pin on {cell}"
                )
            merged.excludes.add(cell)
            pin_owner.setdefault(cell, directive)
        for key, bound in cons.quality_bounds.items():
            combined = merged.quality_bounds.get(key, Bound()).merged(bound)
            if combined.contradictory():
                raise DirectiveConflictError(
                    quality_owner[key],
                    directive,
                    f"quality bounds on {key} contradict (lower > upper)",
                )
            merged.quality_bounds[key] = combined
            quality_owner.setdefault(key, directive)
        for key, bound in cons.tonnage_bounds.items():
            combined = merged.tonnage_bounds.get(key, Bound()).merged(bound)
            if combined.contradictory():
                raise DirectiveConflictError(
                    tonnage_owner[key],
                    directive,
                    f"tonnage bounds on {key} contradict (lower > upper)",
                )
            merged.tonnage_bounds[key] = combined
            tonnage_owner.setdefault(key, directive)
        for rom_id, reservations in cons.reservations.items():
            merged.reservations.setdefault(rom_id, []).extend(reservations)
    # Pins must survive the availability a reservation leaves behind.
    lot = scenario.logistics.lot_size_tonnes
    for directive, cons in fragments:
        for rom_id, reservations in cons.reservations.items():
            for tonnes, until in reservations:
                pinned = sum(
                    lots * lot
                    for (period, _, pin_rom), lots in merged.pins.items()
                    if pin_rom == rom_id and period <= until
                )
                available = sum(scenario.rom(rom_id).available_tonnes[: until + 1])
                if pinned > available - tonnes + BOUND_SLACK:
                    raise DirectiveConflictError(
                        pin_owner.get(
                            next(
                                (
                                    cell
                                    for cell in merged.pins
                                    if cell[2] == rom_id and cell[0] <= until
                                ),
                                None,
                            ),
                            directive,
                        ),
                        directive,
                        f"reservation of {rom_id!r} leaves too little for its pins",
                    )
    return merged


def compile_directives(
    directives: list[Directive],
    scenario: Scenario,
    incumbent: BlendPlan,
    report: EvaluationReport | None = None,
) -> ConstraintSet:
    """Compile directives into one hard constraint set, rejecting
    contradictory pairs with both offenders named."""
    if report is None:
        report = evaluate_plan(scenario, incumbent)
    fragments = [
        _Fragment(d, _compile_one(d, scenario, incumbent, report)) for d in directives
    ]
    return _merge_fragments(fragments, scenario)


class HistoryEntry(NamedTuple):
    directives: tuple[Directive, ...]
    result: OptimizeResult


@dataclass
class Session:
    """One planner's interactive optimization thread: a scenario, a frozen
    strategy, the incumbent plan, and an append-only run history."""

    id: str
    scenario: Scenario
    strategy: Strategy
    incumbent_plan: BlendPlan
    incumbent_result: OptimizeResult
    directive_stack: list[_Fragment] = field(default_factory=list)
    history: list[HistoryEntry] = field(default_factory=list)

    @property
    def incumbent_report(self) -> EvaluationReport:
        return self.incumbent_result.report

    def stacked_directives(self) -> list[Directive]:
        return [fragment.directive for fragment in self.directive_stack]


def open_session(
    scenario: Scenario, strategy: Strategy, session_id: str | None = None
) -> Session:
    """Optimize once to seed the incumbent and start an empty directive
    stack. Two sessions with the same seed get identical incumbents."""
    result = optimize(scenario, strategy)
    session = Session(
        id=session_id or f"s-{uuid.uuid4().hex[:12]}",
        scenario=scenario,
        strategy=strategy,
        incumbent_plan=result.plan,
        incumbent_result=result,
    )
    session.history.append(HistoryEntry((), result))
    return session


def session_history(session: Session) -> tuple[HistoryEntry, ...]:
    """Append-only view of the session's runs, oldest first."""
    return tuple(session.history)


@dataclass
class GuidedOutcome:
    success: bool
    result: OptimizeResult | None
    binding_constraint: str | None
    objective_delta: float | None

    @property
    def plan(self) -> BlendPlan | None:
        return None if self.result is None else self.result.plan


class _ChampionPool:
    """Tracks, over all measured feasible plans, the one nearest the
    incumbent among those within the relative tolerance of the best
    objective."""

    def __init__(self, incumbent: BlendPlan):
        self.incumbent = incumbent
        self.best_objective = float("-inf")
        self.pool: dict[tuple, tuple[float, int, BlendPlan]] = {}

    def threshold(self) -> float:
        return self.best_objective - RELATIVE_TOLERANCE * abs(self.best_objective)

    def offer(self, plan: BlendPlan, violation: float, objective: float) -> None:
        if violation > BOUND_SLACK:
            return
        if objective > self.best_objective:
            self.best_objective = objective
            floor = self.threshold()
            self.pool = {k: v for k, v in self.pool.items() if v[0] >= floor}
        if objective >= self.threshold():
            key = plan.key()
            if key not in self.pool:
                self.pool[key] = (objective, plan.hamming_distance(self.incumbent), plan)

    def champion(self) -> tuple[BlendPlan, float] | None:
        floor = self.threshold()
        candidates = [
            (distance, -objective, key)
            for key, (objective, distance, _) in self.pool.items()
            if objective >= floor
        ]
        if not candidates:
            return None
        candidates.sort()
        _, neg_obj, key = candidates[0]
        return self.pool[key][2], -neg_obj


def _impossible_bound(scenario: Scenario, constraints: ConstraintSet) -> str | None:
    """Detect quality/tonnage bounds no blend can meet, by blending bounds:
    a blend's attribute lies between the attribute's min and max over the
    (washable) inputs, and sold tonnes cannot exceed the lot budget."""
    for (product_id, period, attr), bound in sorted(constraints.quality_bounds.items()):
        lows, highs = [], []
        for rom in scenario.roms:
            quality = dict(rom.quality)
            value = quality.get(attr)
            if value is None:
                continue
            lo = hi = value
            if attr == "ash" and rom.wash_curve is not None:
                curve_lo = rom.wash_curve.knots[0].product_ash_percent
                curve_hi = rom.wash_curve.knots[-1].product_ash_percent
                lo = min(lo, curve_lo) if rom.wash_curve.bypass_allowed else curve_lo
                hi = max(hi, curve_hi) if rom.wash_curve.bypass_allowed else curve_hi
            lows.append(lo)
            highs.append(hi)
        if not lows:
            continue
        if bound.upper is not None and bound.upper < min(lows) - BOUND_SLACK:
            return f"quality-bound:{product_id}:{attr}:{period}"
        if bound.lower is not None and bound.lower > max(highs) + BOUND_SLACK:
            return f"quality-bound:{product_id}:{attr}:{period}"
    lot = scenario.logistics.lot_size_tonnes
    for (product_id, period), bound in sorted(constraints.tonnage_bounds.items()):
        ceiling = scenario.target_lots(product_id, period) * lot
        if bound.lower is not None and bound.lower > ceiling + BOUND_SLACK:
            return f"tonnage-bound:{product_id}:{period}"
        if bound.upper is not None and bound.upper < -BOUND_SLACK:
            return f"tonnage-bound:{product_id}:{period}"
    return None


def _guided_run(session: Session, directives: list[Directive]) -> tuple[
    GuidedOutcome, list[_Fragment], ConstraintSet
]:
    scenario = session.scenario
    report = session.incumbent_report
    new_fragments = [
        _Fragment(d, _compile_one(d, scenario, session.incumbent_plan, report))
        for d in directives
    ]
    constraints = _merge_fragments(session.directive_stack + new_fragments, scenario)

    impossible = _impossible_bound(scenario, constraints)
    if impossible is not None:
        return (
            GuidedOutcome(False, None, impossible, None),
            new_fragments,
            constraints,
        )

    pool = _ChampionPool(session.incumbent_plan)
    result = optimize(
        scenario,
        session.strategy,
        constraints,
        seed_plans=[session.incumbent_plan],
        on_candidate=pool.offer,
    )
    pick = pool.champion()
    if pick is None:
        binding = result.report and constraints.violated(scenario, result.plan, result.report)
        name = binding[0] if binding else "no feasible plan under the directives"
        return GuidedOutcome(False, None, name, None), new_fragments, constraints

    plan, _ = pick
    chosen_report = evaluate_plan(scenario, plan)
    chosen = OptimizeResult(
        plan=plan,
        report=chosen_report,
        trace=result.trace,
        feasible=True,
        objective_value=chosen_report.objective(result.objective_kind),
        objective_kind=result.objective_kind,
        evaluations=result.evaluations,
    )
    delta = chosen.objective_value - session.incumbent_result.objective_value
    return GuidedOutcome(True, chosen, None, delta), new_fragments, constraints


def guided_preview(session: Session, directives: list[Directive]) -> GuidedOutcome:
    """What-if: the outcome a guided run would produce, with zero mutation."""
    outcome, _, _ = _guided_run(session, directives)
    return outcome


def guided_reoptimize(session: Session, directives: list[Directive]) -> GuidedOutcome:
    """Re-optimize under the session's stacked directives plus new ones.

    On success the incumbent is replaced, the new directives join the stack
    (frozen as the absolute bounds they compiled to), and the run is appended
    to history. On failure the session is untouched and the outcome names the
    binding constraint.
    """
    outcome, new_fragments, _ = _guided_run(session, directives)
    if outcome.success and outcome.result is not None:
        session.incumbent_plan = outcome.result.plan
        session.incumbent_result = outcome.result
        session.directive_stack.extend(new_fragments)
        session.history.append(HistoryEntry(tuple(directives), outcome.result))
    return outcome


def replay_history(
    scenario: Scenario, strategy: Strategy, history: tuple[HistoryEntry, ...]
) -> Session:
    """Rebuild a session by replaying its directive sets in order; seeded
    determinism makes the final incumbent reproducible."""
    session = open_session(scenario, strategy)
    for entry in history[1:]:
        guided_reoptimize(session, list(entry.directives))
    return session
