"""Scenario/plan document formats, validation, and the append-only run log.

Documents are canonical JSON: UTF-8, sorted keys, two-space indent, one
trailing newline. Field names carry units (tonnes, percent, hours) so files
read unambiguously. Loading is strict: unknown fields are rejected and every
violated invariant is reported with a distinct error code and the offending
field path.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time

from .errors import DocumentError, RunLogError, ValidationIssue
from .evaluate import EvaluationReport
from .plan import BYPASS, Allotment, BlendPlan, Rehandle
from .types import (
    ATTRIBUTE_UNITS,
    Adjustment,
    AshYieldCurve,
    Attribute,
    AttributeRegistry,
    CurveKnot,
    DegradationModel,
    LogisticsConstraints,
    MarketModel,
    ProductSpec,
    QualityRange,
    RomParcel,
    Scenario,
)

SCHEMA_VERSION = 1

SCENARIO_EXTENSION = ".scenario"
PLAN_EXTENSION = ".plan"
RUNLOG_EXTENSION = ".runlog"


def canonical_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode(
        "utf-8"
    )


def scenario_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Check:
    """Issue collector with path-aware helpers."""

    def __init__(self):
        self.issues: list[ValidationIssue] = []

    def add(self, code: str, path: str, message: str):
        self.issues.append(ValidationIssue(code, path, message))

    def mapping(self, value, path: str, required: set[str], optional: set[str] = frozenset()):
        if not isinstance(value, dict):
            self.add("type.mapping", path, "expected a mapping")
            return None
        for key in value:
            if key not in required and key not in optional:
                self.add("unknown-field", f"{path}.{key}", "unknown field")
        for key in sorted(required):
            if key not in value:
                self.add("missing-field", f"{path}.{key}", "required field missing")
        return value

    def number(self, value, path: str) -> float | None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add("type.number", path, "expected a number")
            return None
        if not math.isfinite(value):
            self.add("type.number", path, "number must be finite")
            return None
        return float(value)

    def integer(self, value, path: str) -> int | None:
        if isinstance(value, bool) or not isinstance(value, int):
            self.add("type.integer", path, "expected an integer")
            return None
        return value

    def string(self, value, path: str) -> str | None:
        if not isinstance(value, str):
            self.add("type.string", path, "expected a string")
            return None
        return value

    def boolean(self, value, path: str) -> bool | None:
        if not isinstance(value, bool):
            self.add("type.boolean", path, "expected a boolean")
            return None
        return value

    def series(self, value, path: str, horizon: int) -> list[float] | None:
        """A per-period series; scalars broadcast across the horizon."""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [float(value)] * horizon
        if not isinstance(value, list):
            self.add("type.series", path, "expected a number or list of numbers")
            return None
        out = []
        for i, item in enumerate(value):
            num = self.number(item, f"{path}[{i}]")
            out.append(0.0 if num is None else num)
        if len(out) != horizon:
            self.add(
                "series.length", path, f"expected {horizon} per-period entries, got {len(out)}"
            )
            return None
        return out


def _parse_json(data: bytes | str) -> dict:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError([ValidationIssue("syntax", "$", str(exc))]) from exc
    if not isinstance(doc, dict):
        raise DocumentError([ValidationIssue("type.mapping", "$", "document must be a mapping")])
    return doc


def _check_version(doc: dict, chk: _Check):
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        chk.add(
            "schema.version",
            "$.schema_version",
            f"unsupported schema version {version!r}; this build reads {SCHEMA_VERSION}",
        )


def _load_registry(raw, chk: _Check) -> AttributeRegistry | None:
    if not isinstance(raw, list):
        chk.add("type.list", "$.scenario.attributes", "expected a list")
        return None
    entries = []
    seen = set()
    for i, item in enumerate(raw):
        path = f"$.scenario.attributes[{i}]"
        m = chk.mapping(item, path, {"code", "unit"}, {"lower_is_better"})
        if m is None:
            continue
        code = chk.string(m.get("code"), f"{path}.code")
        unit = chk.string(m.get("unit"), f"{path}.unit")
        lower = m.get("lower_is_better", True)
        chk.boolean(lower, f"{path}.lower_is_better")
        if code is not None and not code:
            chk.add("attribute.code.empty", f"{path}.code", "attribute code must be nonempty")
        if code in seen:
            chk.add("attribute.code.duplicate", f"{path}.code", f"duplicate code {code!r}")
        seen.add(code)
        if unit is not None and unit not in ATTRIBUTE_UNITS:
            chk.add(
                "attribute.unit.unknown",
                f"{path}.unit",
                f"unit must be one of {', '.join(ATTRIBUTE_UNITS)}",
            )
            unit = None
        if code and unit:
            entries.append(Attribute(code, unit, bool(lower)))
    return AttributeRegistry(entries) if not chk.issues else None


def _load_quality(raw, path: str, registry: AttributeRegistry | None, chk: _Check) -> dict:
    if not isinstance(raw, dict):
        chk.add("type.mapping", path, "expected attribute -> value mapping")
        return {}
    quality = {}
    for code in sorted(raw):
        value = chk.number(raw[code], f"{path}.{code}")
        if registry is not None and code not in registry:
            chk.add("quality.unknown-attribute", f"{path}.{code}", f"{code!r} not in registry")
            continue
        if value is None:
            continue
        if registry is not None and registry.get(code).unit == "percent" and not 0 <= value <= 100:
            chk.add("quality.percent-range", f"{path}.{code}", "percent values lie in [0, 100]")
            continue
        quality[code] = value
    return quality


def _load_curve(raw, path: str, chk: _Check) -> AshYieldCurve | None:
    m = chk.mapping(raw, path, {"knots"}, {"bypass_allowed"})
    if m is None:
        return None
    bypass = m.get("bypass_allowed", False)
    chk.boolean(bypass, f"{path}.bypass_allowed")
    raw_knots = m.get("knots")
    if not isinstance(raw_knots, list):
        chk.add("type.list", f"{path}.knots", "expected a list of knots")
        return None
    knots = []
    for i, item in enumerate(raw_knots):
        kpath = f"{path}.knots[{i}]"
        km = chk.mapping(
            item, kpath, {"cut_point_density", "product_ash_percent", "yield_fraction"}
        )
        if km is None:
            continue
        density = chk.number(km.get("cut_point_density"), f"{kpath}.cut_point_density")
        ash = chk.number(km.get("product_ash_percent"), f"{kpath}.product_ash_percent")
        yf = chk.number(km.get("yield_fraction"), f"{kpath}.yield_fraction")
        if None in (density, ash, yf):
            continue
        if not 0.0 < yf <= 1.0:
            chk.add("curve.yield.range", f"{kpath}.yield_fraction", "yield must lie in (0, 1]")
            continue
        knots.append(CurveKnot(density, ash, yf))
    if len(knots) < 2:
        chk.add("curve.knots.count", f"{path}.knots", "a curve needs at least 2 knots")
        return None
    knots.sort(key=lambda k: k.cut_point_density)
    for i, (a, b) in enumerate(zip(knots, knots[1:])):
        if not a.cut_point_density < b.cut_point_density:
            chk.add(
                "curve.density.order",
                f"{path}.knots[{i + 1}].cut_point_density",
                "densities must strictly increase",
            )
            return None
        if b.product_ash_percent < a.product_ash_percent:
            chk.add(
                "curve.ash.monotonic",
                f"{path}.knots[{i + 1}].product_ash_percent",
                "product ash must be nondecreasing in density",
            )
            return None
        if b.yield_fraction < a.yield_fraction:
            chk.add(
                "curve.yield.monotonic",
                f"{path}.knots[{i + 1}].yield_fraction",
                "yield must be nondecreasing in density",
            )
            return None
    return AshYieldCurve(knots, bool(bypass))


def _load_degradation(raw, path: str, registry, chk: _Check) -> DegradationModel:
    m = chk.mapping(raw, path, set(), {"rate_per_day", "cap"})
    if m is None:
        return DegradationModel()
    rates, caps = {}, {}
    for field, store in (("rate_per_day", rates), ("cap", caps)):
        sub = m.get(field, {})
        if not isinstance(sub, dict):
            chk.add("type.mapping", f"{path}.{field}", "expected attribute -> value mapping")
            continue
        for code in sorted(sub):
            value = chk.number(sub[code], f"{path}.{field}.{code}")
            if registry is not None and code not in registry:
                chk.add(
                    "degradation.unknown-attribute",
                    f"{path}.{field}.{code}",
                    f"{code!r} not in registry",
                )
                continue
            if value is None:
                continue
            if field == "cap" and value < 0:
                chk.add("degradation.cap.negative", f"{path}.{field}.{code}", "caps are >= 0")
                continue
            store[code] = value
    return DegradationModel(rates, caps)


def _load_rom(raw, index: int, horizon: int, registry, chk: _Check) -> RomParcel | None:
    path = f"$.scenario.roms[{index}]"
    m = chk.mapping(
        raw,
        path,
        {"id", "available_tonnes", "quality"},
        {
            "pit",
            "excavation_day",
            "degradation",
            "wash_curve",
            "haul_hours_per_tonne",
            "staging_haul_hours_per_tonne",
        },
    )
    if m is None:
        return None
    rom_id = chk.string(m.get("id"), f"{path}.id")
    pit = m.get("pit", "")
    chk.string(pit, f"{path}.pit")
    excavation = m.get("excavation_day", 0)
    chk.integer(excavation, f"{path}.excavation_day")
    available = chk.series(m.get("available_tonnes"), f"{path}.available_tonnes", horizon)
    if available is not None:
        for i, t in enumerate(available):
            if t < 0:
                chk.add(
                    "rom.available.negative", f"{path}.available_tonnes[{i}]", "tonnes are >= 0"
                )
    quality = _load_quality(m.get("quality"), f"{path}.quality", registry, chk)
    if registry is not None and isinstance(m.get("quality"), dict):
        for code in registry.codes():
            if code not in m["quality"]:
                chk.add(
                    "quality.missing-attribute",
                    f"{path}.quality.{code}",
                    f"rom must carry a value for registry attribute {code!r}",
                )
    curve = None
    if m.get("wash_curve") is not None:
        curve = _load_curve(m["wash_curve"], f"{path}.wash_curve", chk)
        if curve is not None and registry is not None and "ash" not in registry:
            chk.add(
                "registry.ash.required",
                f"{path}.wash_curve",
                "registry must define 'ash' when any wash curve exists",
            )
    degradation = _load_degradation(m.get("degradation", {}), f"{path}.degradation", registry, chk)
    haul = chk.number(m.get("haul_hours_per_tonne", 0.0), f"{path}.haul_hours_per_tonne")
    staging = chk.number(
        m.get("staging_haul_hours_per_tonne", m.get("haul_hours_per_tonne", 0.0)),
        f"{path}.staging_haul_hours_per_tonne",
    )
    if haul is not None and haul < 0:
        chk.add("rom.haul.negative", f"{path}.haul_hours_per_tonne", "haul hours are >= 0")
    if haul is not None and staging is not None and not 0 <= staging <= haul:
        chk.add(
            "rom.staging-haul.range",
            f"{path}.staging_haul_hours_per_tonne",
            "staging haul hours lie in [0, haul_hours_per_tonne]",
        )
    if chk.issues or rom_id is None or available is None:
        return None
    return RomParcel(
        id=rom_id,
        pit=str(pit),
        excavation_day=int(excavation) if isinstance(excavation, int) else 0,
        available_tonnes=available,
        quality=quality,
        degradation=degradation,
        wash_curve=curve,
        haul_hours_per_tonne=haul or 0.0,
        staging_haul_hours_per_tonne=staging or 0.0,
    )


def _load_product(raw, index: int, horizon: int, registry, chk: _Check) -> ProductSpec | None:
    path = f"$.scenario.products[{index}]"
    m = chk.mapping(
        raw,
        path,
        {"id", "quality_range", "base_price_per_tonne", "tonnage_target_tonnes"},
        {"contract_min_tonnes", "adjustments"},
    )
    if m is None:
        return None
    product_id = chk.string(m.get("id"), f"{path}.id")
    ranges = {}
    raw_ranges = m.get("quality_range")
    if not isinstance(raw_ranges, dict):
        chk.add("type.mapping", f"{path}.quality_range", "expected attribute -> range mapping")
    else:
        for code in sorted(raw_ranges):
            rpath = f"{path}.quality_range.{code}"
            rm = chk.mapping(raw_ranges[code], rpath, {"min", "max"})
            if registry is not None and code not in registry:
                chk.add("quality.unknown-attribute", rpath, f"{code!r} not in registry")
                continue
            if rm is None:
                continue
            lo = chk.number(rm.get("min"), f"{rpath}.min")
            hi = chk.number(rm.get("max"), f"{rpath}.max")
            if lo is None or hi is None:
                continue
            if lo > hi:
                chk.add("range.min-max", rpath, "min must be <= max")
                continue
            ranges[code] = QualityRange(lo, hi)
    adjustments = {}
    raw_adj = m.get("adjustments", {})
    if not isinstance(raw_adj, dict):
        chk.add("type.mapping", f"{path}.adjustments", "expected attribute -> schedule mapping")
    else:
        for code in sorted(raw_adj):
            apath = f"{path}.adjustments.{code}"
            am = chk.mapping(raw_adj[code], apath, {"target"}, {"rate_below", "rate_above"})
            if registry is not None and code not in registry:
                chk.add("quality.unknown-attribute", apath, f"{code!r} not in registry")
                continue
            if am is None:
                continue
            target = chk.number(am.get("target"), f"{apath}.target")
            below = chk.number(am.get("rate_below", 0.0), f"{apath}.rate_below")
            above = chk.number(am.get("rate_above", 0.0), f"{apath}.rate_above")
            if target is None:
                continue
            rng = ranges.get(code)
            if rng is not None and not rng.contains(target):
                chk.add(
                    "adjustment.target.outside-range",
                    f"{apath}.target",
                    "target must lie inside the product's quality range",
                )
                continue
            adjustments[code] = Adjustment(target, below or 0.0, above or 0.0)
    price = chk.series(m.get("base_price_per_tonne"), f"{path}.base_price_per_tonne", horizon)
    target = chk.series(
        m.get("tonnage_target_tonnes"), f"{path}.tonnage_target_tonnes", horizon
    )
    contract = chk.series(
        m.get("contract_min_tonnes", 0.0), f"{path}.contract_min_tonnes", horizon
    )
    for name, code, series in (
        ("base_price_per_tonne", "product.price.negative", price),
        ("tonnage_target_tonnes", "product.target.negative", target),
        ("contract_min_tonnes", "product.contract.negative", contract),
    ):
        if series is None:
            continue
        for i, value in enumerate(series):
            if value < 0:
                chk.add(code, f"{path}.{name}[{i}]", "value must be >= 0")
    if target is not None and contract is not None:
        for i in range(horizon):
            if contract[i] > target[i]:
                chk.add(
                    "product.contract.exceeds-target",
                    f"{path}.contract_min_tonnes[{i}]",
                    "contract tonnes exceed the tonnage target",
                )
    if chk.issues or product_id is None or price is None or target is None or contract is None:
        return None
    return ProductSpec(
        id=product_id,
        quality_range=ranges,
        base_price_per_tonne=price,
        tonnage_target_tonnes=target,
        contract_min_tonnes=contract,
        adjustments=adjustments,
    )


def _load_logistics(raw, horizon: int, chk: _Check) -> LogisticsConstraints:
    path = "$.scenario.logistics"
    m = chk.mapping(
        raw,
        path,
        set(),
        {
            "lot_size_tonnes",
            "min_lots_per_used_rom",
            "max_rom_types_per_blend",
            "haul_fleet_hours",
            "wash_capacity_tonnes",
            "wash_fixed_cost_per_period",
            "wash_variable_cost_per_tonne",
            "rehandle_cost_per_tonne",
            "rehandle_loss_fraction",
            "haul_cost_per_hour",
        },
    )
    if m is None:
        return LogisticsConstraints()
    lot = chk.number(m.get("lot_size_tonnes", 1000.0), f"{path}.lot_size_tonnes")
    if lot is not None and lot <= 0:
        chk.add("logistics.lot-size.positive", f"{path}.lot_size_tonnes", "lot size is positive")
        lot = 1000.0
    min_lots = m.get("min_lots_per_used_rom", 1)
    if chk.integer(min_lots, f"{path}.min_lots_per_used_rom") is not None and min_lots < 1:
        chk.add(
            "logistics.min-lots.positive",
            f"{path}.min_lots_per_used_rom",
            "min lots per used rom is a positive integer",
        )
        min_lots = 1
    max_types = m.get("max_rom_types_per_blend")
    if max_types is not None:
        if chk.integer(max_types, f"{path}.max_rom_types_per_blend") is not None and max_types < 1:
            chk.add(
                "logistics.max-rom-types.positive",
                f"{path}.max_rom_types_per_blend",
                "max rom types per blend is a positive integer",
            )
            max_types = None
    haul_hours = None
    if m.get("haul_fleet_hours") is not None:
        haul_hours = chk.series(m["haul_fleet_hours"], f"{path}.haul_fleet_hours", horizon)
    wash_cap = None
    if m.get("wash_capacity_tonnes") is not None:
        wash_cap = chk.series(m["wash_capacity_tonnes"], f"{path}.wash_capacity_tonnes", horizon)
    loss = chk.number(m.get("rehandle_loss_fraction", 0.0), f"{path}.rehandle_loss_fraction")
    if loss is not None and not 0 <= loss < 1:
        chk.add(
            "logistics.rehandle-loss.range",
            f"{path}.rehandle_loss_fraction",
            "loss fraction lies in [0, 1)",
        )
        loss = 0.0
    wash_fixed = chk.number(
        m.get("wash_fixed_cost_per_period", 0.0), f"{path}.wash_fixed_cost_per_period"
    )
    wash_var = chk.number(
        m.get("wash_variable_cost_per_tonne", 0.0), f"{path}.wash_variable_cost_per_tonne"
    )
    rehandle = chk.number(
        m.get("rehandle_cost_per_tonne", 0.0), f"{path}.rehandle_cost_per_tonne"
    )
    haul_cost = chk.number(m.get("haul_cost_per_hour", 0.0), f"{path}.haul_cost_per_hour")
    if chk.issues:
        return LogisticsConstraints()
    return LogisticsConstraints(
        lot_size_tonnes=lot or 1000.0,
        min_lots_per_used_rom=int(min_lots),
        max_rom_types_per_blend=max_types,
        haul_fleet_hours=haul_hours,
        wash_capacity_tonnes=wash_cap,
        wash_fixed_cost_per_period=wash_fixed or 0.0,
        wash_variable_cost_per_tonne=wash_var or 0.0,
        rehandle_cost_per_tonne=rehandle or 0.0,
        rehandle_loss_fraction=loss or 0.0,
        haul_cost_per_hour=haul_cost or 0.0,
    )


def load_scenario(data: bytes | str) -> Scenario:
    """Parse and validate a scenario document; raises DocumentError carrying
    every issue found, each with a distinct code and field path."""
    doc = _parse_json(data)
    chk = _Check()
    _check_version(doc, chk)
    body = chk.mapping(doc, "$", {"schema_version", "scenario"})
    scenario_raw = None
    if body is not None:
        scenario_raw = chk.mapping(
            doc.get("scenario"),
            "$.scenario",
            {"horizon_periods", "days_per_period", "attributes", "roms", "products"},
            {"logistics", "market"},
        )
    if chk.issues or scenario_raw is None:
        raise DocumentError(chk.issues)

    horizon = chk.integer(scenario_raw.get("horizon_periods"), "$.scenario.horizon_periods")
    days = chk.integer(scenario_raw.get("days_per_period"), "$.scenario.days_per_period")
    if horizon is not None and horizon < 1:
        chk.add("scenario.horizon.positive", "$.scenario.horizon_periods", "horizon is >= 1")
    if days is not None and days < 1:
        chk.add("scenario.days.positive", "$.scenario.days_per_period", "days per period is >= 1")
    if chk.issues:
        raise DocumentError(chk.issues)

    registry = _load_registry(scenario_raw.get("attributes"), chk)
    roms, products = [], []
    raw_roms = scenario_raw.get("roms")
    if not isinstance(raw_roms, list):
        chk.add("type.list", "$.scenario.roms", "expected a list")
    else:
        seen = set()
        for i, item in enumerate(raw_roms):
            rom = _load_rom(item, i, horizon, registry, chk)
            if rom is not None:
                if rom.id in seen:
                    chk.add("rom.id.duplicate", f"$.scenario.roms[{i}].id", f"duplicate {rom.id!r}")
                seen.add(rom.id)
                roms.append(rom)
    raw_products = scenario_raw.get("products")
    if not isinstance(raw_products, list):
        chk.add("type.list", "$.scenario.products", "expected a list")
    else:
        seen = set()
        for i, item in enumerate(raw_products):
            product = _load_product(item, i, horizon, registry, chk)
            if product is not None:
                if product.id in seen:
                    chk.add(
                        "product.id.duplicate",
                        f"$.scenario.products[{i}].id",
                        f"duplicate {product.id!r}",
                    )
                seen.add(product.id)
                products.append(product)
    logistics = _load_logistics(scenario_raw.get("logistics", {}), horizon, chk)
    market = MarketModel()
    raw_market = chk.mapping(
        scenario_raw.get("market", {}), "$.scenario.market", set(), {"discount_rate_per_period"}
    )
    if raw_market is not None:
        rate = chk.number(
            raw_market.get("discount_rate_per_period", 0.0),
            "$.scenario.market.discount_rate_per_period",
        )
        if rate is not None and rate < 0:
            chk.add(
                "market.discount.range",
                "$.scenario.market.discount_rate_per_period",
                "discount rate is >= 0",
            )
        elif rate is not None:
            market = MarketModel(rate)
    if chk.issues:
        raise DocumentError(chk.issues)
    try:
        return Scenario(
            horizon_periods=horizon,
            days_per_period=days,
            registry=registry,
            roms=roms,
            products=products,
            logistics=logistics,
            market=market,
        )
    except ValueError as exc:
        raise DocumentError([ValidationIssue("scenario.invalid", "$.scenario", str(exc))]) from exc


def scenario_to_doc(scenario: Scenario) -> dict:
    log = scenario.logistics
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": {
            "horizon_periods": scenario.horizon_periods,
            "days_per_period": scenario.days_per_period,
            "attributes": [
                {"code": a.code, "unit": a.unit, "lower_is_better": a.lower_is_better}
                for a in scenario.registry.entries
            ],
            "roms": [
                {
                    "id": rom.id,
                    "pit": rom.pit,
                    "excavation_day": rom.excavation_day,
                    "available_tonnes": list(rom.available_tonnes),
                    "quality": {k: rom.quality[k] for k in sorted(rom.quality)},
                    "degradation": {
                        "rate_per_day": dict(sorted(rom.degradation.rate_per_day.items())),
                        "cap": dict(sorted(rom.degradation.cap.items())),
                    },
                    "wash_curve": None
                    if rom.wash_curve is None
                    else {
                        "bypass_allowed": rom.wash_curve.bypass_allowed,
                        "knots": [
                            {
                                "cut_point_density": k.cut_point_density,
                                "product_ash_percent": k.product_ash_percent,
                                "yield_fraction": k.yield_fraction,
                            }
                            for k in rom.wash_curve.knots
                        ],
                    },
                    "haul_hours_per_tonne": rom.haul_hours_per_tonne,
                    "staging_haul_hours_per_tonne": rom.staging_haul_hours_per_tonne,
                }
                for rom in scenario.roms
            ],
            "products": [
                {
                    "id": p.id,
                    "quality_range": {
                        code: {"min": r.min, "max": r.max}
                        for code, r in sorted(p.quality_range.items())
                    },
                    "adjustments": {
                        code: {
                            "target": a.target,
                            "rate_below": a.rate_below,
                            "rate_above": a.rate_above,
                        }
                        for code, a in sorted(p.adjustments.items())
                    },
                    "base_price_per_tonne": list(p.base_price_per_tonne),
                    "tonnage_target_tonnes": list(p.tonnage_target_tonnes),
                    "contract_min_tonnes": list(p.contract_min_tonnes),
                }
                for p in scenario.products
            ],
            "logistics": {
                "lot_size_tonnes": log.lot_size_tonnes,
                "min_lots_per_used_rom": log.min_lots_per_used_rom,
                "max_rom_types_per_blend": log.max_rom_types_per_blend,
                "haul_fleet_hours": log.haul_fleet_hours,
                "wash_capacity_tonnes": log.wash_capacity_tonnes,
                "wash_fixed_cost_per_period": log.wash_fixed_cost_per_period,
                "wash_variable_cost_per_tonne": log.wash_variable_cost_per_tonne,
                "rehandle_cost_per_tonne": log.rehandle_cost_per_tonne,
                "rehandle_loss_fraction": log.rehandle_loss_fraction,
                "haul_cost_per_hour": log.haul_cost_per_hour,
            },
            "market": {"discount_rate_per_period": scenario.market.discount_rate_per_period},
        },
    }


def save_scenario(scenario: Scenario) -> bytes:
    """Canonical scenario document bytes; load(save(s)) == s."""
    return canonical_bytes(scenario_to_doc(scenario))


def plan_to_doc(plan: BlendPlan) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "plan": {
            "allotments": [
                {"period": a.period, "product_id": a.product_id, "rom_id": a.rom_id, "lots": a.lots}
                for a in plan.allotments
            ],
            "cut_points": [
                {"rom_id": rom_id, "period": period, "cut_point": cut}
                for (rom_id, period), cut in sorted(plan.cut_points.items())
            ],
            "rehandles": [
                {"period": r.period, "rom_id": r.rom_id, "tonnes": r.tonnes}
                for r in plan.rehandles
            ],
        },
    }


def save_plan(plan: BlendPlan) -> bytes:
    """Canonical plan document bytes, byte-stable across runs."""
    return canonical_bytes(plan_to_doc(plan))


def load_plan(data: bytes | str) -> BlendPlan:
    """Parse a plan document. Only structure is checked here; dangling
    scenario references surface at bind time (evaluation), not load time."""
    doc = _parse_json(data)
    chk = _Check()
    _check_version(doc, chk)
    body = chk.mapping(doc, "$", {"schema_version", "plan"})
    plan_raw = None
    if body is not None:
        plan_raw = chk.mapping(
            doc.get("plan"), "$.plan", set(), {"allotments", "cut_points", "rehandles"}
        )
    if chk.issues or plan_raw is None:
        raise DocumentError(chk.issues)
    allotments = []
    for i, item in enumerate(plan_raw.get("allotments", [])):
        path = f"$.plan.allotments[{i}]"
        m = chk.mapping(item, path, {"period", "product_id", "rom_id", "lots"})
        if m is None:
            continue
        period = chk.integer(m.get("period"), f"{path}.period")
        product_id = chk.string(m.get("product_id"), f"{path}.product_id")
        rom_id = chk.string(m.get("rom_id"), f"{path}.rom_id")
        lots = chk.integer(m.get("lots"), f"{path}.lots")
        if lots is not None and lots < 0:
            chk.add("plan.lots.negative", f"{path}.lots", "lots are >= 0")
            continue
        if None not in (period, product_id, rom_id, lots):
            allotments.append(Allotment(period, product_id, rom_id, lots))
    cut_points = {}
    for i, item in enumerate(plan_raw.get("cut_points", [])):
        path = f"$.plan.cut_points[{i}]"
        m = chk.mapping(item, path, {"rom_id", "period", "cut_point"})
        if m is None:
            continue
        rom_id = chk.string(m.get("rom_id"), f"{path}.rom_id")
        period = chk.integer(m.get("period"), f"{path}.period")
        cut = m.get("cut_point")
        if cut != BYPASS:
            cut = chk.number(cut, f"{path}.cut_point")
        if None not in (rom_id, period, cut):
            cut_points[(rom_id, period)] = cut
    rehandles = []
    for i, item in enumerate(plan_raw.get("rehandles", [])):
        path = f"$.plan.rehandles[{i}]"
        m = chk.mapping(item, path, {"period", "rom_id", "tonnes"})
        if m is None:
            continue
        period = chk.integer(m.get("period"), f"{path}.period")
        rom_id = chk.string(m.get("rom_id"), f"{path}.rom_id")
        tonnes = chk.number(m.get("tonnes"), f"{path}.tonnes")
        if tonnes is not None and tonnes < 0:
            chk.add("plan.rehandle.negative", f"{path}.tonnes", "tonnes are >= 0")
            continue
        if None not in (period, rom_id, tonnes):
            rehandles.append(Rehandle(period, rom_id, tonnes))
    if chk.issues:
        raise DocumentError(chk.issues)
    return BlendPlan(allotments, cut_points, rehandles)


def report_to_doc(report: EvaluationReport) -> dict:
    return {
        "per_product_period": [
            {
                "product_id": r.product_id,
                "period": r.period,
                "tonnes": r.tonnes,
                "blended_quality": {k: r.blended_quality[k] for k in sorted(r.blended_quality)},
                "in_spec": r.in_spec,
                "gross_revenue": r.gross_revenue,
                "adjustment_revenue": r.adjustment_revenue,
            }
            for r in report.per_product_period
        ],
        "costs": [
            {"period": p, "haul": c.haul, "wash": c.wash, "rehandle": c.rehandle}
            for p, c in enumerate(report.costs)
        ],
        "violations": [
            {"code": v.code, "period": v.period, "magnitude": v.magnitude}
            for v in report.violations
        ],
        "net_cashflows": list(report.net_cashflows),
        "total_revenue": report.total_revenue,
        "npv": report.npv,
        "kpis": {
            "total_sold_tonnes": report.kpis.total_sold_tonnes,
            "avg_revenue_per_tonne": report.kpis.avg_revenue_per_tonne,
            "wash_utilization": list(report.kpis.wash_utilization),
        },
    }


class RunLog:
    """Append-only, line-per-record store of optimization runs.

    Records survive process restarts; reads return insertion order. Appends
    take a single-writer lock and flush to disk before returning.
    """

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()

    def append(
        self,
        scenario_digest: str,
        strategy: dict,
        directives: list[dict],
        objective: float,
        timestamp: float | None = None,
    ) -> dict:
        record = {
            "timestamp": time.time() if timestamp is None else timestamp,
            "scenario_hash": scenario_digest,
            "strategy": strategy,
            "directives": directives,
            "objective": objective,
        }
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        try:
            with self._lock, open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
        except OSError as exc:
            raise RunLogError(f"run log unavailable at {self.path}: {exc}") from exc
        return record

    def entries(self) -> list[dict]:
        try:
            with open(self.path, encoding="utf-8") as fh:
                return [json.loads(line) for line in fh if line.strip()]
        except FileNotFoundError:
            return []
        except OSError as exc:
            raise RunLogError(f"run log unavailable at {self.path}: {exc}") from exc
