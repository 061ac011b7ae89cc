"""Domain types for blend planning scenarios.

Values are immutable after construction by convention; nothing here mutates
them, so instances are safe to share across threads. Lists of ROMs, products,
attributes, and knots are canonicalized (sorted by id/code/density) at
construction so that structurally equal scenarios compare equal regardless of
authoring order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

ATTRIBUTE_UNITS = ("percent", "index", "mj_per_kg")

# Blended quality state: attribute code -> value in the registry's unit.
QualityVector = dict[str, float]


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(eq=True)
class Attribute:
    code: str
    unit: str
    lower_is_better: bool = True

    def __post_init__(self):
        if not self.code:
            raise ValueError("attribute code must be nonempty")
        if self.unit not in ATTRIBUTE_UNITS:
            raise ValueError(f"unknown attribute unit {self.unit!r}")

    def clamp(self, value: float) -> float:
        """Clamp a value to the unit's physical bounds."""
        if self.unit == "percent":
            return min(100.0, max(0.0, value))
        return max(0.0, value)


@dataclass(eq=True)
class AttributeRegistry:
    """The set of quality attribute symbols a scenario works with."""

    entries: list[Attribute]

    def __post_init__(self):
        codes = [a.code for a in self.entries]
        if len(set(codes)) != len(codes):
            raise ValueError("attribute codes must be unique")
        self.entries = sorted(self.entries, key=lambda a: a.code)
        self._by_code = {a.code: a for a in self.entries}

    def __contains__(self, code: str) -> bool:
        return code in self._by_code

    def get(self, code: str) -> Attribute:
        return self._by_code[code]

    def codes(self) -> list[str]:
        return [a.code for a in self.entries]

    def validate_quality(self, q: QualityVector) -> None:
        for code, value in q.items():
            if code not in self._by_code:
                raise ValueError(f"quality attribute {code!r} not in registry")
            if not _finite(value):
                raise ValueError(f"quality value for {code!r} must be finite")
            if self._by_code[code].unit == "percent" and not 0.0 <= value <= 100.0:
                raise ValueError(f"percent attribute {code!r} outside [0, 100]")


@dataclass(eq=True)
class CurveKnot:
    cut_point_density: float  # g/cc
    product_ash_percent: float
    yield_fraction: float


@dataclass(eq=True)
class AshYieldCurve:
    """Per-ROM relation between cut-point density, product ash, and yield.

    Knots are linearly interpolated; densities strictly increase and both
    product ash and yield are nondecreasing in density.
    """

    knots: list[CurveKnot]
    bypass_allowed: bool = False

    def __post_init__(self):
        if len(self.knots) < 2:
            raise ValueError("ash-yield curve needs at least 2 knots")
        self.knots = sorted(self.knots, key=lambda k: k.cut_point_density)
        for a, b in zip(self.knots, self.knots[1:]):
            if not a.cut_point_density < b.cut_point_density:
                raise ValueError("curve densities must strictly increase")
            if b.product_ash_percent < a.product_ash_percent:
                raise ValueError("product ash must be nondecreasing in density")
            if b.yield_fraction < a.yield_fraction:
                raise ValueError("yield must be nondecreasing in density")
        for k in self.knots:
            if not 0.0 < k.yield_fraction <= 1.0:
                raise ValueError("yield must lie in (0, 1]")

    @property
    def min_density(self) -> float:
        return self.knots[0].cut_point_density

    @property
    def max_density(self) -> float:
        return self.knots[-1].cut_point_density


@dataclass(eq=True)
class DegradationModel:
    """Linear-per-day stockpile quality drift with a per-attribute cap on the
    cumulative change."""

    rate_per_day: dict[str, float] = field(default_factory=dict)
    cap: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for code, c in self.cap.items():
            if c < 0:
                raise ValueError(f"degradation cap for {code!r} must be >= 0")


@dataclass(eq=True)
class RomParcel:
    """One ROM type: where it comes from, what becomes available when, its
    as-excavated quality, and how it washes, degrades, and hauls."""

    id: str
    pit: str
    excavation_day: int
    available_tonnes: list[float]  # tonnes becoming available each period
    quality: QualityVector
    degradation: DegradationModel = field(default_factory=DegradationModel)
    wash_curve: AshYieldCurve | None = None
    haul_hours_per_tonne: float = 0.0
    staging_haul_hours_per_tonne: float = 0.0

    def __post_init__(self):
        if not self.id:
            raise ValueError("rom id must be nonempty")
        if any(t < 0 for t in self.available_tonnes):
            raise ValueError("available tonnes must be >= 0")
        if self.haul_hours_per_tonne < 0:
            raise ValueError("haul hours per tonne must be >= 0")
        if not 0 <= self.staging_haul_hours_per_tonne <= self.haul_hours_per_tonne:
            raise ValueError(
                "staging haul hours must lie in [0, haul_hours_per_tonne]"
            )

    def total_available(self) -> float:
        return sum(self.available_tonnes)


@dataclass(eq=True)
class Adjustment:
    """Per-tonne price delta per unit of deviation from a quality target.

    Rates are sign-free: negative rates are penalties, positive are bonuses.
    """

    target: float
    rate_below: float = 0.0
    rate_above: float = 0.0

    def __post_init__(self):
        if not (_finite(self.target) and _finite(self.rate_below) and _finite(self.rate_above)):
            raise ValueError("adjustment target and rates must be finite")


@dataclass(eq=True)
class QualityRange:
    min: float
    max: float

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("quality range min must be <= max")

    def contains(self, value: float) -> bool:
        # Closed interval: boundary values are in spec.
        return self.min <= value <= self.max


@dataclass(eq=True)
class ProductSpec:
    id: str
    quality_range: dict[str, QualityRange]
    base_price_per_tonne: list[float]
    tonnage_target_tonnes: list[float]
    contract_min_tonnes: list[float] = field(default_factory=list)
    adjustments: dict[str, Adjustment] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("product id must be nonempty")
        if any(p < 0 for p in self.base_price_per_tonne):
            raise ValueError("base price must be >= 0")
        if any(t < 0 for t in self.contract_min_tonnes):
            raise ValueError("contract tonnes must be >= 0")
        if any(t < 0 for t in self.tonnage_target_tonnes):
            raise ValueError("tonnage target must be >= 0")
        for code, adj in self.adjustments.items():
            rng = self.quality_range.get(code)
            if rng is not None and not rng.contains(adj.target):
                raise ValueError(
                    f"adjustment target for {code!r} lies outside the quality range"
                )


@dataclass(eq=True)
class LogisticsConstraints:
    lot_size_tonnes: float = 1000.0
    min_lots_per_used_rom: int = 1
    max_rom_types_per_blend: int | None = None  # None: unrestricted
    haul_fleet_hours: list[float] | None = None  # None: unlimited
    wash_capacity_tonnes: list[float] | None = None
    wash_fixed_cost_per_period: float = 0.0
    wash_variable_cost_per_tonne: float = 0.0
    rehandle_cost_per_tonne: float = 0.0
    rehandle_loss_fraction: float = 0.0
    haul_cost_per_hour: float = 0.0

    def __post_init__(self):
        if self.lot_size_tonnes <= 0:
            raise ValueError("lot size must be positive")
        if self.min_lots_per_used_rom < 1:
            raise ValueError("min lots per used rom must be a positive integer")
        if self.max_rom_types_per_blend is not None and self.max_rom_types_per_blend < 1:
            raise ValueError("max rom types per blend must be a positive integer")
        if not 0.0 <= self.rehandle_loss_fraction < 1.0:
            raise ValueError("rehandle loss fraction must lie in [0, 1)")


@dataclass(eq=True)
class MarketModel:
    discount_rate_per_period: float = 0.0

    def __post_init__(self):
        if not _finite(self.discount_rate_per_period) or self.discount_rate_per_period < 0:
            raise ValueError("discount rate must be finite and >= 0")


@dataclass(eq=True)
class Scenario:
    """A complete planning problem: horizon, attribute registry, ROM parcels,
    product specs, logistics limits, and market assumptions."""

    horizon_periods: int
    days_per_period: int
    registry: AttributeRegistry
    roms: list[RomParcel]
    products: list[ProductSpec]
    logistics: LogisticsConstraints = field(default_factory=LogisticsConstraints)
    market: MarketModel = field(default_factory=MarketModel)

    def __post_init__(self):
        if self.horizon_periods < 1:
            raise ValueError("horizon must be >= 1 period")
        if self.days_per_period < 1:
            raise ValueError("days per period must be >= 1")
        self.roms = sorted(self.roms, key=lambda r: r.id)
        self.products = sorted(self.products, key=lambda p: p.id)
        rom_ids = [r.id for r in self.roms]
        product_ids = [p.id for p in self.products]
        if len(set(rom_ids)) != len(rom_ids):
            raise ValueError("rom ids must be unique")
        if len(set(product_ids)) != len(product_ids):
            raise ValueError("product ids must be unique")
        h = self.horizon_periods
        for rom in self.roms:
            if len(rom.available_tonnes) != h:
                raise ValueError(f"rom {rom.id!r}: available_tonnes must have {h} entries")
            self.registry.validate_quality(rom.quality)
            missing = set(self.registry.codes()) - set(rom.quality)
            if missing:
                # Blending needs every parcel on the same attribute set.
                raise ValueError(
                    f"rom {rom.id!r} missing quality values for {sorted(missing)}"
                )
            for code in list(rom.degradation.rate_per_day) + list(rom.degradation.cap):
                if code not in self.registry:
                    raise ValueError(f"degradation attribute {code!r} not in registry")
            if rom.wash_curve is not None and "ash" not in self.registry:
                raise ValueError("registry must define 'ash' when any wash curve exists")
        for prod in self.products:
            for attrs in (prod.quality_range, prod.adjustments):
                for code in attrs:
                    if code not in self.registry:
                        raise ValueError(
                            f"product {prod.id!r} references unknown attribute {code!r}"
                        )
            for name, values in (
                ("base_price_per_tonne", prod.base_price_per_tonne),
                ("tonnage_target_tonnes", prod.tonnage_target_tonnes),
                ("contract_min_tonnes", prod.contract_min_tonnes),
            ):
                if len(values) != h:
                    raise ValueError(f"product {prod.id!r}: {name} must have {h} entries")
            for p in range(h):
                if prod.contract_min_tonnes[p] > prod.tonnage_target_tonnes[p]:
                    raise ValueError(
                        f"product {prod.id!r}: contract exceeds tonnage target in period {p}"
                    )
        for limits in (self.logistics.haul_fleet_hours, self.logistics.wash_capacity_tonnes):
            if limits is not None and len(limits) != h:
                raise ValueError("per-period logistics limits must match the horizon")
        self._rom_by_id = {r.id: r for r in self.roms}
        self._product_by_id = {p.id: p for p in self.products}

    def rom(self, rom_id: str) -> RomParcel:
        return self._rom_by_id[rom_id]

    def product(self, product_id: str) -> ProductSpec:
        return self._product_by_id[product_id]

    def has_rom(self, rom_id: str) -> bool:
        return rom_id in self._rom_by_id

    def has_product(self, product_id: str) -> bool:
        return product_id in self._product_by_id

    def period_midpoint_day(self, period: int) -> int:
        return period * self.days_per_period + self.days_per_period // 2

    def target_lots(self, product_id: str, period: int) -> int:
        """Demand cap in whole feed lots for one product-period."""
        target = self.product(product_id).tonnage_target_tonnes[period]
        return int(target // self.logistics.lot_size_tonnes)

    def max_blend_roms(self) -> int:
        limit = self.logistics.max_rom_types_per_blend
        return len(self.roms) if limit is None else limit
