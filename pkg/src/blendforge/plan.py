"""Blend plans: integer lot allotments, wash cut-points, and rehandle moves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import PlanStructureError
from .types import Scenario

# Cut-point value meaning "skip the wash plant"; only valid when the ROM's
# curve allows bypass.
BYPASS = "bypass"

# (rom_id, period) -> density or BYPASS
CutPointMap = dict[tuple[str, int], "float | str"]

# (period, product_id, rom_id) -> lots
Cell = tuple[int, str, str]


class Allotment(NamedTuple):
    period: int
    product_id: str
    rom_id: str
    lots: int


class Rehandle(NamedTuple):
    period: int
    rom_id: str
    tonnes: float


@dataclass(eq=True)
class BlendPlan:
    """An assignment of ROM feed lots to product-periods plus per-(ROM, period)
    wash settings and staging moves. Stored in canonical sorted order."""

    allotments: list[Allotment] = field(default_factory=list)
    cut_points: CutPointMap = field(default_factory=dict)
    rehandles: list[Rehandle] = field(default_factory=list)

    def __post_init__(self):
        self.allotments = sorted(
            (Allotment(*a) for a in self.allotments if a[3] != 0),
            key=lambda a: (a.period, a.product_id, a.rom_id),
        )
        self.rehandles = sorted(
            (Rehandle(*r) for r in self.rehandles if r[2] != 0),
            key=lambda r: (r.period, r.rom_id),
        )

    @classmethod
    def empty(cls) -> "BlendPlan":
        return cls()

    @classmethod
    def from_cells(
        cls,
        cells: dict[Cell, int],
        cut_points: CutPointMap | None = None,
        rehandles: list[Rehandle] | None = None,
    ) -> "BlendPlan":
        allotments = [
            Allotment(period, product, rom, lots)
            for (period, product, rom), lots in cells.items()
            if lots
        ]
        return cls(allotments, dict(cut_points or {}), list(rehandles or []))

    def cells(self) -> dict[Cell, int]:
        return {(a.period, a.product_id, a.rom_id): a.lots for a in self.allotments}

    def key(self) -> tuple:
        """Hashable identity used for evaluation caching."""
        return (
            tuple(self.allotments),
            tuple(sorted(self.cut_points.items())),
            tuple(self.rehandles),
        )

    def is_empty(self) -> bool:
        return not self.allotments and not self.rehandles

    def total_lots(self) -> int:
        return sum(a.lots for a in self.allotments)

    def hamming_distance(self, other: "BlendPlan") -> int:
        """Number of (period, product, ROM) cells whose lot counts differ."""
        mine, theirs = self.cells(), other.cells()
        cells = set(mine) | set(theirs)
        return sum(1 for c in cells if mine.get(c, 0) != theirs.get(c, 0))

    def validate_structure(self, scenario: Scenario) -> None:
        """Raise PlanStructureError unless every reference resolves and every
        washed ROM used in a period has a cut-point for it."""
        problems: list[str] = []
        for a in self.allotments:
            if not scenario.has_product(a.product_id):
                problems.append(f"unknown product {a.product_id!r}")
            if not scenario.has_rom(a.rom_id):
                problems.append(f"unknown rom {a.rom_id!r}")
            if not isinstance(a.lots, int) or a.lots < 0:
                problems.append(f"lots must be a nonnegative integer, got {a.lots!r}")
            if not 0 <= a.period < scenario.horizon_periods:
                problems.append(f"period {a.period} outside horizon")
        for (rom_id, period), cut in self.cut_points.items():
            if not scenario.has_rom(rom_id):
                problems.append(f"cut-point for unknown rom {rom_id!r}")
                continue
            rom = scenario.rom(rom_id)
            if rom.wash_curve is None:
                problems.append(f"cut-point set for curve-less rom {rom_id!r}")
            elif cut == BYPASS and not rom.wash_curve.bypass_allowed:
                problems.append(f"bypass not allowed for rom {rom_id!r}")
        for r in self.rehandles:
            if not scenario.has_rom(r.rom_id):
                problems.append(f"rehandle of unknown rom {r.rom_id!r}")
            if r.tonnes < 0:
                problems.append("rehandle tonnes must be >= 0")
            if not 0 <= r.period < scenario.horizon_periods:
                problems.append(f"rehandle period {r.period} outside horizon")
        if not problems:
            for a in self.allotments:
                rom = scenario.rom(a.rom_id)
                if rom.wash_curve is not None and (a.rom_id, a.period) not in self.cut_points:
                    problems.append(
                        f"missing cut-point for washed rom {a.rom_id!r} in period {a.period}"
                    )
        if problems:
            raise PlanStructureError("; ".join(sorted(set(problems))))
