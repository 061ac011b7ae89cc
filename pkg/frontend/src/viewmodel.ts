/** Plan-board view model: a pure rearrangement of server response fields.
 * No blending math happens client-side; even "off spec" flags come from the
 * server's violation list. */

import type {
  DirectivePayload,
  ScenarioDocument,
  SessionDocument,
  ViolationDoc,
} from "./types.js";

export interface BoardColumn {
  productId: string;
  period: number;
}

export interface BoardCell {
  productId: string;
  period: number;
  romId: string;
  lots: number;
  pinned: boolean;
  changed?: boolean;
}

export interface QualityGauge {
  productId: string;
  period: number;
  attribute: string;
  value: number | null; // blended value reported by the server
  min: number;
  max: number;
  target: number | null;
  flagged: boolean; // a quality violation exists for this gauge
}

export interface KpiStrip {
  totalSoldTonnes: number;
  avgRevenuePerTonne: number;
  npv: number;
  washUtilization: number[];
  feasible: boolean;
}

export interface PlanBoardViewModel {
  romIds: string[];
  columns: BoardColumn[];
  cells: BoardCell[];
  gauges: QualityGauge[];
  kpis: KpiStrip;
  violations: ViolationDoc[];
  contractWarnings: ViolationDoc[];
}

function pinnedCells(directives: DirectivePayload[]): Set<string> {
  const pins = new Set<string>();
  for (const directive of directives) {
    if (directive.kind === "pin_allotment") {
      pins.add(`${directive.period}|${directive.product_id}|${directive.rom_id}`);
    }
  }
  return pins;
}

export function buildPlanBoard(
  scenario: ScenarioDocument,
  session: SessionDocument,
): PlanBoardViewModel {
  const horizon = scenario.scenario.horizon_periods;
  const romIds = scenario.scenario.roms.map((rom) => rom.id).sort();
  const columns: BoardColumn[] = [];
  for (const product of [...scenario.scenario.products].sort((a, b) => a.id.localeCompare(b.id))) {
    for (let period = 0; period < horizon; period += 1) {
      columns.push({ productId: product.id, period });
    }
  }

  const pins = pinnedCells(session.directives);
  const lots = new Map<string, number>();
  for (const allotment of session.incumbent.plan.plan.allotments) {
    lots.set(`${allotment.period}|${allotment.product_id}|${allotment.rom_id}`, allotment.lots);
  }
  const cells: BoardCell[] = [];
  for (const column of columns) {
    for (const romId of romIds) {
      const key = `${column.period}|${column.productId}|${romId}`;
      cells.push({
        productId: column.productId,
        period: column.period,
        romId,
        lots: lots.get(key) ?? 0,
        pinned: pins.has(key),
      });
    }
  }

  const report = session.incumbent.report;
  const rowByKey = new Map(
    report.per_product_period.map((row) => [`${row.product_id}|${row.period}`, row]),
  );
  const violationCodes = new Set(
    report.violations.map((violation) => `${violation.code}|${violation.period}`),
  );
  const gauges: QualityGauge[] = [];
  for (const product of scenario.scenario.products) {
    for (const [attribute, range] of Object.entries(product.quality_range).sort()) {
      for (let period = 0; period < horizon; period += 1) {
        const row = rowByKey.get(`${product.id}|${period}`);
        const value = row ? (row.blended_quality[attribute] ?? null) : null;
        gauges.push({
          productId: product.id,
          period,
          attribute,
          value,
          min: range.min,
          max: range.max,
          target: product.adjustments[attribute]?.target ?? null,
          flagged: violationCodes.has(`quality:${product.id}:${attribute}|${period}`),
        });
      }
    }
  }

  return {
    romIds,
    columns,
    cells,
    gauges,
    kpis: {
      totalSoldTonnes: report.kpis.total_sold_tonnes,
      avgRevenuePerTonne: report.kpis.avg_revenue_per_tonne,
      npv: report.npv,
      washUtilization: report.kpis.wash_utilization,
      feasible: session.incumbent.feasible,
    },
    violations: report.violations,
    contractWarnings: report.violations.filter((violation) =>
      violation.code.startsWith("contract:"),
    ),
  };
}

/** Mark the board cells named in a what-if delta so the preview can
 * highlight them. */
export function markChangedCells(
  board: PlanBoardViewModel,
  changed: { period: number; product_id: string; rom_id: string }[],
): PlanBoardViewModel {
  const keys = new Set(changed.map((c) => `${c.period}|${c.product_id}|${c.rom_id}`));
  return {
    ...board,
    cells: board.cells.map((cell) => ({
      ...cell,
      changed: keys.has(`${cell.period}|${cell.productId}|${cell.romId}`),
    })),
  };
}
