/** DOM rendering for the plan board, gauges, KPI strip, and delta panel.
 * Every number shown is a server response field passed through untouched. */

import type { OutcomeDocument, ViolationDoc } from "./types.js";
import type { PlanBoardViewModel } from "./viewmodel.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export type CellClickHandler = (cell: {
  period: number;
  productId: string;
  romId: string;
  lots: number;
}) => void;

export function renderPlanBoard(
  root: HTMLElement,
  board: PlanBoardViewModel,
  onCellClick?: CellClickHandler,
): void {
  root.textContent = "";
  const table = el("table", "plan-board");
  const head = el("tr");
  head.appendChild(el("th", "corner", "ROM \\ product"));
  for (const column of board.columns) {
    head.appendChild(el("th", "col-head", `${column.productId} · p${column.period}`));
  }
  table.appendChild(head);
  for (const romId of board.romIds) {
    const row = el("tr");
    row.appendChild(el("th", "row-head", romId));
    for (const column of board.columns) {
      const cell = board.cells.find(
        (c) => c.romId === romId && c.productId === column.productId && c.period === column.period,
      );
      const td = el("td", "cell", cell && cell.lots ? String(cell.lots) : "");
      td.dataset.period = String(column.period);
      td.dataset.product = column.productId;
      td.dataset.rom = romId;
      td.dataset.lots = String(cell?.lots ?? 0);
      if (cell?.pinned) td.classList.add("pinned");
      if (cell?.changed) td.classList.add("changed");
      if (onCellClick && cell) {
        td.addEventListener("click", () =>
          onCellClick({
            period: column.period,
            productId: column.productId,
            romId,
            lots: cell.lots,
          }),
        );
      }
      row.appendChild(td);
    }
    table.appendChild(row);
  }
  root.appendChild(table);
}

export function renderGauges(root: HTMLElement, board: PlanBoardViewModel): void {
  root.textContent = "";
  for (const gauge of board.gauges) {
    const item = el("div", "gauge" + (gauge.flagged ? " flagged" : ""));
    item.dataset.product = gauge.productId;
    item.dataset.period = String(gauge.period);
    item.dataset.attribute = gauge.attribute;
    item.appendChild(
      el("span", "gauge-label", `${gauge.productId} p${gauge.period} ${gauge.attribute}`),
    );
    const band = el("span", "gauge-band", `[${gauge.min} … ${gauge.max}]`);
    item.appendChild(band);
    item.appendChild(
      el("span", "gauge-value", gauge.value === null ? "—" : gauge.value.toFixed(2)),
    );
    if (gauge.target !== null) {
      item.appendChild(el("span", "gauge-target", `target ${gauge.target}`));
    }
    root.appendChild(item);
  }
}

export function renderKpis(root: HTMLElement, board: PlanBoardViewModel): void {
  root.textContent = "";
  const strip = el("div", "kpi-strip");
  const entries: [string, string][] = [
    ["sold tonnes", board.kpis.totalSoldTonnes.toLocaleString()],
    ["avg $/t", board.kpis.avgRevenuePerTonne.toFixed(2)],
    ["NPV", board.kpis.npv.toLocaleString()],
    ["wash util", board.kpis.washUtilization.map((u) => `${Math.round(u * 100)}%`).join(" ")],
    ["feasible", board.kpis.feasible ? "yes" : "NO"],
  ];
  for (const [label, value] of entries) {
    const item = el("div", "kpi");
    item.appendChild(el("span", "kpi-label", label));
    item.appendChild(el("span", "kpi-value", value));
    strip.appendChild(item);
  }
  root.appendChild(strip);
}

export function renderViolations(root: HTMLElement, violations: ViolationDoc[]): void {
  root.textContent = "";
  if (violations.length === 0) return;
  const list = el("ul", "violations");
  for (const violation of violations) {
    list.appendChild(
      el(
        "li",
        "violation",
        `${violation.code} (period ${violation.period}, by ${violation.magnitude})`,
      ),
    );
  }
  root.appendChild(list);
}

export function renderDeltaPanel(
  root: HTMLElement,
  outcome: OutcomeDocument | null,
): void {
  root.textContent = "";
  if (outcome === null) return;
  const panel = el("div", "delta-panel");
  if (!outcome.success) {
    panel.appendChild(
      el("p", "delta-infeasible", `infeasible: ${outcome.binding_constraint ?? "unknown"}`),
    );
    root.appendChild(panel);
    return;
  }
  panel.appendChild(
    el(
      "p",
      "delta-objective",
      `objective delta: ${outcome.objective_delta === null ? "—" : outcome.objective_delta.toLocaleString()}`,
    ),
  );
  for (const row of outcome.deltas.per_product_period) {
    const qualityBits = Object.entries(row.quality_delta)
      .map(([code, delta]) => `${code} ${delta >= 0 ? "+" : ""}${delta.toFixed(3)}`)
      .join(", ");
    panel.appendChild(
      el(
        "p",
        "delta-row",
        `${row.product_id} p${row.period}: tonnes ${row.tonnes_delta >= 0 ? "+" : ""}${row.tonnes_delta} (${qualityBits})`,
      ),
    );
  }
  const changed = el("p", "delta-cells", `${outcome.deltas.changed_cells.length} cells change`);
  panel.appendChild(changed);
  root.appendChild(panel);
}

export function renderBanner(root: HTMLElement, message: string | null): void {
  root.textContent = "";
  if (message !== null) {
    root.appendChild(el("div", "stale-banner", message));
  }
}
