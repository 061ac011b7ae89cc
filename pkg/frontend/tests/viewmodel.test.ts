/** Board fidelity: the view model is a rearrangement of server fields. */

import { describe, expect, it } from "vitest";

import type { ScenarioDocument, SessionDocument } from "../src/types.js";
import { buildPlanBoard, markChangedCells } from "../src/viewmodel.js";
import scenarioFixture from "./fixtures/scenario.json";
import sessionFixture from "./fixtures/session.json";

const scenario = scenarioFixture as unknown as ScenarioDocument;
const session = sessionFixture as unknown as SessionDocument;

describe("buildPlanBoard", () => {
  it("mirrors every allotment of the incumbent plan", () => {
    const board = buildPlanBoard(scenario, session);
    const fromPlan = new Map(
      session.incumbent.plan.plan.allotments.map((a) => [
        `${a.period}|${a.product_id}|${a.rom_id}`,
        a.lots,
      ]),
    );
    for (const cell of board.cells) {
      const expected = fromPlan.get(`${cell.period}|${cell.productId}|${cell.romId}`) ?? 0;
      expect(cell.lots).toBe(expected);
    }
    const populated = board.cells.filter((c) => c.lots > 0);
    expect(populated.length).toBe(session.incumbent.plan.plan.allotments.length);
  });

  it("lays out one column per product-period and one row per ROM", () => {
    const board = buildPlanBoard(scenario, session);
    expect(board.romIds).toEqual(["dirty", "sweet"]);
    expect(board.columns).toEqual([{ productId: "blend-a", period: 0 }]);
    expect(board.cells.length).toBe(board.romIds.length * board.columns.length);
  });

  it("copies KPI numbers straight from the report", () => {
    const board = buildPlanBoard(scenario, session);
    const kpis = session.incumbent.report.kpis;
    expect(board.kpis.totalSoldTonnes).toBe(kpis.total_sold_tonnes);
    expect(board.kpis.avgRevenuePerTonne).toBe(kpis.avg_revenue_per_tonne);
    expect(board.kpis.npv).toBe(session.incumbent.report.npv);
  });

  it("builds gauges with the product's band and target", () => {
    const board = buildPlanBoard(scenario, session);
    const gauge = board.gauges.find((g) => g.attribute === "ash");
    expect(gauge).toBeDefined();
    expect(gauge!.min).toBe(0);
    expect(gauge!.max).toBe(20);
    expect(gauge!.target).toBe(10);
    expect(gauge!.value).toBe(
      session.incumbent.report.per_product_period[0].blended_quality.ash,
    );
    expect(gauge!.flagged).toBe(false);
  });

  it("flags gauges from the server violation list, not client math", () => {
    const broken = structuredClone(session) as SessionDocument;
    broken.incumbent.report.violations.push({
      code: "quality:blend-a:ash",
      period: 0,
      magnitude: 1.5,
    });
    const board = buildPlanBoard(scenario, broken);
    const gauge = board.gauges.find((g) => g.attribute === "ash");
    expect(gauge!.flagged).toBe(true);
  });

  it("shows contract warnings for an empty incumbent", () => {
    const empty = structuredClone(session) as SessionDocument;
    empty.incumbent.plan.plan.allotments = [];
    empty.incumbent.report.per_product_period = [];
    empty.incumbent.report.violations = [
      { code: "contract:blend-a", period: 0, magnitude: 4000 },
    ];
    const board = buildPlanBoard(scenario, empty);
    expect(board.cells.every((c) => c.lots === 0)).toBe(true);
    expect(board.contractWarnings.length).toBe(1);
    expect(board.contractWarnings[0].code).toBe("contract:blend-a");
  });

  it("marks pinned cells from the session directive stack", () => {
    const pinned = structuredClone(session) as SessionDocument;
    pinned.directives = [
      { kind: "pin_allotment", period: 0, product_id: "blend-a", rom_id: "sweet", lots: 5 },
    ];
    const board = buildPlanBoard(scenario, pinned);
    const cell = board.cells.find((c) => c.romId === "sweet");
    expect(cell!.pinned).toBe(true);
    expect(board.cells.find((c) => c.romId === "dirty")!.pinned).toBe(false);
  });
});

describe("markChangedCells", () => {
  it("highlights exactly the cells the server says changed", () => {
    const board = buildPlanBoard(scenario, session);
    const marked = markChangedCells(board, [
      { period: 0, product_id: "blend-a", rom_id: "sweet" },
    ]);
    expect(marked.cells.find((c) => c.romId === "sweet")!.changed).toBe(true);
    expect(marked.cells.find((c) => c.romId === "dirty")!.changed).toBe(false);
  });
});
