/** Directive composition: form state in, validated payloads out. Payloads
 * match the documented schema exactly; invalid forms never reach the wire. */

import type { DirectivePayload, ScenarioDocument } from "./types.js";

export interface FormResult {
  payload: DirectivePayload | null;
  errors: string[];
}

function parseNumber(raw: string, label: string, errors: string[]): number | null {
  const value = Number(raw);
  if (raw.trim() === "" || !Number.isFinite(value)) {
    errors.push(`${label} must be a finite number`);
    return null;
  }
  return value;
}

function parsePeriod(raw: string, horizon: number, label: string, errors: string[]): number | null {
  if (raw.trim() === "") {
    return null;
  }
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0 || value >= horizon) {
    errors.push(`${label} must be a period index below ${horizon}`);
    return null;
  }
  return value;
}

function checkProduct(scenario: ScenarioDocument, productId: string, errors: string[]): void {
  if (!scenario.scenario.products.some((p) => p.id === productId)) {
    errors.push(`unknown product ${productId || "(empty)"}`);
  }
}

function checkRom(scenario: ScenarioDocument, romId: string, errors: string[]): void {
  if (!scenario.scenario.roms.some((r) => r.id === romId)) {
    errors.push(`unknown ROM ${romId || "(empty)"}`);
  }
}

export function composeQualityDelta(
  scenario: ScenarioDocument,
  form: { productId: string; attribute: string; delta: string; firstPeriod?: string; lastPeriod?: string },
): FormResult {
  const errors: string[] = [];
  checkProduct(scenario, form.productId, errors);
  if (!scenario.scenario.attributes.some((a) => a.code === form.attribute)) {
    errors.push(`unknown attribute ${form.attribute || "(empty)"}`);
  }
  const delta = parseNumber(form.delta, "delta", errors);
  if (delta !== null && delta === 0) {
    errors.push("delta must be nonzero");
  }
  const horizon = scenario.scenario.horizon_periods;
  const first = parsePeriod(form.firstPeriod ?? "", horizon, "first period", errors);
  const last = parsePeriod(form.lastPeriod ?? "", horizon, "last period", errors);
  if (errors.length > 0 || delta === null) {
    return { payload: null, errors };
  }
  return {
    payload: {
      kind: "quality_delta",
      product_id: form.productId,
      attribute: form.attribute,
      delta,
      first_period: first,
      last_period: last,
    },
    errors: [],
  };
}

export function composeTonnageDelta(
  scenario: ScenarioDocument,
  form: { productId: string; period: string; deltaTonnes: string },
): FormResult {
  const errors: string[] = [];
  checkProduct(scenario, form.productId, errors);
  const period = parsePeriod(form.period, scenario.scenario.horizon_periods, "period", errors);
  if (form.period.trim() === "") {
    errors.push("period is required");
  }
  const delta = parseNumber(form.deltaTonnes, "tonnage delta", errors);
  if (delta !== null && delta === 0) {
    errors.push("tonnage delta must be nonzero");
  }
  if (errors.length > 0 || period === null || delta === null) {
    return { payload: null, errors };
  }
  return {
    payload: { kind: "tonnage_delta", product_id: form.productId, period, delta_tonnes: delta },
    errors: [],
  };
}

export function composeExcludeRom(
  scenario: ScenarioDocument,
  form: { romId: string; productId: string; firstPeriod?: string; lastPeriod?: string },
): FormResult {
  const errors: string[] = [];
  checkRom(scenario, form.romId, errors);
  checkProduct(scenario, form.productId, errors);
  const horizon = scenario.scenario.horizon_periods;
  const first = parsePeriod(form.firstPeriod ?? "", horizon, "first period", errors);
  const last = parsePeriod(form.lastPeriod ?? "", horizon, "last period", errors);
  if (errors.length > 0) {
    return { payload: null, errors };
  }
  return {
    payload: {
      kind: "exclude_rom",
      rom_id: form.romId,
      product_id: form.productId,
      first_period: first,
      last_period: last,
    },
    errors: [],
  };
}

export function composeReserveRom(
  scenario: ScenarioDocument,
  form: { romId: string; tonnes: string; untilPeriod: string },
): FormResult {
  const errors: string[] = [];
  checkRom(scenario, form.romId, errors);
  const tonnes = parseNumber(form.tonnes, "tonnes", errors);
  if (tonnes !== null && tonnes <= 0) {
    errors.push("reserved tonnes must be positive");
  }
  const until = parsePeriod(
    form.untilPeriod,
    scenario.scenario.horizon_periods,
    "until period",
    errors,
  );
  if (form.untilPeriod.trim() === "") {
    errors.push("until period is required");
  }
  if (errors.length > 0 || tonnes === null || until === null) {
    return { payload: null, errors };
  }
  return { payload: { kind: "reserve_rom", rom_id: form.romId, tonnes, until_period: until }, errors: [] };
}

/** A pin composed from clicking a board cell keeps that cell's coordinates
 * and lot count. */
export function pinFromCell(cell: {
  period: number;
  productId: string;
  romId: string;
  lots: number;
}): DirectivePayload {
  return {
    kind: "pin_allotment",
    period: cell.period,
    product_id: cell.productId,
    rom_id: cell.romId,
    lots: cell.lots,
  };
}
