/** Server document shapes; the UI renders these verbatim and never computes
 * blending numbers of its own. */

export interface AllotmentDoc {
  period: number;
  product_id: string;
  rom_id: string;
  lots: number;
}

export interface CutPointDoc {
  rom_id: string;
  period: number;
  cut_point: number | "bypass";
}

export interface RehandleDoc {
  period: number;
  rom_id: string;
  tonnes: number;
}

export interface PlanDocument {
  schema_version: number;
  plan: {
    allotments: AllotmentDoc[];
    cut_points: CutPointDoc[];
    rehandles: RehandleDoc[];
  };
}

export interface ProductPeriodRowDoc {
  product_id: string;
  period: number;
  tonnes: number;
  blended_quality: Record<string, number>;
  in_spec: boolean;
  gross_revenue: number;
  adjustment_revenue: number;
}

export interface ViolationDoc {
  code: string;
  period: number;
  magnitude: number;
}

export interface ReportDocument {
  per_product_period: ProductPeriodRowDoc[];
  costs: { period: number; haul: number; wash: number; rehandle: number }[];
  violations: ViolationDoc[];
  net_cashflows: number[];
  total_revenue: number;
  npv: number;
  kpis: {
    total_sold_tonnes: number;
    avg_revenue_per_tonne: number;
    wash_utilization: number[];
  };
}

export interface ResultDocument {
  plan: PlanDocument;
  report: ReportDocument;
  objective: number;
  objective_kind: string;
  feasible: boolean;
  trace: [number, number][];
  evaluations: number;
}

export interface StrategyDocument {
  name: string;
  parameters: Record<string, unknown>;
}

export type DirectivePayload =
  | { kind: "pin_allotment"; period: number; product_id: string; rom_id: string; lots: number }
  | {
      kind: "quality_delta";
      product_id: string;
      attribute: string;
      delta: number;
      first_period: number | null;
      last_period: number | null;
    }
  | { kind: "tonnage_delta"; product_id: string; period: number; delta_tonnes: number }
  | {
      kind: "exclude_rom";
      rom_id: string;
      product_id: string;
      first_period: number | null;
      last_period: number | null;
    }
  | { kind: "reserve_rom"; rom_id: string; tonnes: number; until_period: number };

export interface SessionDocument {
  session_id: string;
  strategy: StrategyDocument;
  incumbent: {
    plan: PlanDocument;
    report: ReportDocument;
    objective: number;
    feasible: boolean;
  };
  directives: DirectivePayload[];
  history: { directives: DirectivePayload[]; objective: number }[];
}

export interface ScenarioDocument {
  schema_version: number;
  scenario: {
    horizon_periods: number;
    days_per_period: number;
    attributes: { code: string; unit: string; lower_is_better: boolean }[];
    roms: { id: string; [key: string]: unknown }[];
    products: {
      id: string;
      quality_range: Record<string, { min: number; max: number }>;
      adjustments: Record<string, { target: number; rate_below: number; rate_above: number }>;
      [key: string]: unknown;
    }[];
    [key: string]: unknown;
  };
}

export interface WhatIfDeltas {
  per_product_period: {
    product_id: string;
    period: number;
    tonnes_delta: number;
    quality_delta: Record<string, number>;
  }[];
  changed_cells: {
    period: number;
    product_id: string;
    rom_id: string;
    lots_before: number;
    lots_after: number;
  }[];
}

export interface OutcomeDocument {
  success: boolean;
  binding_constraint: string | null;
  objective_delta: number | null;
  deltas: WhatIfDeltas;
  result?: ResultDocument;
  session?: SessionDocument;
}

export interface ConflictBody {
  error: string;
  reason: string;
  conflict: [DirectivePayload | null, DirectivePayload | null];
}

export interface RunHandleDocument {
  run_id: string;
  scenario_id: string;
  state: "queued" | "running" | "done" | "cancelled" | "failed";
  progress: { evaluations: number; budget: number };
  result?: ResultDocument;
  error?: string;
}
