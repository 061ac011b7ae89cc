/** Dashboard wiring: fetch state, render, compose directives, preview,
 * commit. State on screen renders only from server responses; optimistic
 * updates are deliberately absent. */

import { ApiError, PlannerApi } from "./api.js";
import {
  composeExcludeRom,
  composeQualityDelta,
  composeReserveRom,
  composeTonnageDelta,
  pinFromCell,
} from "./directives.js";
import {
  renderBanner,
  renderDeltaPanel,
  renderGauges,
  renderKpis,
  renderPlanBoard,
  renderViolations,
} from "./render.js";
import type { DirectivePayload, ScenarioDocument, SessionDocument } from "./types.js";
import { buildPlanBoard, markChangedCells } from "./viewmodel.js";
import { WhatIfFlow } from "./whatif.js";

interface Zones {
  banner: HTMLElement;
  board: HTMLElement;
  gauges: HTMLElement;
  kpis: HTMLElement;
  violations: HTMLElement;
  delta: HTMLElement;
  queue: HTMLElement;
  formErrors: HTMLElement;
}

class Dashboard {
  private scenario: ScenarioDocument | null = null;
  private session: SessionDocument | null = null;
  private flow: WhatIfFlow | null = null;
  private queued: DirectivePayload[] = [];

  constructor(
    private readonly api: PlannerApi,
    private readonly zones: Zones,
  ) {}

  async open(scenarioId: string, seed: number, budget: number): Promise<void> {
    try {
      this.scenario = await this.api.getScenario(scenarioId);
      this.session = await this.api.openSession(scenarioId, {
        name: "anneal",
        parameters: { seed, budget_evaluations: budget, restarts: 4 },
      });
      this.flow = new WhatIfFlow(this.api, this.session.session_id);
      renderBanner(this.zones.banner, null);
      this.renderAll();
    } catch (error) {
      renderBanner(this.zones.banner, `server unreachable or rejected the request: ${error}`);
    }
  }

  private renderAll(preview: boolean = false): void {
    if (!this.scenario || !this.session) return;
    let board = buildPlanBoard(this.scenario, this.session);
    const state = this.flow?.state();
    if (preview && state?.outcome?.success && state.outcome.deltas) {
      board = markChangedCells(board, state.outcome.deltas.changed_cells);
    }
    renderPlanBoard(this.zones.board, board, (cell) => {
      this.queued.push(pinFromCell(cell));
      this.renderQueue();
    });
    renderGauges(this.zones.gauges, board);
    renderKpis(this.zones.kpis, board);
    renderViolations(this.zones.violations, board.violations);
    renderDeltaPanel(this.zones.delta, state?.outcome ?? null);
  }

  private renderQueue(): void {
    this.zones.queue.textContent = "";
    const list = document.createElement("ul");
    for (const directive of this.queued) {
      const item = document.createElement("li");
      item.textContent = JSON.stringify(directive);
      list.appendChild(item);
    }
    this.zones.queue.appendChild(list);
  }

  private showErrors(errors: string[]): void {
    this.zones.formErrors.textContent = errors.join("; ");
  }

  queueDirective(kind: string, form: Record<string, string>): void {
    if (!this.scenario) return;
    const result =
      kind === "quality_delta"
        ? composeQualityDelta(this.scenario, {
            productId: form.productId ?? "",
            attribute: form.attribute ?? "",
            delta: form.delta ?? "",
            firstPeriod: form.firstPeriod,
            lastPeriod: form.lastPeriod,
          })
        : kind === "tonnage_delta"
          ? composeTonnageDelta(this.scenario, {
              productId: form.productId ?? "",
              period: form.period ?? "",
              deltaTonnes: form.deltaTonnes ?? "",
            })
          : kind === "exclude_rom"
            ? composeExcludeRom(this.scenario, {
                romId: form.romId ?? "",
                productId: form.productId ?? "",
                firstPeriod: form.firstPeriod,
                lastPeriod: form.lastPeriod,
              })
            : composeReserveRom(this.scenario, {
                romId: form.romId ?? "",
                tonnes: form.tonnes ?? "",
                untilPeriod: form.untilPeriod ?? "",
              });
    if (result.payload === null) {
      this.showErrors(result.errors);
      return;
    }
    this.showErrors([]);
    this.queued.push(result.payload);
    this.renderQueue();
  }

  async preview(): Promise<void> {
    if (!this.flow || this.queued.length === 0) {
      this.showErrors(["queue at least one directive before previewing"]);
      return;
    }
    try {
      await this.flow.preview(this.queued);
      this.renderAll(true);
    } catch (error) {
      this.surfaceApiError(error);
    }
  }

  cancelPreview(): void {
    this.flow?.cancel();
    this.renderAll();
  }

  async commit(): Promise<void> {
    if (!this.flow) return;
    try {
      const outcome = await this.flow.commit();
      if (outcome.session) {
        this.session = outcome.session;
        this.queued = [];
        this.renderQueue();
      }
      this.renderAll();
      renderDeltaPanel(this.zones.delta, outcome);
    } catch (error) {
      this.surfaceApiError(error);
    }
  }

  private surfaceApiError(error: unknown): void {
    if (error instanceof ApiError) {
      const conflict = error.conflict();
      if (conflict) {
        this.showErrors([
          `conflicting directives: ${conflict.reason}`,
          ...conflict.conflict.filter((d) => d !== null).map((d) => JSON.stringify(d)),
        ]);
        return;
      }
      this.showErrors([JSON.stringify(error.body)]);
      return;
    }
    renderBanner(this.zones.banner, `server unreachable: ${error}`);
  }
}

function zone(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

export function boot(): Dashboard {
  const api = new PlannerApi("");
  const dashboard = new Dashboard(api, {
    banner: zone("banner"),
    board: zone("board"),
    gauges: zone("gauges"),
    kpis: zone("kpis"),
    violations: zone("violations"),
    delta: zone("delta"),
    queue: zone("queue"),
    formErrors: zone("form-errors"),
  });

  zone("open-session").addEventListener("click", () => {
    const scenarioId = (document.getElementById("scenario-id") as HTMLInputElement).value;
    const seed = Number((document.getElementById("seed") as HTMLInputElement).value || "0");
    const budget = Number(
      (document.getElementById("budget") as HTMLInputElement).value || "5000",
    );
    void dashboard.open(scenarioId, seed, budget);
  });
  zone("queue-directive").addEventListener("click", () => {
    const kind = (document.getElementById("directive-kind") as HTMLSelectElement).value;
    const form: Record<string, string> = {};
    for (const input of document.querySelectorAll<HTMLInputElement>("#directive-form input")) {
      form[input.name] = input.value;
    }
    dashboard.queueDirective(kind, form);
  });
  zone("preview").addEventListener("click", () => void dashboard.preview());
  zone("cancel").addEventListener("click", () => dashboard.cancelPreview());
  zone("commit").addEventListener("click", () => void dashboard.commit());
  return dashboard;
}

if (typeof document !== "undefined" && document.getElementById("board")) {
  boot();
}
