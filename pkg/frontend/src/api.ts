/** Thin typed client over the service endpoints. Every byte of state the UI
 * shows comes back through here. */

import type {
  ConflictBody,
  DirectivePayload,
  OutcomeDocument,
  RunHandleDocument,
  ScenarioDocument,
  SessionDocument,
  StrategyDocument,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`request failed with status ${status}`);
  }

  conflict(): ConflictBody | null {
    if (this.status === 422 && this.body && typeof this.body === "object" && "conflict" in this.body) {
      return this.body as ConflictBody;
    }
    return null;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class PlannerApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    const body = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, body);
    }
    return body as T;
  }

  getScenario(scenarioId: string): Promise<ScenarioDocument> {
    return this.request(`/scenarios/${scenarioId}`);
  }

  putScenario(scenarioId: string, document: unknown): Promise<unknown> {
    return this.request(`/scenarios/${scenarioId}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(document),
    });
  }

  openSession(scenarioId: string, strategy: StrategyDocument): Promise<SessionDocument> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scenario_id: scenarioId, strategy }),
    });
  }

  getSession(sessionId: string): Promise<SessionDocument> {
    return this.request(`/sessions/${sessionId}`);
  }

  whatIf(sessionId: string, directives: DirectivePayload[]): Promise<OutcomeDocument> {
    return this.request(`/sessions/${sessionId}/what-if`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ directives }),
    });
  }

  applyDirectives(sessionId: string, directives: DirectivePayload[]): Promise<OutcomeDocument> {
    return this.request(`/sessions/${sessionId}/directives`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ directives }),
    });
  }

  getAnalytics(sessionId: string): Promise<unknown> {
    return this.request(`/sessions/${sessionId}/analytics`);
  }

  startRun(scenarioId: string, strategy: StrategyDocument): Promise<RunHandleDocument> {
    return this.request(`/scenarios/${scenarioId}/optimize`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ strategy }),
    });
  }

  getRun(runId: string): Promise<RunHandleDocument> {
    return this.request(`/runs/${runId}`);
  }

  cancelRun(runId: string): Promise<RunHandleDocument> {
    return this.request(`/runs/${runId}`, { method: "DELETE" });
  }
}
