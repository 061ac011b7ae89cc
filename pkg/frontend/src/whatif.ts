/** Preview/commit flow for guided runs.
 *
 * A preview calls the pure what-if endpoint and holds the outcome; cancel
 * drops it with zero server mutation; commit re-issues the same directive
 * set through the mutating endpoint. Because server runs are deterministic
 * per seed, the committed plan equals the previewed plan whenever the
 * directives were not edited in between. */

import type { PlannerApi } from "./api.js";
import type { DirectivePayload, OutcomeDocument } from "./types.js";

export type WhatIfPhase = "idle" | "previewed";

export class WhatIfFlow {
  private phase: WhatIfPhase = "idle";
  private directives: DirectivePayload[] = [];
  private outcome: OutcomeDocument | null = null;

  constructor(
    private readonly api: PlannerApi,
    private readonly sessionId: string,
  ) {}

  state(): { phase: WhatIfPhase; directives: DirectivePayload[]; outcome: OutcomeDocument | null } {
    return { phase: this.phase, directives: [...this.directives], outcome: this.outcome };
  }

  async preview(directives: DirectivePayload[]): Promise<OutcomeDocument> {
    const outcome = await this.api.whatIf(this.sessionId, directives);
    this.phase = "previewed";
    this.directives = [...directives];
    this.outcome = outcome;
    return outcome;
  }

  /** Discard the preview; no request is sent. */
  cancel(): void {
    this.phase = "idle";
    this.directives = [];
    this.outcome = null;
  }

  async commit(): Promise<OutcomeDocument> {
    if (this.phase !== "previewed") {
      throw new Error("nothing previewed to commit");
    }
    const outcome = await this.api.applyDirectives(this.sessionId, this.directives);
    this.phase = "idle";
    this.directives = [];
    this.outcome = null;
    return outcome;
  }
}
