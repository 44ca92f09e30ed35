/**
 * Live event feed: poll /v1/events every couple of seconds, appending only
 * batches the cursor guard accepts. Poll failures are silent; the poller
 * backs off by skipping cycles and recovers on the next success.
 */

import type { ApiClient, EngineEvent } from "./api.js";
import type { ViewState } from "./state.js";

export class EventPoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private consecutiveFailures = 0;
  private skipBudget = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly state: ViewState,
    private readonly onEvents: (events: EngineEvent[]) => void,
    private readonly intervalMs = 2000,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
    void this.tick();
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private async tick(): Promise<void> {
    if (this.skipBudget > 0) {
      this.skipBudget -= 1;
      return;
    }
    await this.pollOnce();
  }

  /** One poll cycle; exposed for tests. */
  async pollOnce(): Promise<EngineEvent[]> {
    try {
      const events = await this.api.events(this.state.eventCursor);
      this.consecutiveFailures = 0;
      const accepted = this.state.acceptEvents(events);
      if (accepted.length > 0) this.onEvents(accepted);
      return accepted;
    } catch {
      this.consecutiveFailures += 1;
      this.skipBudget = Math.min(8, 2 ** (this.consecutiveFailures - 1));
      return [];
    }
  }
}
