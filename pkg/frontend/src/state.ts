/**
 * View state: the message list, the rendered graph model, and the event
 * cursor. The cursor is strictly non-decreasing and survives tab reloads via
 * the injected storage (localStorage in the browser, a stub in tests).
 */

import type { AnswerBundle, EngineEvent, GraphEdge, GraphNode } from "./api.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export interface MessageCard {
  role: "user" | "assistant" | "error";
  text: string;
  iterationsUsed?: number;
  finalScore?: number;
}

const CURSOR_KEY = "recollect.eventCursor";

export class ViewState {
  sessionId: string | null = null;
  messages: MessageCard[] = [];
  graphNodes: GraphNode[] = [];
  graphEdges: GraphEdge[] = [];
  eventFeed: EngineEvent[] = [];

  private cursor = 0;

  constructor(private readonly storage?: StorageLike) {
    const saved = storage?.getItem(CURSOR_KEY);
    if (saved !== null && saved !== undefined) {
      const parsed = Number(saved);
      if (Number.isFinite(parsed) && parsed >= 0) this.cursor = parsed;
    }
  }

  get eventCursor(): number {
    return this.cursor;
  }

  addUserMessage(text: string): MessageCard {
    const card: MessageCard = { role: "user", text };
    this.messages.push(card);
    return card;
  }

  addAnswer(bundle: AnswerBundle): MessageCard {
    const card: MessageCard = {
      role: "assistant",
      text: bundle.answer,
      iterationsUsed: bundle.iterations_used,
      finalScore: bundle.final_score,
    };
    this.messages.push(card);
    return card;
  }

  addError(text: string): MessageCard {
    const card: MessageCard = { role: "error", text };
    this.messages.push(card);
    return card;
  }

  setGraph(nodes: GraphNode[], edges: GraphEdge[]): void {
    // pure projection: exactly the latest fetched subgraph, nothing derived
    this.graphNodes = nodes;
    this.graphEdges = edges;
  }

  /**
   * Accept a polled batch. The whole batch is rejected (cursor unchanged)
   * unless its seqs are strictly increasing and start past the cursor.
   */
  acceptEvents(events: EngineEvent[]): EngineEvent[] {
    if (events.length === 0) return [];
    let previous = this.cursor;
    for (const event of events) {
      if (event.seq <= previous) return [];
      previous = event.seq;
    }
    this.cursor = previous;
    this.storage?.setItem(CURSOR_KEY, String(this.cursor));
    this.eventFeed.push(...events);
    return events;
  }
}
