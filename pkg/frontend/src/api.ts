/**
 * Typed client for the engine's HTTP API.
 *
 * The UI never computes scores or graph structure itself; everything shown
 * comes straight out of these response bodies. The fetch implementation is
 * injectable so contract tests can replay recorded responses.
 */

export interface AnswerBundle {
  answer: string;
  iterations_used: number;
  final_score: number;
  context_sizes: [number, number][];
  cited_node_ids: number[];
  cited_chunk_ids: number[];
}

export interface ScoreComponents {
  semantic: number;
  recency: number;
  proximity: number;
}

export interface GraphNode {
  id: number;
  label: string;
  kind: string;
  created_at: number;
  last_seen: number;
  mention_count: number;
  score?: number;
  components?: ScoreComponents;
}

export interface GraphEdge {
  src: number;
  dst: number;
  kind: string;
  created_at: number;
  last_seen: number;
  confidence: number;
}

export interface Neighborhood {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface EngineEvent {
  seq: number;
  ts: number;
  kind: string;
  payload: Record<string, unknown>;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly kind: string,
  ) {
    super(`api error ${status}: ${kind}`);
  }
}

async function toError(response: Response): Promise<ApiError> {
  let kind = "unknown";
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) kind = body.error;
  } catch {
    // non-JSON error body; keep "unknown"
  }
  return new ApiError(response.status, kind);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) throw await toError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await toError(response);
    return (await response.json()) as T;
  }

  async health(): Promise<boolean> {
    try {
      await this.get<{ status: string }>("/v1/health");
      return true;
    } catch {
      return false;
    }
  }

  async createSession(): Promise<string> {
    const body = await this.post<{ session_id: string }>("/v1/sessions", {});
    return body.session_id;
  }

  sendMessage(sessionId: string, text: string, ts?: number): Promise<AnswerBundle> {
    const payload: { text: string; ts?: number } = { text };
    if (ts !== undefined) payload.ts = ts;
    return this.post<AnswerBundle>(`/v1/sessions/${sessionId}/messages`, payload);
  }

  async graphNodes(query: string, windowFrom?: number, windowTo?: number, limit = 50): Promise<GraphNode[]> {
    const params = new URLSearchParams({ q: query, limit: String(limit) });
    if (windowFrom !== undefined) params.set("from", String(windowFrom));
    if (windowTo !== undefined) params.set("to", String(windowTo));
    const body = await this.get<{ nodes: GraphNode[] }>(`/v1/graph/nodes?${params}`);
    return body.nodes;
  }

  neighborhood(nodeId: number, hops = 1): Promise<Neighborhood> {
    return this.get<Neighborhood>(`/v1/graph/nodes/${nodeId}/neighborhood?hops=${hops}`);
  }

  async events(sinceSeq: number): Promise<EngineEvent[]> {
    const body = await this.get<{ events: EngineEvent[] }>(`/v1/events?since_seq=${sinceSeq}`);
    return body.events;
  }
}
