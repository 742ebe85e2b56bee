/** Typed access to the portal's HTTP endpoints.
 *
 * Field names mirror the wire format exactly.  The fetch function is
 * injectable so tests can fake the network; the default binding only
 * resolves in environments that define a global fetch.
 */

export interface ChatReply {
  session_id: string;
  text: string;
  cue: string[] | null;
  push_url: string | null;
  matched: boolean;
}

export interface NewsSummary {
  id: string;
  title: string;
  url: string;
  date: string;
  excerpt: string;
  entities: string[];
}

export interface Subscription {
  id: string;
  role: string;
  channel: string;
  topics: string[];
}

export type Fetcher = (input: string, init?: RequestInit) => Promise<Response>;

export class PortalError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`portal request failed (${status}): ${detail}`);
  }
}

async function reject(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; the status line has to do
  }
  throw new PortalError(response.status, detail);
}

export class PortalClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetcher: Fetcher = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await this.fetcher(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) await reject(response);
    return (await response.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetcher(this.baseUrl + path);
    if (!response.ok) await reject(response);
    return (await response.json()) as T;
  }

  chat(text: string, sessionId: string | null): Promise<ChatReply> {
    const payload: Record<string, unknown> = { text };
    if (sessionId !== null) payload["session_id"] = sessionId;
    return this.post<ChatReply>("/chat", payload);
  }

  news(limit = 10): Promise<NewsSummary[]> {
    return this.get<NewsSummary[]>(`/news?limit=${limit}`);
  }

  subscribe(role: string, topics: string[], channel: string): Promise<Subscription> {
    return this.post<Subscription>("/subscribe", { role, topics, channel });
  }
}
