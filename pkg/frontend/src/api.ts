/**
 * Thin client for the diagnostics API. Request bodies are built by pure
 * functions so tests can pin their exact shape without a network.
 */

import { QueryRequestBody, QueryResponse } from "./types";

export interface QueryOptions {
  k?: number;
  snippetMethod?: "naive_first" | "sliding_window";
}

export function buildQueryBody(query: string, opts: QueryOptions = {}): QueryRequestBody {
  const body: QueryRequestBody = { query };
  if (opts.k !== undefined) body.k = opts.k;
  if (opts.snippetMethod !== undefined) body.snippet_method = opts.snippetMethod;
  return body;
}

/**
 * A rewrite body carries exactly the excluded set: sorted, deduplicated,
 * nothing added, nothing dropped. The backend treats this list as the
 * complete exclusion state, not a delta.
 */
export function buildRewriteBody(
  query: string,
  excluded: ReadonlySet<number>,
  opts: QueryOptions = {},
): QueryRequestBody {
  const body = buildQueryBody(query, opts);
  body.excluded_doc_ids = [...excluded].sort((a, b) => a - b);
  return body;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly apiKey: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post(path: string, body: QueryRequestBody): Promise<QueryResponse> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-API-Key": this.apiKey,
      },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = (await resp.json()) as { error?: string };
        if (parsed.error) detail = parsed.error;
      } catch {
        // keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as QueryResponse;
  }

  /** Plain query; the server rejects exclusions on this path. */
  query(query: string, opts: QueryOptions = {}): Promise<QueryResponse> {
    return this.post("/api/query", buildQueryBody(query, opts));
  }

  /** Re-ask with documents excluded; pass the full toggle state. */
  rewrite(
    query: string,
    excluded: ReadonlySet<number>,
    opts: QueryOptions = {},
  ): Promise<QueryResponse> {
    return this.post("/api/rewrite", buildRewriteBody(query, excluded, opts));
  }

  async health(): Promise<{ status: string; workers: number; backend: string }> {
    const resp = await this.fetchFn(this.baseUrl + "/api/health");
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return (await resp.json()) as { status: string; workers: number; backend: string };
  }
}
