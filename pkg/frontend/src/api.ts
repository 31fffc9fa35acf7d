/** Typed client for the search service API; newer searches cancel older ones. */

export type MathFormat = "latex" | "mathml";

export interface HighlightSpan {
  start: number;
  end: number;
  kind: "text" | "math";
}

export interface SearchHit {
  doc_id: number;
  score: number;
  title: string;
  path: string;
  snippet: string;
  highlights: HighlightSpan[];
}

export interface SearchResponse {
  query_echo: string;
  total_hits: number;
  took_ms: number;
  results: SearchHit[];
}

/** A 4xx/5xx reply carrying the service's error payload. */
export class ApiRequestError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly offset?: number,
  ) {
    super(message);
    this.name = "ApiRequestError";
  }
}

export const PAGE_SIZE = 10;

export class SearchClient {
  private inflight: AbortController | null = null;

  constructor(private readonly baseUrl: string = "") {}

  /** Runs one search; an in-flight request is aborted first. */
  async search(
    query: string,
    format: MathFormat,
    page: number,
    k: number = PAGE_SIZE,
  ): Promise<SearchResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;

    const params = new URLSearchParams({
      q: query,
      format,
      k: String(k),
      offset: String(page * k),
    });
    const response = await fetch(`${this.baseUrl}/api/search?${params.toString()}`, {
      signal: controller.signal,
    });
    const body: unknown = await response.json();
    if (!response.ok) {
      const err = body as { error?: string; offset?: number };
      throw new ApiRequestError(err.error ?? `HTTP ${response.status}`, response.status, err.offset);
    }
    return body as SearchResponse;
  }
}
