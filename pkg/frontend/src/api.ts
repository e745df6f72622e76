// Typed client for the reverse dictionary HTTP API.

export interface Candidate {
  word: string;
  score: number;
  rank: number;
}

export interface QueryRequest {
  definition: string;
  lang: string;
  k: number;
}

export interface QueryResponse {
  candidates: Candidate[];
  lang: string;
  backend: string;
}

/** A 4xx/5xx response carrying the server's error code (e.g. "unknown_language"). */
export class ApiError extends Error {
  constructor(readonly status: number, readonly code: string) {
    super(`${code} (HTTP ${status})`);
    this.name = "ApiError";
  }
}

/** Network-level failure: the request never produced an HTTP response. */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super("network failure");
    this.name = "NetworkError";
    this.cause = cause;
  }
}

async function parseError(resp: Response): Promise<never> {
  let code = `http_${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: string };
    if (body && typeof body.error === "string") {
      code = body.error;
    }
  } catch {
    // non-JSON error body; keep the status-based code
  }
  throw new ApiError(resp.status, code);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async languages(): Promise<string[]> {
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/api/languages`);
    } catch (e) {
      throw new NetworkError(e);
    }
    if (!resp.ok) {
      return parseError(resp);
    }
    const body = (await resp.json()) as { languages: string[] };
    return body.languages;
  }

  async query(request: QueryRequest, signal?: AbortSignal): Promise<QueryResponse> {
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/api/query`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal,
      });
    } catch (e) {
      if (e instanceof DOMException && e.name === "AbortError") {
        throw e;
      }
      throw new NetworkError(e);
    }
    if (!resp.ok) {
      return parseError(resp);
    }
    return (await resp.json()) as QueryResponse;
  }
}
