// Application state machine: one in-flight query, append-only history.
// The UI layer renders whatever this emits; it never reorders candidates.

import { ApiClient, ApiError, NetworkError } from "./api.js";
import type { QueryRequest, QueryResponse } from "./api.js";
import { QuerySession } from "./history.js";

export interface ViewError {
  code: string;
  retryable: boolean;
}

export interface ViewState {
  languages: string[];
  busy: boolean;
  results: QueryResponse | null;
  resultRequest: QueryRequest | null;
  error: ViewError | null;
}

export class AppController {
  readonly session = new QuerySession();
  private state: ViewState = {
    languages: [],
    busy: false,
    results: null,
    resultRequest: null,
    error: null,
  };
  private inflight: AbortController | null = null;
  private lastFailed: QueryRequest | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: ViewState) => void,
  ) {}

  getState(): ViewState {
    return this.state;
  }

  private emit(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async loadLanguages(): Promise<void> {
    try {
      const languages = await this.api.languages();
      this.emit({ languages });
    } catch (e) {
      this.emit({ error: { code: e instanceof ApiError ? e.code : "network_failure", retryable: false } });
    }
  }

  /** Submit a fresh query; empty definitions are rejected before any API call. */
  async submit(definition: string, lang: string, k: number): Promise<void> {
    if (!definition.trim()) {
      return;
    }
    await this.issue({ definition, lang, k });
  }

  /** Re-issue the stored request verbatim; out-of-range indexes are a no-op. */
  async rerun(index: number): Promise<void> {
    const request = this.session.requestAt(index);
    if (request === null) {
      return;
    }
    await this.issue(request);
  }

  /** Retry the last request that failed at the network level. */
  async retry(): Promise<void> {
    if (this.lastFailed) {
      await this.issue(this.lastFailed);
    }
  }

  private async issue(request: QueryRequest): Promise<void> {
    this.inflight?.abort(); // at most one pending render
    const controller = new AbortController();
    this.inflight = controller;
    this.emit({ busy: true, error: null });
    let response: QueryResponse;
    try {
      response = await this.api.query(request, controller.signal);
    } catch (e) {
      if (e instanceof DOMException && e.name === "AbortError") {
        return; // superseded by a newer submission
      }
      if (controller !== this.inflight) {
        return;
      }
      this.inflight = null;
      if (e instanceof ApiError) {
        this.lastFailed = null;
        this.emit({ busy: false, error: { code: e.code, retryable: false } });
      } else {
        this.lastFailed = request;
        this.emit({ busy: false, error: { code: "network_failure", retryable: true } });
      }
      return;
    }
    if (controller !== this.inflight) {
      return; // a newer request owns the view
    }
    this.inflight = null;
    this.lastFailed = null;
    this.session.append({
      request: { ...request },
      candidates: response.candidates,
      backend: response.backend,
      timestamp: Date.now(),
    });
    this.emit({ busy: false, results: response, resultRequest: request, error: null });
  }
}
