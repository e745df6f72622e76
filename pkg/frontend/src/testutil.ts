// Scriptable fetch stub for tests: responses are queued or routed by URL.

export interface Scripted {
  status?: number;
  body?: unknown;
  fail?: boolean;        // reject as a network failure
  deferMs?: number;      // resolve after a delay (for cancellation tests)
}

export interface FetchCall {
  url: string;
  init?: RequestInit;
}

export function scriptedFetch(script: Scripted[]): { fetch: typeof fetch; calls: FetchCall[] } {
  const calls: FetchCall[] = [];
  const queue = [...script];
  const impl = (async (url: string | URL | Request, init?: RequestInit) => {
    calls.push({ url: String(url), init });
    const next = queue.shift();
    if (!next) {
      throw new Error("fetch stub exhausted");
    }
    if (next.deferMs) {
      await new Promise((resolve, reject) => {
        const timer = setTimeout(resolve, next.deferMs);
        init?.signal?.addEventListener("abort", () => {
          clearTimeout(timer);
          reject(new DOMException("aborted", "AbortError"));
        });
      });
    }
    if (init?.signal?.aborted) {
      throw new DOMException("aborted", "AbortError");
    }
    if (next.fail) {
      throw new TypeError("fetch failed");
    }
    return new Response(JSON.stringify(next.body ?? {}), {
      status: next.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
  return { fetch: impl, calls };
}

export function queryResponse(words: string[], backend = "model") {
  return {
    candidates: words.map((word, i) => ({ word, score: -1 - i * 0.5, rank: i + 1 })),
    lang: "en",
    backend,
  };
}
