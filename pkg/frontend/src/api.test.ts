import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, NetworkError } from "./api.js";
import { queryResponse, scriptedFetch } from "./testutil.js";

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("posts queries and parses the response", async () => {
    const { fetch, calls } = scriptedFetch([{ body: queryResponse(["forget", "amnesia"]) }]);
    vi.stubGlobal("fetch", fetch);
    const resp = await new ApiClient().query({ definition: "d", lang: "en", k: 2 });
    expect(resp.candidates.map((c) => c.word)).toEqual(["forget", "amnesia"]);
    expect(calls[0]!.url).toBe("/api/query");
    expect(JSON.parse(String(calls[0]!.init!.body))).toEqual({ definition: "d", lang: "en", k: 2 });
  });

  it("raises ApiError with the server's error code", async () => {
    const { fetch } = scriptedFetch([{ status: 404, body: { error: "unknown_language" } }]);
    vi.stubGlobal("fetch", fetch);
    const err = await new ApiClient().query({ definition: "d", lang: "xx", k: 5 }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("unknown_language");
    expect(err.status).toBe(404);
  });

  it("raises NetworkError when fetch itself fails", async () => {
    const { fetch } = scriptedFetch([{ fail: true }]);
    vi.stubGlobal("fetch", fetch);
    const err = await new ApiClient().query({ definition: "d", lang: "en", k: 5 }).catch((e) => e);
    expect(err).toBeInstanceOf(NetworkError);
  });

  it("fetches the language list", async () => {
    const { fetch } = scriptedFetch([{ body: { languages: ["en", "hi"] } }]);
    vi.stubGlobal("fetch", fetch);
    expect(await new ApiClient().languages()).toEqual(["en", "hi"]);
  });
});
