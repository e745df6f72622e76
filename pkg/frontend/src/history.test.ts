import { describe, expect, it } from "vitest";

import { QuerySession } from "./history.js";
import type { HistoryEntry } from "./history.js";

function entry(definition: string, ts = 1000): HistoryEntry {
  return {
    request: { definition, lang: "en", k: 10 },
    candidates: [{ word: "w", score: -1.5, rank: 1 }],
    backend: "model",
    timestamp: ts,
  };
}

describe("QuerySession", () => {
  it("is append-only and lists newest first", () => {
    const s = new QuerySession();
    s.append(entry("first", 1));
    s.append(entry("second", 2));
    expect(s.length).toBe(2);
    expect(s.list().map((e) => e.request.definition)).toEqual(["second", "first"]);
  });

  it("returns the stored request for replay", () => {
    const s = new QuerySession();
    s.append(entry("a definition"));
    expect(s.requestAt(0)).toEqual({ definition: "a definition", lang: "en", k: 10 });
  });

  it("returns a copy so history cannot be mutated through it", () => {
    const s = new QuerySession();
    s.append(entry("original"));
    const req = s.requestAt(0)!;
    req.definition = "tampered";
    expect(s.requestAt(0)!.definition).toBe("original");
  });

  it("answers null for out-of-range indexes", () => {
    const s = new QuerySession();
    expect(s.requestAt(0)).toBeNull();
    s.append(entry("x"));
    expect(s.requestAt(1)).toBeNull();
    expect(s.requestAt(-1)).toBeNull();
  });
});
