// Client-side query history: append-only within a session, never persisted.

import type { Candidate, QueryRequest } from "./api.js";

export interface HistoryEntry {
  request: QueryRequest;
  candidates: Candidate[];
  backend: string;
  timestamp: number;
}

export class QuerySession {
  private readonly entries: HistoryEntry[] = [];

  get length(): number {
    return this.entries.length;
  }

  /** Snapshot list, newest first (the stored entries are never mutated). */
  list(): readonly HistoryEntry[] {
    return [...this.entries].reverse();
  }

  append(entry: HistoryEntry): void {
    this.entries.push(entry);
  }

  /**
   * The stored request for replay, exactly as originally issued.
   * `index` addresses the append order (0 = oldest). Out of range -> null.
   */
  requestAt(index: number): QueryRequest | null {
    const entry = this.entries[index];
    if (!entry) {
      return null;
    }
    // copy so callers cannot mutate history through the returned object
    return { ...entry.request };
  }

  at(index: number): HistoryEntry | null {
    return this.entries[index] ?? null;
  }
}
