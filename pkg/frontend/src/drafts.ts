/**
 * Local draft persistence, so an interrupted session resumes with the
 * partially filled judgment vector intact.  Storage is best-effort: a
 * full or disabled store degrades to losing autosave, never to losing
 * the session.
 */

import type { OutcomeSymbol } from "./api.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStore implements KeyValueStore {
  private readonly entries = new Map<string, string>();

  getItem(key: string): string | null {
    return this.entries.has(key) ? this.entries.get(key)! : null;
  }

  setItem(key: string, value: string): void {
    this.entries.set(key, value);
  }

  removeItem(key: string): void {
    this.entries.delete(key);
  }
}

export function defaultStore(): KeyValueStore {
  try {
    const storage = (globalThis as { localStorage?: KeyValueStore }).localStorage;
    if (storage) {
      // Some browsers expose localStorage but throw on first touch.
      storage.getItem("amselect.probe");
      return storage;
    }
  } catch {
    // fall through to the in-memory store
  }
  return new MemoryStore();
}

const VALID: ReadonlySet<string> = new Set(["win", "draw", "loss"]);

export class DraftStore {
  constructor(
    private readonly store: KeyValueStore,
    private readonly prefix = "amselect.draft",
  ) {}

  private key(sessionId: string, queryId: string): string {
    return `${this.prefix}.${sessionId}.${queryId}`;
  }

  load(sessionId: string, queryId: string): Record<string, OutcomeSymbol> {
    let raw: string | null = null;
    try {
      raw = this.store.getItem(this.key(sessionId, queryId));
    } catch {
      return {};
    }
    if (raw === null) return {};
    let parsed: unknown;
    try {
      parsed = JSON.parse(raw);
    } catch {
      return {};
    }
    if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
      return {};
    }
    const draft: Record<string, OutcomeSymbol> = {};
    for (const [modelId, value] of Object.entries(parsed)) {
      if (typeof value === "string" && VALID.has(value)) {
        draft[modelId] = value as OutcomeSymbol;
      }
    }
    return draft;
  }

  save(
    sessionId: string,
    queryId: string,
    outcomes: Record<string, OutcomeSymbol>,
  ): void {
    try {
      this.store.setItem(this.key(sessionId, queryId), JSON.stringify(outcomes));
    } catch {
      // quota or disabled storage; autosave silently degrades
    }
  }

  clear(sessionId: string, queryId: string): void {
    try {
      this.store.removeItem(this.key(sessionId, queryId));
    } catch {
      // nothing to do
    }
  }
}
