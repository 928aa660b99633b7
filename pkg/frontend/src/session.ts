// Client-side session identity: generated once, kept in browser storage so a
// page reload continues the same server-side tracker.

const SESSION_KEY = "farm-assistant-session";

export interface StringStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function newSessionId(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return `web-${crypto.randomUUID()}`;
  }
  return `web-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export function getSessionId(store: StringStore): string {
  const existing = store.getItem(SESSION_KEY);
  if (existing) return existing;
  const id = newSessionId();
  store.setItem(SESSION_KEY, id);
  return id;
}
