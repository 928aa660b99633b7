// Thin client for the assistant's HTTP API. The base URL is decided at
// runtime so the same static bundle can point at any server.

export interface DebugInfo {
  intent: string;
  ranking: [string, number][];
  entities: { entity: string; value: string; surface: string }[];
  actions: string[];
}

export interface ChatResult {
  responses: string[];
  // raw payload from ?debug=1; shape is validated only at render time
  debug?: unknown;
}

export class ChatHttpError extends Error {
  status: number;
  constructor(status: number, detail: string) {
    super(`server returned ${status}: ${detail}`);
    this.status = status;
  }
}

export class ChatTimeoutError extends Error {
  constructor() {
    super("request timed out");
  }
}

export const REQUEST_TIMEOUT_MS = 10_000;
const BASE_KEY = "farm-assistant-api-base";

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

declare global {
  interface Window {
    FARM_ASSISTANT_API?: string;
  }
}

export function apiBase(): string {
  if (typeof window !== "undefined" && window.FARM_ASSISTANT_API) {
    return window.FARM_ASSISTANT_API.replace(/\/+$/, "");
  }
  if (typeof localStorage !== "undefined") {
    const stored = localStorage.getItem(BASE_KEY);
    if (stored) return stored.replace(/\/+$/, "");
  }
  return "";
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") return body.error;
    return JSON.stringify(body);
  } catch {
    return res.statusText || "request failed";
  }
}

export async function sendChat(
  sender: string,
  message: string,
  debug: boolean,
  fetchImpl: FetchLike = fetch,
  timeoutMs: number = REQUEST_TIMEOUT_MS,
): Promise<ChatResult> {
  const url = `${apiBase()}/api/chat${debug ? "?debug=1" : ""}`;
  const controller = new AbortController();
  const timer = setTimeout(() => controller.abort(), timeoutMs);
  let res: Response;
  try {
    res = await fetchImpl(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sender, message }),
      signal: controller.signal,
    });
  } catch (err) {
    if (controller.signal.aborted) throw new ChatTimeoutError();
    throw err;
  } finally {
    clearTimeout(timer);
  }

  if (!res.ok) throw new ChatHttpError(res.status, await errorDetail(res));

  // plain POST -> [{"text": ...}, ...]; with ?debug=1 the same list sits
  // under "responses" next to the debug block
  const body = await res.json();
  if (Array.isArray(body)) {
    return { responses: body.map(rowText) };
  }
  if (body && Array.isArray(body.responses)) {
    return { responses: body.responses.map(rowText), debug: body.debug };
  }
  throw new ChatHttpError(res.status, "unexpected response shape");
}

function rowText(row: unknown): string {
  if (row && typeof row === "object" && "text" in row) {
    return String((row as { text: unknown }).text);
  }
  return String(row);
}

export async function checkHealth(
  fetchImpl: FetchLike = fetch,
): Promise<{ status: string; model_version?: string } | null> {
  try {
    const res = await fetchImpl(`${apiBase()}/api/health`);
    if (!res.ok) return null;
    return await res.json();
  } catch {
    return null;
  }
}
