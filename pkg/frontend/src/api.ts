// Wire types and fetch helpers for the mofsmith HTTP API.
//
// Everything here is a thin, typed shim over plain fetch.  The server does
// all the work; this module only moves JSON and server-sent events around.

export interface TraceEvent {
  session_id: string;
  seq: number;
  kind: "thought" | "action" | "observation" | "final" | "error" | string;
  payload: Record<string, unknown>;
  tokens: number;
}

export interface GaObjective {
  kind: string;
  label: string;
  target?: number;
  low?: number;
  high?: number;
}

export interface GaGeneration {
  index: number;
  count: number;
  mean: Array<number | null>;
  std: Array<number | null>;
  values: number[][];
  elite_best_fitness: number | null;
}

export interface GaBest {
  gene: string;
  values: number[];
  fitness: number;
}

export interface GaSummary {
  run_id: string;
  properties: string[];
  objectives: GaObjective[];
  best: GaBest;
  generations: GaGeneration[];
}

export interface GaRequest {
  plan: { properties: string[]; objectives: string[] };
  config?: {
    cycles?: number;
    parents?: number;
    children?: number;
    topologies?: string[];
    seed?: number;
  };
}

// Injectable so tests can hand in a stub; production code passes
// window.fetch bound to window.
export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  status: number;
  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // fall through: not JSON
  }
  return `request failed (${response.status})`;
}

export async function createSession(
  fetchLike: FetchLike,
  question: string,
  backend?: string,
): Promise<string> {
  const body: Record<string, unknown> = { question };
  if (backend) body.backend = backend;
  const response = await fetchLike("/api/sessions", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  const data = (await response.json()) as { session_id: string };
  return data.session_id;
}

export async function startGaRun(fetchLike: FetchLike, request: GaRequest): Promise<string> {
  const response = await fetchLike("/api/ga", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  const data = (await response.json()) as { run_id: string };
  return data.run_id;
}

export async function fetchGaSummary(fetchLike: FetchLike, runId: string): Promise<GaSummary> {
  const response = await fetchLike(`/api/ga/${encodeURIComponent(runId)}/summary`);
  if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  return (await response.json()) as GaSummary;
}

// Parse one SSE frame ("data: {...}" lines between blank-line separators).
// Multi-line data fields are joined with newlines per the SSE spec, though
// the server currently emits single-line frames.
function parseFrame(frame: string): TraceEvent | null {
  const dataLines: string[] = [];
  for (const rawLine of frame.split("\n")) {
    const line = rawLine.replace(/\r$/, "");
    if (line.startsWith("data:")) {
      dataLines.push(line.slice(5).replace(/^ /, ""));
    }
    // other SSE fields (event:, id:, retry:, comments) are ignored
  }
  if (dataLines.length === 0) return null;
  return JSON.parse(dataLines.join("\n")) as TraceEvent;
}

// Read a finite event stream, invoking onEvent for each frame in order.
//
// Deliberately not EventSource: the server closes the stream once the
// recorded trace has been replayed, and EventSource would treat that as a
// dropped connection and reconnect forever, duplicating every card.
export async function readEventStream(
  response: Response,
  onEvent: (event: TraceEvent) => void,
): Promise<void> {
  const body = response.body;
  if (body === null) {
    // Test doubles and very old fetch shims may not expose a stream.
    feedChunks(onEvent, [await response.text()], { buffer: "" });
    return;
  }
  const reader = body.getReader();
  const decoder = new TextDecoder();
  const state = { buffer: "" };
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    feedChunks(onEvent, [decoder.decode(value, { stream: true })], state, false);
  }
  feedChunks(onEvent, [decoder.decode()], state);
}

function feedChunks(
  onEvent: (event: TraceEvent) => void,
  chunks: string[],
  state: { buffer: string },
  flush = true,
): void {
  for (const chunk of chunks) state.buffer += chunk;
  let boundary: number;
  while ((boundary = state.buffer.indexOf("\n\n")) !== -1) {
    const frame = state.buffer.slice(0, boundary);
    state.buffer = state.buffer.slice(boundary + 2);
    const event = parseFrame(frame);
    if (event !== null) onEvent(event);
  }
  if (flush && state.buffer.trim() !== "") {
    const event = parseFrame(state.buffer);
    state.buffer = "";
    if (event !== null) onEvent(event);
  }
}

export async function streamSession(
  fetchLike: FetchLike,
  sessionId: string,
  onEvent: (event: TraceEvent) => void,
): Promise<void> {
  const response = await fetchLike(`/api/sessions/${encodeURIComponent(sessionId)}/events`);
  if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  await readEventStream(response, onEvent);
}
