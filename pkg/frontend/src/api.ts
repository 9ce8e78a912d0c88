/** Typed client for the selection-service JSON protocol. */

export interface CandidatePayload {
  id: number;
  height: number;
  width: number;
  source: string;
  pixels: number[]; // row-major, min-max scaled to [0, 1]
}

export interface PairPayload {
  index: number;
  a: number;
  b: number;
  answered: boolean;
  winner: number | null;
}

export interface ResultPending {
  pending: true;
  answered: number;
  total: number;
}

export interface ResultDone {
  win_id: number;
  lose_id: number;
  counts: Record<string, number>;
}

export type ResultPayload = ResultPending | ResultDone;

export interface CurveRow {
  t: number;
  L_ttpo: number;
  L_r: number;
  d_win: number;
  d_lose: number;
  grad_norm: number;
}

export interface OutputPayload {
  ready: boolean;
  error?: string;
  height?: number;
  width?: number;
  pixels?: number[];
  curves?: CurveRow[];
}

export interface FinalizeResponse {
  status: string;
  output_available: boolean;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(body)}`);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body);
  }
  return body as T;
}

export const api = {
  candidates: () =>
    request<{ candidates: CandidatePayload[] }>("/api/candidates"),
  pairs: () => request<{ pairs: PairPayload[]; total: number }>("/api/pairs"),
  choice: (pairIndex: number, winnerId: number) =>
    request<{ status: string; answered: number; total: number }>("/api/choice", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pair_index: pairIndex, winner_id: winnerId }),
    }),
  result: () => request<ResultPayload>("/api/result"),
  finalize: () =>
    request<FinalizeResponse>("/api/finalize", { method: "POST" }),
  output: () => request<OutputPayload>("/api/output"),
};

export function isPending(result: ResultPayload): result is ResultPending {
  return (result as ResultPending).pending === true;
}
