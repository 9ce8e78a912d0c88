/** App wiring: pair-by-pair voting, progress, finalize, and result view.
 *
 * The server owns all state; every view below is re-derivable from the API,
 * so a reload mid-session resumes exactly where the annotator left off.
 */

import { api, ApiError, isPending } from "./api.js";
import type { CandidatePayload, PairPayload } from "./api.js";
import { drawField, drawSparkline } from "./render.js";
import {
  answeredCount,
  nextUnanswered,
  placementSwapped,
  progressLabel,
  sessionSeed,
} from "./state.js";

const el = (id: string) => document.getElementById(id)!;

let candidates = new Map<number, CandidatePayload>();
let pairs: PairPayload[] = [];
let seed = 0;
let currentPair: PairPayload | null = null;
let leftIsA = true;
let busy = false;

function setStatus(text: string, isError = false): void {
  const banner = el("status");
  banner.textContent = text;
  banner.className = isError ? "error" : "";
}

async function guarded<T>(work: () => Promise<T>, retry: () => void): Promise<T | null> {
  try {
    return await work();
  } catch (err) {
    const detail = err instanceof ApiError ? err.message : String(err);
    setStatus(`request failed: ${detail} — click to retry`, true);
    el("status").onclick = () => {
      el("status").onclick = null;
      setStatus("");
      retry();
    };
    return null;
  }
}

function candidateCanvas(id: number, scale = 4): HTMLCanvasElement {
  const c = candidates.get(id)!;
  const canvas = document.createElement("canvas");
  drawField(canvas, c.pixels, c.height, c.width, scale);
  return canvas;
}

function renderCandidateStrip(): void {
  const strip = el("candidates");
  strip.innerHTML = "";
  for (const c of candidates.values()) {
    const cell = document.createElement("div");
    cell.className = "cell";
    cell.appendChild(candidateCanvas(c.id, 2));
    const label = document.createElement("div");
    label.textContent = `#${c.id} ${c.source}`;
    cell.appendChild(label);
    strip.appendChild(cell);
  }
}

function renderProgress(): void {
  const answered = answeredCount(pairs);
  el("progress-label").textContent = progressLabel(answered, pairs.length);
  const bar = el("progress-fill");
  bar.style.width = pairs.length ? `${(100 * answered) / pairs.length}%` : "0";
}

function presentPair(pair: PairPayload): void {
  currentPair = pair;
  leftIsA = !placementSwapped(seed, pair.index);
  const leftId = leftIsA ? pair.a : pair.b;
  const rightId = leftIsA ? pair.b : pair.a;
  const left = el("left");
  const right = el("right");
  left.innerHTML = "";
  right.innerHTML = "";
  left.appendChild(candidateCanvas(leftId));
  right.appendChild(candidateCanvas(rightId));
  el("pair-label").textContent = `pair ${pair.index + 1} of ${pairs.length}`;
  el("vote").hidden = false;
  el("done").hidden = true;
}

async function refreshPairs(): Promise<void> {
  const payload = await guarded(() => api.pairs(), () => void refreshPairs());
  if (!payload) return;
  pairs = payload.pairs;
  renderProgress();
  const pending = nextUnanswered(pairs);
  if (pending) {
    presentPair(pending);
  } else {
    await showResult();
  }
}

async function choose(side: "left" | "right"): Promise<void> {
  if (!currentPair || busy) return;
  const pair = currentPair;
  const winner =
    side === "left" ? (leftIsA ? pair.a : pair.b) : (leftIsA ? pair.b : pair.a);
  busy = true;
  const resp = await guarded(
    () => api.choice(pair.index, winner),
    () => void choose(side),
  );
  busy = false;
  if (!resp) return;
  await refreshPairs();
}

async function showResult(): Promise<void> {
  const result = await guarded(() => api.result(), () => void showResult());
  if (!result) return;
  if (isPending(result)) {
    await refreshPairs();
    return;
  }
  el("vote").hidden = true;
  el("done").hidden = false;
  const summary = el("result-summary");
  summary.innerHTML = "";
  for (const [label, id] of [
    ["preferred", result.win_id],
    ["dispreferred", result.lose_id],
  ] as const) {
    const cell = document.createElement("div");
    cell.className = "cell";
    cell.appendChild(candidateCanvas(id));
    const caption = document.createElement("div");
    caption.textContent = `${label}: #${id}`;
    cell.appendChild(caption);
    summary.appendChild(cell);
  }
}

async function finalize(): Promise<void> {
  const resp = await guarded(() => api.finalize(), () => void finalize());
  if (!resp) return;
  setStatus("optimizing…");
  el("finalize").setAttribute("disabled", "true");
  void pollOutput();
}

async function pollOutput(): Promise<void> {
  const out = await guarded(() => api.output(), () => void pollOutput());
  if (!out) return;
  if (out.error) {
    setStatus(`optimization failed: ${out.error}`, true);
    return;
  }
  if (!out.ready) {
    setTimeout(() => void pollOutput(), 500);
    return;
  }
  setStatus("");
  el("output-view").hidden = false;
  const original = el("output-original");
  original.innerHTML = "";
  original.appendChild(candidateCanvas(0));
  const optimized = el("output-optimized");
  optimized.innerHTML = "";
  const canvas = document.createElement("canvas");
  drawField(canvas, out.pixels!, out.height!, out.width!, 6);
  optimized.appendChild(canvas);
  const curves = out.curves ?? [];
  drawSparkline(
    el("curve-dwin") as HTMLCanvasElement,
    curves.map((r) => r.d_win),
    "#2a7d46",
  );
  drawSparkline(
    el("curve-dlose") as HTMLCanvasElement,
    curves.map((r) => r.d_lose),
    "#b04a3c",
  );
  drawSparkline(
    el("curve-lr") as HTMLCanvasElement,
    curves.map((r) => r.L_r),
    "#4477cc",
  );
}

async function init(): Promise<void> {
  const payload = await guarded(() => api.candidates(), () => void init());
  if (!payload) return;
  candidates = new Map(payload.candidates.map((c) => [c.id, c]));
  renderCandidateStrip();
  const pairPayload = await guarded(() => api.pairs(), () => void init());
  if (!pairPayload) return;
  pairs = pairPayload.pairs;
  seed = sessionSeed(pairs);
  renderProgress();
  const pending = nextUnanswered(pairs);
  if (pending) presentPair(pending);
  else await showResult();
}

document.addEventListener("keydown", (ev) => {
  if (ev.key === "ArrowLeft") void choose("left");
  if (ev.key === "ArrowRight") void choose("right");
});
el("left").addEventListener("click", () => void choose("left"));
el("right").addEventListener("click", () => void choose("right"));
el("finalize").addEventListener("click", () => void finalize());

void init();
