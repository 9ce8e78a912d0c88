/** Pure session logic: everything here is derivable from server responses,
 * so the UI never owns truth it could lose on reload. */

import type { PairPayload } from "./api.js";

/** FNV-1a over a string; stable session fingerprint for seeding. */
export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Deterministic 32-bit PRNG (mulberry32). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Session seed derived from the stable pair listing itself. */
export function sessionSeed(pairs: PairPayload[]): number {
  return fnv1a(pairs.map((p) => `${p.index}:${p.a}-${p.b}`).join("|"));
}

/** Left/right placement per pair, seeded by the session so a reload shows
 * the same arrangement.  True means swap (candidate b on the left). */
export function placementSwapped(seed: number, pairIndex: number): boolean {
  return mulberry32(seed ^ Math.imul(pairIndex + 1, 0x9e3779b9))() < 0.5;
}

export function answeredCount(pairs: PairPayload[]): number {
  return pairs.filter((p) => p.answered).length;
}

export function nextUnanswered(pairs: PairPayload[]): PairPayload | null {
  return pairs.find((p) => !p.answered) ?? null;
}

export function progressLabel(answered: number, total: number): string {
  return `${answered}/${total}`;
}

/** Counts-based win/lose: most and least frequently chosen, ties toward the
 * lowest id.  Mirrors the server rule for display-side verification. */
export function deriveResult(counts: Record<string, number>): {
  win: number;
  lose: number;
} {
  const ids = Object.keys(counts).map(Number).sort((x, y) => x - y);
  let win = ids[0];
  let lose = ids[0];
  for (const id of ids) {
    if (counts[String(id)] > counts[String(win)]) win = id;
    if (counts[String(id)] < counts[String(lose)]) lose = id;
  }
  return { win, lose };
}

/** Round half to even, matching the numpy rounding used for PGM dumps so
 * on-screen pixels agree with file previews bit for bit. */
export function roundHalfToEven(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff < 0.5) return floor;
  if (diff > 0.5) return floor + 1;
  return floor % 2 === 0 ? floor : floor + 1;
}

/** Unit-interval pixel to 8-bit gray, identical to the PGM dump rule. */
export function unitToByte(v: number): number {
  return roundHalfToEven(Math.min(Math.max(v, 0), 1) * 255);
}
