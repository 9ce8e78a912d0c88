import { describe, expect, it } from "vitest";

import type { PairPayload } from "../src/api";
import {
  answeredCount,
  deriveResult,
  fnv1a,
  mulberry32,
  nextUnanswered,
  placementSwapped,
  progressLabel,
  roundHalfToEven,
  sessionSeed,
  unitToByte,
} from "../src/state";

function makePairs(n: number, answered: number[] = []): PairPayload[] {
  const pairs: PairPayload[] = [];
  let index = 0;
  for (let a = 0; a < n; a++) {
    for (let b = a + 1; b < n; b++) {
      pairs.push({ index, a, b, answered: answered.includes(index), winner: null });
      index++;
    }
  }
  return pairs;
}

describe("pair enumeration", () => {
  it("6 candidates give 15 pairs and an initial 0/15 progress", () => {
    const pairs = makePairs(6);
    expect(pairs.length).toBe(15);
    expect(progressLabel(answeredCount(pairs), pairs.length)).toBe("0/15");
  });

  it("next unanswered pair follows the session-stable order", () => {
    const pairs = makePairs(4, [0, 1]);
    expect(nextUnanswered(pairs)?.index).toBe(2);
    const done = makePairs(3, [0, 1, 2]);
    expect(nextUnanswered(done)).toBeNull();
  });
});

describe("seeded placement", () => {
  it("is deterministic for a given pair listing", () => {
    const pairs = makePairs(6);
    const seed = sessionSeed(pairs);
    const layout = pairs.map((p) => placementSwapped(seed, p.index));
    expect(pairs.map((p) => placementSwapped(seed, p.index))).toEqual(layout);
    expect(sessionSeed(makePairs(6))).toBe(seed);
  });

  it("actually swaps some pairs and keeps others", () => {
    const pairs = makePairs(8); // 28 pairs: both placements should occur
    const seed = sessionSeed(pairs);
    const swapped = pairs.map((p) => placementSwapped(seed, p.index));
    expect(swapped.some((s) => s)).toBe(true);
    expect(swapped.some((s) => !s)).toBe(true);
  });

  it("mulberry32 streams are reproducible", () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    for (let i = 0; i < 10; i++) expect(a()).toBe(b());
  });

  it("fnv1a distinguishes different listings", () => {
    expect(fnv1a("0:0-1")).not.toBe(fnv1a("0:0-2"));
  });
});

describe("counts-based result", () => {
  it("picks most and least frequently chosen", () => {
    expect(deriveResult({ "0": 0, "1": 1, "2": 2, "3": 3 })).toEqual({
      win: 3,
      lose: 0,
    });
  });

  it("breaks ties toward the lowest id", () => {
    expect(deriveResult({ "0": 2, "1": 2, "2": 0, "3": 0 })).toEqual({
      win: 0,
      lose: 2,
    });
  });
});

describe("pixel scaling", () => {
  it("matches the file-dump rounding rule (half to even)", () => {
    expect(roundHalfToEven(2.5)).toBe(2);
    expect(roundHalfToEven(3.5)).toBe(4);
    expect(roundHalfToEven(2.4)).toBe(2);
    expect(roundHalfToEven(2.6)).toBe(3);
  });

  it("maps the unit interval onto 0..255", () => {
    expect(unitToByte(0)).toBe(0);
    expect(unitToByte(1)).toBe(255);
    expect(unitToByte(0.5)).toBe(128);  // 127.5 rounds to even
    expect(unitToByte(-0.2)).toBe(0);   // clamped
    expect(unitToByte(1.7)).toBe(255);
  });
});
