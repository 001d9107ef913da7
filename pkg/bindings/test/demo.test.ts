import { mkdtemp, readFile, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import { trainStepDemo } from "../src/index.js";

let dir: string;

beforeAll(async () => {
  dir = await mkdtemp(join(tmpdir(), "textmorph-demo-"));
});

afterAll(async () => {
  await rm(dir, { recursive: true, force: true });
});

it("runs the native loop and parses the summary", { timeout: 120_000 }, async () => {
  const reportA = join(dir, "a.log");
  const reportB = join(dir, "b.log");
  const a = await trainStepDemo({ steps: 12, seed: 5, report: reportA });
  expect(a.windowSteps).toBe(12);
  expect(Number.isFinite(a.agentMeanEd)).toBe(true);
  expect(Number.isFinite(a.randomMeanEd)).toBe(true);
  expect(a.margin).toBeCloseTo(a.agentMeanEd - a.randomMeanEd, 3);

  const logA = await readFile(reportA);
  expect(logA.toString().trimEnd().split("\n")).toHaveLength(12);

  const b = await trainStepDemo({ steps: 12, seed: 5, report: reportB });
  expect(b).toEqual(a);
  expect(await readFile(reportB)).toEqual(logA); // same seed, same bytes
});
