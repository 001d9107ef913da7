/**
 * Node bindings for the textmorph CLI.
 *
 * Exposes exactly three operations: {@link augment}, {@link metrics}, and
 * {@link trainStepDemo}. All math stays on the native side; this layer
 * moves pixels and strings across the process boundary. Every call is
 * async and runs the native work in a child process, so the event loop
 * (and any worker pool above it) never blocks on augmentation.
 */

import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { runCli } from "./cli.js";
import { decodePng, encodePng } from "./png.js";

export { resolveCli } from "./cli.js";
export { decodePng, encodePng } from "./png.js";

/** Row-major 8-bit pixels plus shape metadata. */
export interface ImageBuffer {
  bytes: Uint8Array;
  height: number;
  width: number;
  channels: 1 | 3;
}

export type DeformationMode = "affine" | "similarity" | "rigid";

/** Augmentation knobs; omitted keys take the native defaults. */
export interface AugmentOptions {
  nPatches?: number;
  radius?: number;
  mode?: DeformationMode;
  step?: number;
  /** "replicate" | "constant:V" | "constant:R,G,B" */
  fill?: string;
}

export interface Metrics {
  edit_distance: number;
  cer: number;
  wer: number;
}

export interface DemoOptions {
  steps?: number;
  lr?: number;
  nPatches?: number;
  radius?: number;
  seed?: number;
  /** Per-step log path; figures land next to it. */
  report?: string;
}

export interface DemoResult {
  /** Size of the final averaging window the summary line covers. */
  windowSteps: number;
  agentMeanEd: number;
  randomMeanEd: number;
  margin: number;
}

function checkBuffer(buffer: ImageBuffer): void {
  const { bytes, height, width, channels } = buffer;
  if (channels !== 1 && channels !== 3)
    throw new Error(`channels must be 1 or 3, got ${channels}`);
  if (!Number.isInteger(height) || !Number.isInteger(width) || height < 1 || width < 1)
    throw new Error(`bad dimensions ${width}x${height}`);
  if (bytes.length !== height * width * channels)
    throw new Error(
      `byte length ${bytes.length} != ${height}*${width}*${channels}`,
    );
}

function augmentFlags(options: AugmentOptions, seed: number): string[] {
  const flags = ["--seed", String(seed)];
  if (options.nPatches !== undefined) flags.push("--n-patches", String(options.nPatches));
  if (options.radius !== undefined) flags.push("--radius", String(options.radius));
  if (options.mode !== undefined) flags.push("--mode", options.mode);
  if (options.step !== undefined) flags.push("--step", String(options.step));
  if (options.fill !== undefined) flags.push("--fill", options.fill);
  return flags;
}

/**
 * Augment one image. Equal (pixels, options, seed) give output bytes
 * identical to a direct CLI run with the same flags.
 */
export async function augment(
  buffer: ImageBuffer,
  options: AugmentOptions = {},
  seed = 0,
): Promise<ImageBuffer> {
  checkBuffer(buffer);
  const dir = await mkdtemp(join(tmpdir(), "textmorph-"));
  try {
    const inputPath = join(dir, "in.png");
    const outDir = join(dir, "out");
    await writeFile(
      inputPath,
      encodePng(buffer.bytes, buffer.width, buffer.height, buffer.channels),
    );
    await writeFile(join(dir, "in.tsv"), `${inputPath}\t\n`, "utf8");
    await runCli([
      "augment",
      join(dir, "in.tsv"),
      outDir,
      "--copies",
      "1",
      ...augmentFlags(options, seed),
    ]);
    const decoded = decodePng(await readFile(join(outDir, "in_aug00.png")));
    return decoded;
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

/** String metrics against a ground truth, as the native CLI reports them. */
export async function metrics(groundTruth: string, prediction: string): Promise<Metrics> {
  const { stdout } = await runCli(["metrics", "--", groundTruth, prediction]);
  return JSON.parse(stdout) as Metrics;
}

const FINAL_LINE =
  /final (\d+) steps: agent_mean_ed=(\S+) random_mean_ed=(\S+) margin=([+-]?\S+)/;

/** Run the native joint training demo and parse its summary. */
export async function trainStepDemo(options: DemoOptions = {}): Promise<DemoResult> {
  const args = ["train-demo"];
  if (options.steps !== undefined) args.push("--steps", String(options.steps));
  if (options.lr !== undefined) args.push("--lr", String(options.lr));
  if (options.nPatches !== undefined) args.push("--n-patches", String(options.nPatches));
  if (options.radius !== undefined) args.push("--radius", String(options.radius));
  if (options.seed !== undefined) args.push("--seed", String(options.seed));
  if (options.report !== undefined) args.push("--report", options.report);
  const { stdout } = await runCli(args);
  const m = FINAL_LINE.exec(stdout);
  if (!m) throw new Error(`could not parse demo summary from:\n${stdout}`);
  return {
    windowSteps: Number(m[1]),
    agentMeanEd: Number(m[2]),
    randomMeanEd: Number(m[3]),
    margin: Number(m[4]),
  };
}
