/**
 * Process plumbing for the native CLI.
 *
 * The executable defaults to `textmorph` on PATH; the TEXTMORPH_BIN
 * environment variable overrides it and may carry leading arguments
 * (e.g. "python3 -m textmorph").
 */

import { execFile } from "node:child_process";

export function resolveCli(): string[] {
  const override = process.env.TEXTMORPH_BIN;
  if (override && override.trim()) return override.trim().split(/\s+/);
  return ["textmorph"];
}

export interface CliResult {
  stdout: string;
  stderr: string;
}

/**
 * Run one CLI invocation off the event loop. Rejects with the native
 * error message on any nonzero exit.
 */
export function runCli(args: string[]): Promise<CliResult> {
  const [cmd, ...lead] = resolveCli();
  return new Promise((resolve, reject) => {
    execFile(
      cmd!,
      [...lead, ...args],
      { maxBuffer: 64 * 1024 * 1024 },
      (err, stdout, stderr) => {
        if (err) {
          const detail = stderr.trim() || err.message;
          reject(new Error(`textmorph ${args[0]} failed: ${detail}`));
        } else {
          resolve({ stdout, stderr });
        }
      },
    );
  });
}
