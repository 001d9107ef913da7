import { describe, expect, it } from "vitest";

import { augment, type ImageBuffer } from "../src/index.js";

const good: ImageBuffer = {
  bytes: new Uint8Array(6 * 10),
  height: 6,
  width: 10,
  channels: 1,
};

describe("buffer validation (rejected before any native call)", () => {
  it("channels = 2", async () => {
    await expect(
      augment({ ...good, channels: 2 as never, bytes: new Uint8Array(120) }),
    ).rejects.toThrow(/channels must be 1 or 3/);
  });

  it("byte length mismatch", async () => {
    await expect(
      augment({ ...good, bytes: new Uint8Array(59) }),
    ).rejects.toThrow(/byte length/);
  });

  it("non-integer dimensions", async () => {
    await expect(
      augment({ ...good, height: 6.5, bytes: new Uint8Array(65) }),
    ).rejects.toThrow(/dimensions/);
  });
});

it("native errors surface with the native message", async () => {
  // a 1-pixel-tall image is below the native minimum layout size
  await expect(
    augment({ bytes: new Uint8Array(10), height: 1, width: 10, channels: 1 }),
  ).rejects.toThrow(/augment failed/);
});
