import { deflateSync } from "node:zlib";
import { describe, expect, it } from "vitest";

import { decodePng, encodePng } from "../src/png.js";
import { prng, randomBytes } from "./prng.js";

describe("codec round trip", () => {
  it("grayscale", () => {
    const next = prng(1);
    const bytes = randomBytes(next, 40 * 17);
    const file = encodePng(bytes, 40, 17, 1);
    const back = decodePng(file);
    expect(back.width).toBe(40);
    expect(back.height).toBe(17);
    expect(back.channels).toBe(1);
    expect(back.bytes).toEqual(bytes);
  });

  it("rgb", () => {
    const next = prng(2);
    const bytes = randomBytes(next, 23 * 9 * 3);
    const back = decodePng(encodePng(bytes, 23, 9, 3));
    expect(back.channels).toBe(3);
    expect(back.bytes).toEqual(bytes);
  });

  it("1x1", () => {
    const back = decodePng(encodePng(Uint8Array.of(137), 1, 1, 1));
    expect(back.bytes).toEqual(Uint8Array.of(137));
  });
});

describe("encode validation", () => {
  it("rejects channel counts other than 1 and 3", () => {
    expect(() => encodePng(new Uint8Array(8), 2, 2, 2 as never)).toThrow(/channels/);
  });

  it("rejects byte length mismatch", () => {
    expect(() => encodePng(new Uint8Array(7), 2, 2, 1)).toThrow(/byte length/);
  });
});

describe("decode validation", () => {
  it("rejects non-PNG bytes", () => {
    expect(() => decodePng(new Uint8Array(16))).toThrow(/not a PNG/);
  });

  it("rejects truncated files", () => {
    const file = encodePng(new Uint8Array(4), 2, 2, 1);
    expect(() => decodePng(file.subarray(0, file.length - 6))).toThrow();
  });
});

// Hand-built file exercising every row filter; the reference pixels are
// forward-filtered here, so a decoder bug cannot cancel out.
it("decodes all five row filters", () => {
  const width = 4;
  const channels = 3;
  const stride = width * channels;
  const next = prng(3);
  const pixels = randomBytes(next, stride * 5);

  const paeth = (a: number, b: number, c: number) => {
    const p = a + b - c;
    const pa = Math.abs(p - a);
    const pb = Math.abs(p - b);
    const pc = Math.abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
  };

  const raw = Buffer.alloc((stride + 1) * 5);
  for (let y = 0; y < 5; y++) {
    raw[y * (stride + 1)] = y; // row y uses filter y
    for (let i = 0; i < stride; i++) {
      const cur = pixels[y * stride + i]!;
      const left = i >= channels ? pixels[y * stride + i - channels]! : 0;
      const up = y > 0 ? pixels[(y - 1) * stride + i]! : 0;
      const upLeft = y > 0 && i >= channels ? pixels[(y - 1) * stride + i - channels]! : 0;
      let filtered: number;
      switch (y) {
        case 0: filtered = cur; break;
        case 1: filtered = cur - left; break;
        case 2: filtered = cur - up; break;
        case 3: filtered = cur - ((left + up) >> 1); break;
        default: filtered = cur - paeth(left, up, upLeft);
      }
      raw[y * (stride + 1) + 1 + i] = filtered & 0xff;
    }
  }

  // reuse the encoder's container, swap in our hand-filtered IDAT
  const template = encodePng(pixels, width, 5, channels);
  const ihdrEnd = 8 + 12 + 13;
  const iend = template.subarray(template.length - 12);
  const idatData = deflateSync(raw);
  const idat = Buffer.alloc(12 + idatData.length);
  idat.writeUInt32BE(idatData.length, 0);
  idat.write("IDAT", 4, "latin1");
  idatData.copy(idat, 8);
  // chunk CRC per the PNG format: computed over type + data
  const crcTable = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    crcTable[n] = c >>> 0;
  }
  let c = 0xffffffff;
  for (const b of idat.subarray(4, 8 + idatData.length))
    c = crcTable[(c ^ b) & 0xff]! ^ (c >>> 8);
  idat.writeUInt32BE((c ^ 0xffffffff) >>> 0, 8 + idatData.length);

  const file = Buffer.concat([template.subarray(0, ihdrEnd), idat, iend]);
  expect(decodePng(file).bytes).toEqual(pixels);
});
