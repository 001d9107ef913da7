/**
 * Minimal PNG codec for the two pixel layouts the native CLI speaks:
 * 8-bit grayscale and 8-bit RGB, non-interlaced.
 *
 * Encoding always emits filter 0 rows; decoding handles all five standard
 * row filters, since the native side's writer picks them adaptively.
 */

import { deflateSync, inflateSync } from "node:zlib";

const SIGNATURE = Uint8Array.of(0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a);

const CRC_TABLE = new Uint32Array(256);
for (let n = 0; n < 256; n++) {
  let c = n;
  for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
  CRC_TABLE[n] = c >>> 0;
}

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts)
    for (let i = 0; i < part.length; i++)
      c = CRC_TABLE[(c ^ part[i]!) & 0xff]! ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(data.length, 0);
  head.write(type, 4, "latin1");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(head.subarray(4), data), 0);
  return Buffer.concat([head, data, crc]);
}

/** Encode row-major 8-bit pixels (1 or 3 channels) as a PNG file. */
export function encodePng(
  bytes: Uint8Array,
  width: number,
  height: number,
  channels: 1 | 3,
): Buffer {
  if (channels !== 1 && channels !== 3)
    throw new Error(`channels must be 1 or 3, got ${channels}`);
  if (bytes.length !== width * height * channels)
    throw new Error(
      `byte length ${bytes.length} != ${width}x${height}x${channels}`,
    );

  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = channels === 1 ? 0 : 2; // color type: gray | truecolor
  // compression, filter, interlace all 0

  const stride = width * channels;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    raw.set(bytes.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }

  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

export interface DecodedPng {
  bytes: Uint8Array;
  width: number;
  height: number;
  channels: 1 | 3;
}

/** Decode an 8-bit grayscale or RGB, non-interlaced PNG file. */
export function decodePng(file: Uint8Array): DecodedPng {
  const buf = Buffer.from(file.buffer, file.byteOffset, file.byteLength);
  for (let i = 0; i < 8; i++)
    if (buf[i] !== SIGNATURE[i]) throw new Error("not a PNG file");

  let width = 0;
  let height = 0;
  let channels: 1 | 3 = 1;
  const idat: Buffer[] = [];
  let pos = 8;
  let sawEnd = false;
  while (pos + 8 <= buf.length) {
    const len = buf.readUInt32BE(pos);
    const type = buf.toString("latin1", pos + 4, pos + 8);
    const data = buf.subarray(pos + 8, pos + 8 + len);
    if (data.length !== len) throw new Error("truncated PNG chunk");
    if (type === "IHDR") {
      width = data.readUInt32BE(0);
      height = data.readUInt32BE(4);
      const depth = data[8];
      const color = data[9];
      if (depth !== 8) throw new Error(`unsupported bit depth ${depth}`);
      if (color === 0) channels = 1;
      else if (color === 2) channels = 3;
      else throw new Error(`unsupported color type ${color}`);
      if (data[12] !== 0) throw new Error("interlaced PNG not supported");
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      sawEnd = true;
      break;
    }
    pos += 12 + len; // len + type + data + crc
  }
  if (!sawEnd || width === 0 || height === 0)
    throw new Error("malformed PNG: missing IHDR or IEND");

  const raw = inflateSync(Buffer.concat(idat));
  const stride = width * channels;
  if (raw.length !== (stride + 1) * height)
    throw new Error(
      `decompressed size ${raw.length} != ${(stride + 1) * height}`,
    );

  const out = new Uint8Array(stride * height);
  const bpp = channels;
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)]!;
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const o = y * stride;
    const prior = y > 0 ? out.subarray(o - stride, o) : null;
    for (let i = 0; i < stride; i++) {
      const x = row[i]!;
      const left = i >= bpp ? out[o + i - bpp]! : 0;
      const up = prior ? prior[i]! : 0;
      const upLeft = prior && i >= bpp ? prior[i - bpp]! : 0;
      let v: number;
      switch (filter) {
        case 0:
          v = x;
          break;
        case 1:
          v = x + left;
          break;
        case 2:
          v = x + up;
          break;
        case 3:
          v = x + ((left + up) >> 1);
          break;
        case 4:
          v = x + paeth(left, up, upLeft);
          break;
        default:
          throw new Error(`bad row filter ${filter}`);
      }
      out[o + i] = v & 0xff;
    }
  }
  return { bytes: out, width, height, channels };
}
