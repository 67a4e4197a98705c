// Deterministic 8-bit grayscale PNG, byte-compatible with the service's mask
// convention: filter 0 on every row, zlib header 0x78 0x01, stored deflate
// blocks. The same pixels always produce the same file, which is what makes
// "is my mask identical to the server preset" a byte comparison.

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];
const STORED_BLOCK_MAX = 65535;

let crcTable: Uint32Array | null = null;

function crc32(data: Uint8Array): number {
  if (!crcTable) {
    crcTable = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      crcTable[n] = c >>> 0;
    }
  }
  let crc = 0xffffffff;
  for (let i = 0; i < data.length; i++) crc = crcTable[(crc ^ data[i]) & 0xff] ^ (crc >>> 8);
  return (crc ^ 0xffffffff) >>> 0;
}

function adler32(data: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

class ByteWriter {
  private parts: Uint8Array[] = [];

  push(...bytes: number[]): void {
    this.parts.push(Uint8Array.from(bytes));
  }

  pushArray(arr: Uint8Array): void {
    this.parts.push(arr);
  }

  pushU32be(v: number): void {
    this.push((v >>> 24) & 0xff, (v >>> 16) & 0xff, (v >>> 8) & 0xff, v & 0xff);
  }

  bytes(): Uint8Array {
    let total = 0;
    for (const p of this.parts) total += p.length;
    const out = new Uint8Array(total);
    let pos = 0;
    for (const p of this.parts) {
      out.set(p, pos);
      pos += p.length;
    }
    return out;
  }
}

function chunk(tag: string, payload: Uint8Array): Uint8Array {
  const w = new ByteWriter();
  w.pushU32be(payload.length);
  const tagBytes = Uint8Array.from(tag, (c) => c.charCodeAt(0));
  w.pushArray(tagBytes);
  w.pushArray(payload);
  const crcInput = new Uint8Array(4 + payload.length);
  crcInput.set(tagBytes, 0);
  crcInput.set(payload, 4);
  w.pushU32be(crc32(crcInput));
  return w.bytes();
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const w = new ByteWriter();
  w.push(0x78, 0x01);
  let pos = 0;
  for (;;) {
    const block = raw.subarray(pos, pos + STORED_BLOCK_MAX);
    pos += block.length;
    const final = pos >= raw.length ? 1 : 0;
    w.push(final);
    w.push(block.length & 0xff, (block.length >>> 8) & 0xff);
    const nlen = block.length ^ 0xffff;
    w.push(nlen & 0xff, (nlen >>> 8) & 0xff);
    w.pushArray(block);
    if (final) break;
  }
  w.pushU32be(adler32(raw));
  return w.bytes();
}

/** Encode height x width 8-bit pixels (row-major) as a grayscale PNG. */
export function encodeGrayPng(pixels: Uint8Array, width: number, height: number): Uint8Array {
  if (pixels.length !== width * height) {
    throw new Error(`pixel count ${pixels.length} does not match ${width}x${height}`);
  }
  const raw = new Uint8Array(height * (width + 1));
  for (let i = 0; i < height; i++) {
    raw[i * (width + 1)] = 0; // filter type 0
    raw.set(pixels.subarray(i * width, (i + 1) * width), i * (width + 1) + 1);
  }
  const ihdr = new ByteWriter();
  ihdr.pushU32be(width);
  ihdr.pushU32be(height);
  ihdr.push(8, 0, 0, 0, 0); // bit depth 8, grayscale, deflate, filter 0, no interlace
  const out = new ByteWriter();
  out.push(...SIGNATURE);
  out.pushArray(chunk("IHDR", ihdr.bytes()));
  out.pushArray(chunk("IDAT", zlibStored(raw)));
  out.pushArray(chunk("IEND", new Uint8Array(0)));
  return out.bytes();
}

export interface GrayImage {
  width: number;
  height: number;
  pixels: Uint8Array;
}

function readU32be(data: Uint8Array, pos: number): number {
  return ((data[pos] << 24) | (data[pos + 1] << 16) | (data[pos + 2] << 8) | data[pos + 3]) >>> 0;
}

function inflateStored(stream: Uint8Array): Uint8Array {
  if (stream.length < 6 || (stream[0] & 0x0f) !== 8) {
    throw new Error("not a zlib stream");
  }
  const parts: Uint8Array[] = [];
  let pos = 2;
  for (;;) {
    if (pos >= stream.length) throw new Error("truncated zlib stream");
    const header = stream[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("compressed deflate blocks are not supported here");
    }
    const len = stream[pos + 1] | (stream[pos + 2] << 8);
    const nlen = stream[pos + 3] | (stream[pos + 4] << 8);
    if ((len ^ 0xffff) !== nlen) throw new Error("corrupt stored block header");
    parts.push(stream.subarray(pos + 5, pos + 5 + len));
    pos += 5 + len;
    if (header & 1) break;
  }
  let total = 0;
  for (const p of parts) total += p.length;
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  if (adler32(out) !== readU32be(stream, pos)) throw new Error("zlib checksum mismatch");
  return out;
}

/**
 * Decode a grayscale PNG produced by encodeGrayPng (or the service). Only the
 * stored-deflate subset is handled; arbitrary PNGs belong to the browser's
 * native decoder, not this one.
 */
export function decodeGrayPng(data: Uint8Array): GrayImage {
  for (let i = 0; i < 8; i++) {
    if (data[i] !== SIGNATURE[i]) throw new Error("not a PNG");
  }
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  let pos = 8;
  while (pos < data.length) {
    const len = readU32be(data, pos);
    const tag = String.fromCharCode(data[pos + 4], data[pos + 5], data[pos + 6], data[pos + 7]);
    const payload = data.subarray(pos + 8, pos + 8 + len);
    if (tag === "IHDR") {
      width = readU32be(payload, 0);
      height = readU32be(payload, 4);
      if (payload[8] !== 8 || payload[9] !== 0) {
        throw new Error("only 8-bit grayscale is supported");
      }
    } else if (tag === "IDAT") {
      idat.push(payload);
    } else if (tag === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  let total = 0;
  for (const p of idat) total += p.length;
  const stream = new Uint8Array(total);
  let at = 0;
  for (const p of idat) {
    stream.set(p, at);
    at += p.length;
  }
  const raw = inflateStored(stream);
  if (raw.length !== height * (width + 1)) throw new Error("unexpected scanline data length");
  const pixels = new Uint8Array(width * height);
  for (let i = 0; i < height; i++) {
    if (raw[i * (width + 1)] !== 0) throw new Error("only filter type 0 is supported");
    pixels.set(raw.subarray(i * (width + 1) + 1, (i + 1) * (width + 1)), i * width);
  }
  return { width, height, pixels };
}
