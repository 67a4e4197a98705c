// Mask editing model. Bits are 1 = valid, 0 = missing, matching the service
// convention (PNG gray value 255 = valid, 0 = missing). All tools mutate
// through an undo stack so any stroke can be rolled back bit-exactly.

import { encodeGrayPng, decodeGrayPng } from "./png";

/** Deterministic 32-bit PRNG for client-side scenario presets. */
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

export class MaskEditor {
  readonly width: number;
  readonly height: number;
  bits: Uint8Array;
  private undoStack: Uint8Array[] = [];
  private redoStack: Uint8Array[] = [];

  constructor(width: number, height: number) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
      throw new Error(`bad mask size ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.bits = new Uint8Array(width * height).fill(1);
  }

  private snapshot(): void {
    this.undoStack.push(this.bits.slice());
    this.redoStack.length = 0;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.redoStack.push(this.bits);
    this.bits = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) return false;
    this.undoStack.push(this.bits);
    this.bits = next;
    return true;
  }

  /** Reset every pixel to valid (one undoable action). */
  clear(): void {
    this.snapshot();
    this.bits.fill(1);
  }

  /** Mark the half-open rectangle [r0, r1) x [c0, c1) as missing. */
  rectangle(r0: number, c0: number, r1: number, c1: number): void {
    this.snapshot();
    const ri = Math.max(0, Math.min(r0, r1));
    const rj = Math.min(this.height, Math.max(r0, r1));
    const ci = Math.max(0, Math.min(c0, c1));
    const cj = Math.min(this.width, Math.max(c0, c1));
    for (let r = ri; r < rj; r++) {
      this.bits.fill(0, r * this.width + ci, r * this.width + cj);
    }
  }

  /** Mark a disc of the given radius as missing (a single brush dab). */
  brush(row: number, col: number, radius: number): void {
    this.snapshot();
    this.brushContinue(row, col, radius);
  }

  /** Extend the current stroke without pushing a new undo entry. */
  brushContinue(row: number, col: number, radius: number): void {
    const r2 = radius * radius;
    const rLo = Math.max(0, Math.floor(row - radius));
    const rHi = Math.min(this.height - 1, Math.ceil(row + radius));
    const cLo = Math.max(0, Math.floor(col - radius));
    const cHi = Math.min(this.width - 1, Math.ceil(col + radius));
    for (let r = rLo; r <= rHi; r++) {
      for (let c = cLo; c <= cHi; c++) {
        const dr = r - row;
        const dc = c - col;
        if (dr * dr + dc * dc <= r2) this.bits[r * this.width + c] = 0;
      }
    }
  }

  /** Centered square hole; offsets floor like the service's preset. */
  presetCenterSquare(side: number): void {
    if (side < 1 || side > Math.min(this.width, this.height)) {
      throw new Error(`square side ${side} does not fit ${this.width}x${this.height}`);
    }
    const r0 = Math.floor((this.height - side) / 2);
    const c0 = Math.floor((this.width - side) / 2);
    this.rectangle(r0, c0, r0 + side, c0 + side);
  }

  /** Bernoulli noise: each pixel missing with probability p. */
  presetNoise(p: number, seed: number): void {
    if (!(p >= 0 && p <= 1)) throw new Error(`missing probability ${p} outside [0, 1]`);
    this.snapshot();
    const rand = mulberry32(seed);
    for (let i = 0; i < this.bits.length; i++) {
      this.bits[i] = rand() < p ? 0 : 1;
    }
  }

  /** Several square holes, each fully inside the frame. */
  presetMultiSquare(count: number, side: number, seed: number): void {
    if (side < 1 || side > Math.min(this.width, this.height)) {
      throw new Error(`square side ${side} does not fit ${this.width}x${this.height}`);
    }
    this.snapshot();
    const rand = mulberry32(seed);
    for (let k = 0; k < count; k++) {
      const r0 = Math.floor(rand() * (this.height - side + 1));
      const c0 = Math.floor(rand() * (this.width - side + 1));
      for (let r = r0; r < r0 + side; r++) {
        this.bits.fill(0, r * this.width + c0, r * this.width + c0 + side);
      }
    }
  }

  missingFraction(): number {
    let missing = 0;
    for (let i = 0; i < this.bits.length; i++) if (this.bits[i] === 0) missing++;
    return missing / this.bits.length;
  }

  /** Export in the service wire format: gray PNG, 0 missing, 255 valid. */
  toPng(): Uint8Array {
    const pixels = new Uint8Array(this.bits.length);
    for (let i = 0; i < this.bits.length; i++) pixels[i] = this.bits[i] ? 255 : 0;
    return encodeGrayPng(pixels, this.width, this.height);
  }

  static fromPng(data: Uint8Array): MaskEditor {
    const img = decodeGrayPng(data);
    const editor = new MaskEditor(img.width, img.height);
    for (let i = 0; i < img.pixels.length; i++) {
      editor.bits[i] = img.pixels[i] >= 128 ? 1 : 0;
    }
    return editor;
  }
}

/**
 * Count pixels that differ outside the missing region. Buffers are RGBA
 * (4 bytes per pixel); the result must be zero for any honest inpaint
 * response, since valid pixels pass through the model untouched.
 */
export function diffOutsideMask(
  a: Uint8Array,
  b: Uint8Array,
  bits: Uint8Array,
  width: number,
  height: number,
): number {
  if (a.length !== width * height * 4 || b.length !== a.length) {
    throw new Error("buffer size does not match mask size");
  }
  let bad = 0;
  for (let i = 0; i < width * height; i++) {
    if (bits[i] !== 1) continue;
    const o = i * 4;
    if (a[o] !== b[o] || a[o + 1] !== b[o + 1] || a[o + 2] !== b[o + 2] || a[o + 3] !== b[o + 3]) {
      bad++;
    }
  }
  return bad;
}
