import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { MaskEditor, diffOutsideMask, mulberry32 } from "../src/mask";

const fixture = (name: string): Uint8Array =>
  new Uint8Array(readFileSync(fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url))));

describe("mask editor tools", () => {
  it("rectangle tool zeros exactly the dragged region", () => {
    const ed = new MaskEditor(64, 64);
    ed.rectangle(10, 10, 40, 40);
    for (let r = 0; r < 64; r++) {
      for (let c = 0; c < 64; c++) {
        const inside = r >= 10 && r < 40 && c >= 10 && c < 40;
        expect(ed.bits[r * 64 + c]).toBe(inside ? 0 : 1);
      }
    }
  });

  it("rectangle tool 64-square on 128x128 exports the exact service preset bytes", () => {
    const ed = new MaskEditor(128, 128);
    ed.rectangle(32, 32, 96, 96);
    expect(ed.toPng()).toEqual(fixture("center64.png"));
  });

  it("center-square preset equals the same rectangle", () => {
    const byPreset = new MaskEditor(128, 128);
    byPreset.presetCenterSquare(64);
    const byRect = new MaskEditor(128, 128);
    byRect.rectangle(32, 32, 96, 96);
    expect(byPreset.bits).toEqual(byRect.bits);
    expect(byPreset.missingFraction()).toBeCloseTo(0.25, 12);
  });

  it("undo restores the previous state bit-exactly, redo reapplies it", () => {
    const ed = new MaskEditor(32, 32);
    ed.presetNoise(0.5, 9);
    const afterNoise = ed.bits.slice();
    ed.brush(16, 16, 4);
    const afterBrush = ed.bits.slice();
    expect(ed.undo()).toBe(true);
    expect(ed.bits).toEqual(afterNoise);
    expect(ed.redo()).toBe(true);
    expect(ed.bits).toEqual(afterBrush);
    expect(ed.undo()).toBe(true);
    expect(ed.undo()).toBe(true);
    expect(ed.bits).toEqual(new Uint8Array(32 * 32).fill(1));
    expect(ed.undo()).toBe(false);
  });

  it("a new stroke discards the redo branch", () => {
    const ed = new MaskEditor(16, 16);
    ed.rectangle(0, 0, 4, 4);
    ed.undo();
    ed.brush(8, 8, 2);
    expect(ed.redo()).toBe(false);
  });

  it("brush marks a disc and respects edges", () => {
    const ed = new MaskEditor(32, 32);
    ed.brush(0, 0, 3);
    expect(ed.bits[0]).toBe(0);
    expect(ed.bits[3]).toBe(0); // (0,3) at distance 3
    expect(ed.bits[4]).toBe(1);
    const frac = ed.missingFraction();
    expect(frac).toBeGreaterThan(0);
    expect(frac).toBeLessThan(0.05);
  });

  it("noise preset hits the requested missing probability and is seed-stable", () => {
    const a = new MaskEditor(128, 128);
    a.presetNoise(0.75, 123);
    const b = new MaskEditor(128, 128);
    b.presetNoise(0.75, 123);
    expect(a.bits).toEqual(b.bits);
    expect(Math.abs(a.missingFraction() - 0.75)).toBeLessThan(0.02);
    const c = new MaskEditor(128, 128);
    c.presetNoise(0.75, 124);
    expect(c.bits).not.toEqual(a.bits);
  });

  it("multi-square preset keeps every hole inside the frame", () => {
    for (let seed = 0; seed < 25; seed++) {
      const ed = new MaskEditor(128, 128);
      ed.presetMultiSquare(5, 31, seed);
      for (let c = 0; c < 128; c++) {
        // border rows/cols can only be missing if a square touches the edge,
        // never because one leaked outside
        expect(ed.missingFraction()).toBeLessThanOrEqual((5 * 31 * 31) / (128 * 128));
      }
    }
  });

  it("png export and import are inverse under the 128 threshold", () => {
    const ed = new MaskEditor(48, 48);
    ed.presetNoise(0.4, 77);
    const back = MaskEditor.fromPng(ed.toPng());
    expect(back.width).toBe(48);
    expect(back.bits).toEqual(ed.bits);
  });

  it("mulberry32 is deterministic and within [0, 1)", () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    for (let i = 0; i < 1000; i++) {
      const x = a();
      expect(x).toBe(b());
      expect(x).toBeGreaterThanOrEqual(0);
      expect(x).toBeLessThan(1);
    }
  });
});

describe("diffOutsideMask", () => {
  it("counts only valid-region differences", () => {
    const w = 4;
    const h = 2;
    const bits = new Uint8Array([1, 1, 0, 1, 1, 0, 1, 1]);
    const a = new Uint8Array(w * h * 4).fill(10);
    const b = a.slice();
    b[2 * 4] = 99; // missing pixel, ignored
    expect(diffOutsideMask(a, b, bits, w, h)).toBe(0);
    b[0] = 99; // valid pixel
    expect(diffOutsideMask(a, b, bits, w, h)).toBe(1);
    expect(() => diffOutsideMask(a, new Uint8Array(3), bits, w, h)).toThrow("size");
  });
});
