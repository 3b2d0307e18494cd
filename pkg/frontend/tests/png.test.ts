import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { decodePng } from "../src/png.js";
import { FIXTURES, readJson } from "./helpers.js";

const PNG_DIR = join(FIXTURES, "png");

describe("decodePng", () => {
  it("decodes 8-bit RGB written by the pipeline", async () => {
    const expected: number[][][] = readJson(join(PNG_DIR, "expected.json")).rgb8;
    const png = await decodePng(new Uint8Array(readFileSync(join(PNG_DIR, "rgb8.png"))));
    expect(png.width).toBe(7);
    expect(png.height).toBe(5);
    expect(png.bitDepth).toBe(8);
    expect(png.channels).toBe(3);
    for (let y = 0; y < 5; y++) {
      for (let x = 0; x < 7; x++) {
        for (let c = 0; c < 3; c++) {
          expect(png.data[(y * 7 + x) * 3 + c]).toBe(expected[y][x][c]);
        }
      }
    }
  });

  it("decodes 16-bit grayscale exactly", async () => {
    const expected: number[][] = readJson(join(PNG_DIR, "expected.json")).gray16;
    const png = await decodePng(new Uint8Array(readFileSync(join(PNG_DIR, "gray16.png"))));
    expect(png.width).toBe(4);
    expect(png.height).toBe(6);
    expect(png.bitDepth).toBe(16);
    for (let y = 0; y < 6; y++) {
      for (let x = 0; x < 4; x++) {
        expect(png.data[y * 4 + x]).toBe(expected[y][x]);
      }
    }
  });

  it("rejects non-PNG data", async () => {
    await expect(decodePng(new Uint8Array([1, 2, 3, 4]))).rejects.toThrow("not a PNG");
  });
});
