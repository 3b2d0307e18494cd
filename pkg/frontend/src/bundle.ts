/**
 * Refocus-bundle loading: the on-disk contract written by the pipeline's
 * bundle exporter (bundle_version 1).
 *
 *   meta.json      layer depths, optics, dimensions
 *   allfocus.png   8-bit color composite
 *   depth.png      16-bit grayscale, raw layer indices
 */

import { decodePng } from "./png.js";
import { Optics, opticsFromMeta } from "./optics.js";

export const BUNDLE_VERSION = 1;

export type FileMap = Map<string, Uint8Array>;

export interface Bundle {
  width: number;
  height: number;
  numLayers: number;
  layerDepthsMm: Float64Array;
  optics: Optics;
  kernelShape: string;
  /** RGB samples in [0, 1], length 3 * width * height. */
  allInFocus: Float64Array;
  /** Per-pixel layer index, length width * height. */
  layerIndex: Uint16Array;
}

function requireFile(files: FileMap, name: string): Uint8Array {
  const data = files.get(name);
  if (!data) throw new Error(`missing file: ${name}`);
  return data;
}

export async function loadBundle(files: FileMap): Promise<Bundle> {
  const metaBytes = requireFile(files, "meta.json");
  const meta = JSON.parse(new TextDecoder().decode(metaBytes));
  if (meta.bundle_version !== BUNDLE_VERSION) {
    throw new Error(`unsupported bundle version: ${meta.bundle_version}`);
  }
  const numLayers = meta.num_layers;
  const layerDepths = Float64Array.from(meta.layer_depths_mm as number[]);
  if (!Number.isInteger(numLayers) || numLayers < 2 || layerDepths.length !== numLayers) {
    throw new Error("invalid bundle metadata: layer table");
  }

  const aifPng = await decodePng(requireFile(files, "allfocus.png"));
  const depthPng = await decodePng(requireFile(files, "depth.png"));
  if (aifPng.width !== meta.width || aifPng.height !== meta.height) {
    throw new Error("allfocus.png dimensions disagree with meta.json");
  }
  if (depthPng.width !== meta.width || depthPng.height !== meta.height) {
    throw new Error("depth.png dimensions disagree with meta.json");
  }
  if (depthPng.bitDepth !== 16) {
    throw new Error("depth.png must be 16-bit grayscale");
  }

  const n = aifPng.width * aifPng.height;
  const rgb = new Float64Array(3 * n);
  const src = aifPng.data as Uint8Array;
  if (aifPng.channels === 1) {
    for (let i = 0; i < n; i++) {
      const v = src[i] / 255.0;
      rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
    }
  } else {
    const ch = aifPng.channels; // 3 or 4; alpha dropped
    for (let i = 0; i < n; i++) {
      rgb[3 * i] = src[ch * i] / 255.0;
      rgb[3 * i + 1] = src[ch * i + 1] / 255.0;
      rgb[3 * i + 2] = src[ch * i + 2] / 255.0;
    }
  }

  const layerIndex = depthPng.data as Uint16Array;
  for (let i = 0; i < layerIndex.length; i++) {
    if (layerIndex[i] >= numLayers) {
      throw new Error("depth.png contains layer indices out of range");
    }
  }

  return {
    width: aifPng.width,
    height: aifPng.height,
    numLayers,
    layerDepthsMm: layerDepths,
    optics: opticsFromMeta(meta.optics),
    kernelShape: meta.kernel_shape ?? "hexagon",
    allInFocus: rgb,
    layerIndex,
  };
}
