/**
 * Layered hexagonal defocus compositing and interactive viewer state.
 *
 * Rendering mirrors the pipeline renderer operation for operation: each
 * depth layer's color and coverage mask blur together with the hexagonal
 * kernel sized by that layer's circle of confusion, layers composite back
 * to front so foreground blur spills over the background, and accumulated
 * coverage renormalizes the result. Fractional radii blend the floor- and
 * ceil-radius results, so a cache of integer-radius variants per layer
 * reproduces the reference renders exactly; variants are computed lazily
 * and clipped to the layer's dilated bounding box to keep interaction
 * latency independent of frame size times layer count.
 */

import { Bundle } from "./bundle.js";
import { hexagonalKernel } from "./kernel.js";
import { layerBlurRadii } from "./optics.js";

const ZERO_RADIUS = 1e-12;

interface Bbox {
  x0: number;
  y0: number;
  x1: number; // exclusive
  y1: number;
}

interface LayerVariant {
  box: Bbox;
  /** Premultiplied RGB over the box, length 3 * boxWidth * boxHeight. */
  rgb: Float32Array;
  /** Blurred coverage over the box. */
  alpha: Float32Array;
}

export interface RenderResult {
  width: number;
  height: number;
  /** 8-bit RGB, length 3 * width * height. */
  rgb: Uint8ClampedArray;
}

function layerBbox(layerIndex: Uint16Array, width: number, height: number, layer: number): Bbox | null {
  let x0 = width;
  let y0 = height;
  let x1 = -1;
  let y1 = -1;
  for (let y = 0; y < height; y++) {
    const row = y * width;
    for (let x = 0; x < width; x++) {
      if (layerIndex[row + x] === layer) {
        if (x < x0) x0 = x;
        if (x > x1) x1 = x;
        if (y < y0) y0 = y;
        if (y > y1) y1 = y;
      }
    }
  }
  if (x1 < 0) return null;
  return { x0, y0, x1: x1 + 1, y1: y1 + 1 };
}

export class Renderer {
  readonly bundle: Bundle;
  private readonly layerBoxes: (Bbox | null)[];
  private readonly variants = new Map<string, LayerVariant>();

  constructor(bundle: Bundle) {
    this.bundle = bundle;
    this.layerBoxes = [];
    for (let k = 0; k < bundle.numLayers; k++) {
      this.layerBoxes.push(layerBbox(bundle.layerIndex, bundle.width, bundle.height, k));
    }
  }

  /** Smallest layer index that actually occurs in the depth map. */
  nearestPopulatedLayer(): number {
    for (let k = 0; k < this.bundle.numLayers; k++) {
      if (this.layerBoxes[k]) return k;
    }
    throw new Error("bundle has no populated layers");
  }

  private variant(layer: number, radius: number): LayerVariant | null {
    const base = this.layerBoxes[layer];
    if (!base) return null;
    const key = `${layer}:${radius}`;
    const cached = this.variants.get(key);
    if (cached) return cached;

    const { width, height, layerIndex, allInFocus } = this.bundle;
    const kernel = hexagonalKernel(radius);
    const half = radius === 0 ? 0 : kernel.half;
    const box: Bbox = {
      x0: Math.max(0, base.x0 - half),
      y0: Math.max(0, base.y0 - half),
      x1: Math.min(width, base.x1 + half),
      y1: Math.min(height, base.y1 + half),
    };
    const bw = box.x1 - box.x0;
    const bh = box.y1 - box.y0;
    const rgb = new Float32Array(3 * bw * bh);
    const alpha = new Float32Array(bw * bh);

    if (radius === 0) {
      for (let y = box.y0; y < box.y1; y++) {
        for (let x = box.x0; x < box.x1; x++) {
          const src = y * width + x;
          if (layerIndex[src] !== layer) continue;
          const dst = (y - box.y0) * bw + (x - box.x0);
          alpha[dst] = 1.0;
          rgb[3 * dst] = allInFocus[3 * src];
          rgb[3 * dst + 1] = allInFocus[3 * src + 1];
          rgb[3 * dst + 2] = allInFocus[3 * src + 2];
        }
      }
    } else {
      const { taps, weight } = kernel;
      for (let y = box.y0; y < box.y1; y++) {
        for (let x = box.x0; x < box.x1; x++) {
          let a = 0.0;
          let r = 0.0;
          let g = 0.0;
          let b = 0.0;
          for (const tap of taps) {
            const sy = y + tap.dy;
            const sx = x + tap.dx;
            if (sy < 0 || sy >= height || sx < 0 || sx >= width) continue;
            const src = sy * width + sx;
            if (layerIndex[src] !== layer) continue;
            a += weight;
            r += weight * allInFocus[3 * src];
            g += weight * allInFocus[3 * src + 1];
            b += weight * allInFocus[3 * src + 2];
          }
          const dst = (y - box.y0) * bw + (x - box.x0);
          alpha[dst] = a;
          rgb[3 * dst] = r;
          rgb[3 * dst + 1] = g;
          rgb[3 * dst + 2] = b;
        }
      }
    }
    const variant: LayerVariant = { box, rgb, alpha };
    this.variants.set(key, variant);
    return variant;
  }

  /** Ensure the variants for one (focus, scale) choice exist in the cache. */
  precompute(focusLayer: number, apertureScale: number): void {
    const radii = layerBlurRadii(
      this.bundle.optics, this.bundle.layerDepthsMm, focusLayer, apertureScale
    );
    for (let k = 0; k < radii.length; k++) {
      const r = radii[k];
      if (r <= ZERO_RADIUS) {
        this.variant(k, 0);
      } else {
        this.variant(k, Math.floor(r));
        this.variant(k, Math.ceil(r));
      }
    }
  }

  render(focusLayer: number, apertureScale: number): RenderResult {
    const { width, height, numLayers } = this.bundle;
    if (!(focusLayer >= 0 && focusLayer < numLayers)) {
      throw new Error(`focus layer ${focusLayer} out of range`);
    }
    if (apertureScale < 0) throw new Error("aperture scale must be nonnegative");
    const radii = layerBlurRadii(
      this.bundle.optics, this.bundle.layerDepthsMm, focusLayer, apertureScale
    );
    const n = width * height;
    const out = new Float64Array(3 * n);
    const coverage = new Float64Array(n);

    for (let k = numLayers - 1; k >= 0; k--) {
      const r = radii[k] <= ZERO_RADIUS ? 0 : radii[k];
      const lo = Math.floor(r);
      const hi = Math.ceil(r);
      const frac = r - lo;
      const vLo = this.variant(k, lo);
      if (!vLo) continue; // empty layer
      const vHi = frac > 0 ? this.variant(k, hi)! : null;

      // The hi-radius box contains the lo-radius box; compositing is the
      // identity wherever this layer's blurred coverage is zero.
      const box = vHi ? vHi.box : vLo.box;
      const bwHi = box.x1 - box.x0;
      const bwLo = vLo.box.x1 - vLo.box.x0;
      for (let y = box.y0; y < box.y1; y++) {
        for (let x = box.x0; x < box.x1; x++) {
          let a: number;
          let r0: number;
          let g0: number;
          let b0: number;
          if (!vHi) {
            const i = (y - vLo.box.y0) * bwLo + (x - vLo.box.x0);
            a = vLo.alpha[i];
            r0 = vLo.rgb[3 * i];
            g0 = vLo.rgb[3 * i + 1];
            b0 = vLo.rgb[3 * i + 2];
          } else {
            const iHi = (y - box.y0) * bwHi + (x - box.x0);
            let aLo = 0.0;
            let rLo = 0.0;
            let gLo = 0.0;
            let bLo = 0.0;
            if (x >= vLo.box.x0 && x < vLo.box.x1 && y >= vLo.box.y0 && y < vLo.box.y1) {
              const iLo = (y - vLo.box.y0) * bwLo + (x - vLo.box.x0);
              aLo = vLo.alpha[iLo];
              rLo = vLo.rgb[3 * iLo];
              gLo = vLo.rgb[3 * iLo + 1];
              bLo = vLo.rgb[3 * iLo + 2];
            }
            a = (1 - frac) * aLo + frac * vHi.alpha[iHi];
            r0 = (1 - frac) * rLo + frac * vHi.rgb[3 * iHi];
            g0 = (1 - frac) * gLo + frac * vHi.rgb[3 * iHi + 1];
            b0 = (1 - frac) * bLo + frac * vHi.rgb[3 * iHi + 2];
          }
          const px = y * width + x;
          const keep = 1 - a;
          out[3 * px] = r0 + keep * out[3 * px];
          out[3 * px + 1] = g0 + keep * out[3 * px + 1];
          out[3 * px + 2] = b0 + keep * out[3 * px + 2];
          coverage[px] = a + keep * coverage[px];
        }
      }
    }

    const rgb = new Uint8ClampedArray(3 * n);
    for (let px = 0; px < n; px++) {
      const norm = Math.max(coverage[px], 1e-12);
      // Uint8ClampedArray clamps and rounds half-to-even, matching the
      // quantization the pipeline applies when it writes PNG output.
      rgb[3 * px] = (out[3 * px] / norm) * 255;
      rgb[3 * px + 1] = (out[3 * px + 1] / norm) * 255;
      rgb[3 * px + 2] = (out[3 * px + 2] / norm) * 255;
    }
    return { width, height, rgb };
  }
}

export class ViewerState {
  readonly renderer: Renderer;
  focusLayer: number;
  apertureScale: number;

  constructor(bundle: Bundle) {
    this.renderer = new Renderer(bundle);
    this.focusLayer = this.renderer.nearestPopulatedLayer();
    this.apertureScale = 0.0;
  }

  get bundle(): Bundle {
    return this.renderer.bundle;
  }

  render(): RenderResult {
    return this.renderer.render(this.focusLayer, this.apertureScale);
  }

  /** Click handler: pick the layer under the pixel; out of bounds is a no-op. */
  refocusAt(x: number, y: number): ViewerState {
    const { width, height, layerIndex } = this.bundle;
    const xi = Math.floor(x);
    const yi = Math.floor(y);
    if (xi < 0 || xi >= width || yi < 0 || yi >= height) return this;
    this.focusLayer = layerIndex[yi * width + xi];
    return this;
  }

  setAperture(scale: number): ViewerState {
    if (scale < 0) throw new Error("aperture scale must be nonnegative");
    this.apertureScale = scale;
    return this;
  }
}
