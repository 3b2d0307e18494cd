/**
 * Browser shell: open a refocus bundle, click to set the focal plane,
 * drag the slider to open the aperture. Pure static client; all state
 * lives in ViewerState and rendering happens on a canvas.
 */

import { FileMap, loadBundle } from "./bundle.js";
import { ViewerState } from "./render.js";

const MAX_APERTURE = 2.0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function filesFromInput(input: HTMLInputElement): Promise<FileMap> {
  const map: FileMap = new Map();
  for (const file of Array.from(input.files ?? [])) {
    const name = file.name.split("/").pop()!;
    map.set(name, new Uint8Array(await file.arrayBuffer()));
  }
  return map;
}

class ViewerApp {
  private state: ViewerState | null = null;
  private canvas = el<HTMLCanvasElement>("view");
  private status = el<HTMLSpanElement>("status");
  private slider = el<HTMLInputElement>("aperture");

  constructor() {
    el<HTMLInputElement>("bundle-input").addEventListener("change", (e) =>
      this.onOpen(e.target as HTMLInputElement)
    );
    this.canvas.addEventListener("click", (e) => this.onClick(e));
    this.slider.addEventListener("input", () => this.onAperture());
  }

  private async onOpen(input: HTMLInputElement): Promise<void> {
    try {
      this.status.textContent = "loading bundle...";
      const files = await filesFromInput(input);
      const bundle = await loadBundle(files);
      this.state = new ViewerState(bundle);
      this.canvas.width = bundle.width;
      this.canvas.height = bundle.height;
      this.slider.value = "0";
      this.redraw();
    } catch (err) {
      this.state = null;
      this.status.textContent = `failed to load bundle: ${(err as Error).message}`;
    }
  }

  private onClick(e: MouseEvent): void {
    if (!this.state) return;
    const rect = this.canvas.getBoundingClientRect();
    const x = ((e.clientX - rect.left) / rect.width) * this.canvas.width;
    const y = ((e.clientY - rect.top) / rect.height) * this.canvas.height;
    this.state.refocusAt(x, y);
    this.redraw();
  }

  private onAperture(): void {
    if (!this.state) return;
    this.state.setAperture(Number(this.slider.value) * MAX_APERTURE);
    this.redraw();
  }

  private redraw(): void {
    if (!this.state) return;
    const t0 = performance.now();
    const { width, height, rgb } = this.state.render();
    const ctx = this.canvas.getContext("2d")!;
    const image = ctx.createImageData(width, height);
    for (let i = 0; i < width * height; i++) {
      image.data[4 * i] = rgb[3 * i];
      image.data[4 * i + 1] = rgb[3 * i + 1];
      image.data[4 * i + 2] = rgb[3 * i + 2];
      image.data[4 * i + 3] = 255;
    }
    ctx.putImageData(image, 0, 0);
    const ms = performance.now() - t0;
    this.status.textContent =
      `focus layer ${this.state.focusLayer} / ${this.state.bundle.numLayers}, ` +
      `aperture ${this.state.apertureScale.toFixed(2)}, render ${ms.toFixed(0)} ms`;
  }
}

new ViewerApp();
