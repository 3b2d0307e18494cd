/**
 * Flat-top hexagonal blur kernels on the pixel grid.
 *
 * The hexagon of circumradius r is the intersection of three slabs of
 * half-width sqrt(3)/2 * r; pixel centers inside (boundary included, with
 * a small tolerance matching the pipeline renderer) carry equal weight
 * summing to one.
 */

const EDGE_TOL = 1e-9;

export function hexagonContains(x: number, y: number, radius: number): boolean {
  const h = (Math.sqrt(3) / 2) * radius + EDGE_TOL;
  const s3 = Math.sqrt(3);
  return (
    Math.abs(y) <= h &&
    Math.abs(0.5 * (s3 * x + y)) <= h &&
    Math.abs(0.5 * (s3 * x - y)) <= h
  );
}

export interface KernelTap {
  dx: number;
  dy: number;
}

export interface HexKernel {
  radius: number;
  half: number;
  taps: KernelTap[];
  weight: number; // 1 / taps.length
}

const kernelCache = new Map<number, HexKernel>();

export function hexagonalKernel(radius: number): HexKernel {
  if (radius < 0) throw new Error("kernel radius must be nonnegative");
  const key = radius;
  const cached = kernelCache.get(key);
  if (cached) return cached;
  const half = Math.ceil(radius);
  const taps: KernelTap[] = [];
  if (half === 0) {
    taps.push({ dx: 0, dy: 0 });
  } else {
    for (let dy = -half; dy <= half; dy++) {
      for (let dx = -half; dx <= half; dx++) {
        if (hexagonContains(dx, dy, radius)) taps.push({ dx, dy });
      }
    }
    if (taps.length === 0) taps.push({ dx: 0, dy: 0 });
  }
  const kernel = { radius, half, taps, weight: 1.0 / taps.length };
  kernelCache.set(key, kernel);
  return kernel;
}

/** Dense 0/1 support grid, for cross-checking against the pipeline kernels. */
export function kernelSupportGrid(radius: number): number[][] {
  const k = hexagonalKernel(radius);
  const size = 2 * k.half + 1;
  const grid: number[][] = Array.from({ length: size }, () => Array(size).fill(0));
  for (const { dx, dy } of k.taps) {
    grid[dy + k.half][dx + k.half] = 1;
  }
  return grid;
}
