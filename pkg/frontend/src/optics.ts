/** Thin-lens circle-of-confusion model, mirroring the pipeline renderer. */

export interface Optics {
  focalLengthMm: number;
  apertureDiameterMm: number;
  focusDistanceMm: number;
  pixelPitchUm: number;
}

export function opticsFromMeta(meta: Record<string, number>): Optics {
  const f = meta.focal_length_mm;
  const aperture =
    meta.aperture_diameter_mm !== undefined
      ? meta.aperture_diameter_mm
      : f / meta.f_number;
  const optics: Optics = {
    focalLengthMm: f,
    apertureDiameterMm: aperture,
    focusDistanceMm: meta.focus_distance_mm ?? 1000.0,
    pixelPitchUm: meta.pixel_pitch_um,
  };
  if (!(optics.focalLengthMm > 0) || !(optics.apertureDiameterMm > 0)) {
    throw new Error("invalid optics: nonpositive focal length or aperture");
  }
  if (!(optics.pixelPitchUm > 0)) {
    throw new Error("invalid optics: nonpositive pixel pitch");
  }
  return optics;
}

/** CoC diameter in mm for an object at the given distance (mm). */
export function cocDiameter(optics: Optics, focusAtMm: number, objectAtMm: number): number {
  const f = optics.focalLengthMm;
  const d = optics.apertureDiameterMm;
  return (d * f * Math.abs(objectAtMm - focusAtMm)) / (objectAtMm * (focusAtMm - f));
}

/** CoC diameter (mm) to blur radius in pixels. */
export function cocToRadiusPx(cocMm: number, pixelPitchUm: number): number {
  return (cocMm * 1000.0) / pixelPitchUm / 2.0;
}

/** Blur radius of every layer when focused on one of them. */
export function layerBlurRadii(
  optics: Optics,
  layerDepthsMm: ArrayLike<number>,
  focusLayer: number,
  apertureScale: number
): Float64Array {
  const radii = new Float64Array(layerDepthsMm.length);
  const focusAt = layerDepthsMm[focusLayer];
  for (let k = 0; k < layerDepthsMm.length; k++) {
    const coc = cocDiameter(optics, focusAt, layerDepthsMm[k]);
    radii[k] = apertureScale * cocToRadiusPx(coc, optics.pixelPitchUm);
  }
  return radii;
}
