"""Per-pixel focus measurement and initial depth estimation.

The focus measure is the modified Laplacian: absolute second differences
in x and y, summed, then box-mean filtered. Stacking it over the aligned
frames gives each pixel a focus function of frame index; a three-point
Gaussian fit through the peak sample and its neighbors localizes the
focus maximum to sub-frame precision, which is the initial depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

from focalstack.stack_io import DepthMap, FocalStack, to_grayscale

LOG_FLOOR = 1e-6  # guards log() against zero focus values
FLAT_DENOM = 1e-12


def modified_laplacian(img: np.ndarray, r: int = 2) -> np.ndarray:
    """|I * [-1, 2, -1]| + |I * [-1, 2, -1]^T|, box-mean filtered, radius r.

    Borders replicate the edge sample, so constant and linear images map
    to zero in the interior and the output is nonnegative everywhere.
    """
    if img.ndim != 2:
        raise ValueError("focus measure expects a grayscale image")
    if r < 0:
        raise ValueError("mean-filter radius must be >= 0")
    kernel = np.array([-1.0, 2.0, -1.0])
    cx = ndi.convolve1d(img, kernel, axis=1, mode="nearest")
    cy = ndi.convolve1d(img, kernel, axis=0, mode="nearest")
    f = np.abs(cx) + np.abs(cy)
    if r > 0:
        f = ndi.uniform_filter(f, size=2 * r + 1, mode="nearest")
    return f


@dataclass(frozen=True)
class FocusVolume:
    """Focus measure per pixel per frame, shape (num_frames, h, w)."""

    values: np.ndarray
    mean_filter_radius: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ValueError("focus volume must be (frames, h, w)")
        if not np.all(np.isfinite(v)) or v.min() < 0:
            raise ValueError("focus values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def build_focus_volume(stack: FocalStack, r: int = 2) -> FocusVolume:
    """Modified Laplacian of each (grayscale) frame, stacked."""
    slices = [modified_laplacian(to_grayscale(f), r) for f in stack.frames]
    return FocusVolume(values=np.stack(slices, axis=0), mean_filter_radius=r)


@dataclass(frozen=True)
class GaussianFit:
    peak_location: float
    peak_value: float
    sigma: float
    valid: bool


def gaussian_interpolate(
    f_prev: float, f_peak: float, f_next: float, m: int
) -> GaussianFit:
    """Fit a Gaussian through three focus samples at m-1, m, m+1.

    In log space the Gaussian is a parabola, so the peak location and
    width have closed forms from the three samples. A (near-)flat triple
    has no curvature to fit; it comes back invalid with the peak pinned
    at m.
    """
    if f_prev <= 0 or f_peak <= 0 or f_next <= 0:
        raise ValueError("focus values must be positive")
    if f_peak < f_prev or f_peak < f_next:
        raise ValueError("center sample must be the maximum of the triple")
    l_prev = np.log(f_prev)
    l_peak = np.log(f_peak)
    l_next = np.log(f_next)
    denom = l_prev - 2.0 * l_peak + l_next
    if abs(denom) < FLAT_DENOM:
        return GaussianFit(
            peak_location=float(m), peak_value=f_peak, sigma=np.inf, valid=False
        )
    offset = (l_prev - l_next) / (2.0 * denom)
    sigma = float(np.sqrt(-1.0 / denom))
    log_peak = l_peak - 0.5 * denom * offset**2
    return GaussianFit(
        peak_location=float(m + offset),
        peak_value=float(np.exp(log_peak)),
        sigma=sigma,
        valid=True,
    )


def initial_depth(vol: FocusVolume) -> DepthMap:
    """Depth from the per-pixel focus-function peak, in frame-index units.

    Interior peaks are refined by the three-point Gaussian fit; peaks at
    the first or last frame keep the integer index with halved confidence.
    Confidence is the peak prominence over the per-pixel median focus,
    normalized to [0, 1]. Argmax ties resolve to the first (nearest) frame.
    """
    if vol.num_frames < 3:
        raise ValueError("initial depth needs at least 3 frames")
    v = vol.values
    nf, h, w = v.shape
    m = np.argmax(v, axis=0)
    interior = (m > 0) & (m < nf - 1)

    mi = np.clip(m, 1, nf - 2)
    take = lambda idx: np.take_along_axis(v, idx[None, :, :], axis=0)[0]
    f_prev = take(mi - 1)
    f_peak = take(mi)
    f_next = take(mi + 1)

    l_prev = np.log(np.maximum(f_prev, LOG_FLOOR))
    l_peak = np.log(np.maximum(f_peak, LOG_FLOOR))
    l_next = np.log(np.maximum(f_next, LOG_FLOOR))
    denom = l_prev - 2.0 * l_peak + l_next
    flat = np.abs(denom) < FLAT_DENOM
    safe = np.where(flat, -1.0, denom)
    # Boundary-peak pixels run through these lanes with a clamped center
    # sample that may not dominate its neighbors; their lanes can overflow
    # but are discarded by the interior mask below.
    with np.errstate(over="ignore", invalid="ignore"):
        offset = np.where(flat, 0.0, (l_prev - l_next) / (2.0 * safe))
        fitted_peak = np.where(flat, f_peak, np.exp(l_peak - 0.5 * denom * offset**2))

    depth = np.where(interior, mi + offset, m).astype(float)
    peak_value = np.where(interior, fitted_peak, take(m))

    med = np.median(v, axis=0)
    conf = np.clip((peak_value - med) / (peak_value + LOG_FLOOR), 0.0, 1.0)
    conf = np.where(interior, conf, 0.5 * conf)
    return DepthMap(values=depth, confidence=conf)


def dump_focus_volume(vol: FocusVolume, out_dir: str) -> None:
    """Debug dump: one 16-bit PNG per frame, scaled over the volume range."""
    import json
    import os

    from focalstack.stack_io import write_png16

    os.makedirs(out_dir, exist_ok=True)
    vmax = float(vol.values.max())
    scale = 65535.0 / vmax if vmax > 0 else 0.0
    for k in range(vol.num_frames):
        q = np.rint(vol.values[k] * scale).astype(np.uint16)
        write_png16(os.path.join(out_dir, f"focus_{k:03d}.png"), q)
    with open(os.path.join(out_dir, "focus_scale.json"), "w") as fh:
        json.dump({"max": vmax, "mean_filter_radius": vol.mean_filter_radius}, fh)


def all_in_focus(stack: FocalStack, depth: DepthMap) -> np.ndarray:
    """Blend the two frames bracketing each pixel's fractional depth."""
    if (depth.height, depth.width) != (stack.height, stack.width):
        raise ValueError("depth dimensions must match the stack frames")
    nf = stack.num_frames
    idx = np.clip(depth.values, 0.0, nf - 1.0)
    lo = np.floor(idx).astype(int)
    hi = np.minimum(lo + 1, nf - 1)
    frac = idx - lo
    frames = np.stack(stack.frames, axis=0)
    if frames.ndim == 4:
        frac = frac[:, :, None]
    rows, cols = np.meshgrid(
        np.arange(stack.height), np.arange(stack.width), indexing="ij"
    )
    return (1.0 - frac) * frames[lo, rows, cols] + frac * frames[hi, rows, cols]
