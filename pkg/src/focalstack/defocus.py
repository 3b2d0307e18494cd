"""Thin-lens defocus model and layered synthetic bokeh rendering.

The circle of confusion of a point at distance l when the lens focuses at
l_n is

    C = d * f * |l - l_n| / (l * (l_n - f))        [mm]

which converts to a blur radius in pixels through the sensor pixel pitch.
Rendering quantizes depth into layers, blurs each layer (color and mask
together) with a flat hexagonal kernel sized by its circle of confusion,
and composites back to front so foreground blur spills over the
background. A refocus bundle (all-in-focus image + quantized depth +
optics metadata) is the on-disk contract the interactive viewer consumes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.ndimage as ndi

from focalstack.stack_io import (
    DepthMap,
    FocalStack,
    load_image,
    read_png16,
    save_image,
    write_png16,
)

BUNDLE_VERSION = 1
HEX_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class OpticsParams:
    """Thin-lens parameters; aperture may come from an f-number."""

    focal_length_mm: float
    aperture_diameter_mm: float
    focus_distance_mm: float
    pixel_pitch_um: float

    def __post_init__(self):
        if self.focal_length_mm <= 0:
            raise ValueError("focal length must be positive")
        if self.aperture_diameter_mm <= 0:
            raise ValueError("aperture diameter must be positive")
        if self.focus_distance_mm <= self.focal_length_mm:
            raise ValueError("focus distance must exceed the focal length")
        if self.pixel_pitch_um <= 0:
            raise ValueError("pixel pitch must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "OpticsParams":
        f = float(d["focal_length_mm"])
        if "aperture_diameter_mm" in d:
            ap = float(d["aperture_diameter_mm"])
        elif "f_number" in d:
            ap = f / float(d["f_number"])
        else:
            raise ValueError("optics needs aperture_diameter_mm or f_number")
        return cls(
            focal_length_mm=f,
            aperture_diameter_mm=ap,
            focus_distance_mm=float(d.get("focus_distance_mm", 1000.0)),
            pixel_pitch_um=float(d["pixel_pitch_um"]),
        )

    def to_dict(self) -> dict:
        return {
            "focal_length_mm": self.focal_length_mm,
            "aperture_diameter_mm": self.aperture_diameter_mm,
            "focus_distance_mm": self.focus_distance_mm,
            "pixel_pitch_um": self.pixel_pitch_um,
        }


def coc_diameter(optics: OpticsParams, object_distance_mm: float) -> float:
    """Circle-of-confusion diameter in mm for an object at the given distance."""
    if object_distance_mm <= 0:
        raise ValueError("object distance must be positive")
    f = optics.focal_length_mm
    d = optics.aperture_diameter_mm
    ln = optics.focus_distance_mm
    return d * f * abs(object_distance_mm - ln) / (object_distance_mm * (ln - f))


def coc_to_radius_px(coc_mm: float, pixel_pitch_um: float) -> float:
    """CoC diameter in mm to blur radius in pixels."""
    return coc_mm * 1000.0 / pixel_pitch_um / 2.0


def hexagon_contains(x: np.ndarray, y: np.ndarray, radius: float) -> np.ndarray:
    """Points inside a flat-top regular hexagon of the given circumradius.

    The hexagon is the intersection of three slabs of half-width
    sqrt(3)/2 * radius; boundary points count as inside.
    """
    h = 0.5 * np.sqrt(3.0) * radius + HEX_EDGE_TOL
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s3 = np.sqrt(3.0)
    return (
        (np.abs(y) <= h)
        & (np.abs(0.5 * (s3 * x + y)) <= h)
        & (np.abs(0.5 * (s3 * x - y)) <= h)
    )


def hexagonal_kernel(radius: float) -> np.ndarray:
    """Flat kernel over the pixel centers inside the hexagon; sums to 1."""
    if radius < 0:
        raise ValueError("kernel radius must be nonnegative")
    half = int(np.ceil(radius))
    if half == 0:
        return np.ones((1, 1))
    coords = np.arange(-half, half + 1, dtype=float)
    xx, yy = np.meshgrid(coords, coords)
    mask = hexagon_contains(xx, yy, radius)
    if not mask.any():
        return np.ones((1, 1))
    k = mask.astype(float)
    return k / k.sum()


def hex_blur(img: np.ndarray, radius: float) -> np.ndarray:
    """Hexagonal blur with fractional radii blended between integer kernels.

    A kernel exists per integer radius; a fractional radius mixes the
    floor and ceil results by the fractional part, which keeps the blur
    continuous as the radius sweeps (no popping under an aperture slider).
    Zero padding at the frame border; radius 0 returns the input unchanged.
    """

    def blur_int(a: np.ndarray, r: int) -> np.ndarray:
        if r == 0:
            return a.copy()
        k = hexagonal_kernel(r)
        if a.ndim == 2:
            return ndi.convolve(a, k, mode="constant", cval=0.0)
        return np.stack(
            [ndi.convolve(a[:, :, c], k, mode="constant", cval=0.0) for c in range(a.shape[2])],
            axis=2,
        )

    if radius < 0:
        raise ValueError("blur radius must be nonnegative")
    lo = int(np.floor(radius))
    hi = int(np.ceil(radius))
    if lo == hi:
        return blur_int(img, lo)
    frac = radius - lo
    return (1.0 - frac) * blur_int(img, lo) + frac * blur_int(img, hi)


@dataclass(frozen=True)
class RefocusBundle:
    """All-in-focus image + quantized depth layers + optics metadata."""

    all_in_focus: np.ndarray
    layer_index: np.ndarray  # (h, w) int, values in [0, num_layers)
    layer_depths_mm: np.ndarray  # (num_layers,)
    optics: OpticsParams
    kernel_shape: str = "hexagon"

    def __post_init__(self):
        idx = np.asarray(self.layer_index, dtype=int)
        depths = np.asarray(self.layer_depths_mm, dtype=float)
        if depths.ndim != 1 or depths.size < 2:
            raise ValueError("a bundle needs at least 2 layers")
        if idx.min() < 0 or idx.max() >= depths.size:
            raise ValueError("layer indices out of range")
        if idx.shape != self.all_in_focus.shape[:2]:
            raise ValueError("layer map must match the image dimensions")
        object.__setattr__(self, "layer_index", idx)
        object.__setattr__(self, "layer_depths_mm", depths)

    @property
    def num_layers(self) -> int:
        return self.layer_depths_mm.size


def quantize_depth(
    values: np.ndarray, num_frames: int, num_layers: int
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform index-space quantization into layers.

    Layer centers sit at k * (num_frames - 1) / (num_layers - 1), so with
    num_layers == num_frames the quantization is the identity on integer
    frame indices.
    """
    if num_layers < 2:
        raise ValueError("need at least 2 layers")
    scale = (num_layers - 1.0) / (num_frames - 1.0)
    idx = np.clip(np.rint(values * scale).astype(int), 0, num_layers - 1)
    centers = np.arange(num_layers) / scale
    return idx, centers


def layer_blur_radii(
    bundle: RefocusBundle, focus_layer: int, aperture_scale: float
) -> np.ndarray:
    """Per-layer blur radius in pixels when focused on one layer."""
    if not 0 <= focus_layer < bundle.num_layers:
        raise ValueError(f"focus layer {focus_layer} out of range")
    if aperture_scale < 0:
        raise ValueError("aperture scale must be nonnegative")
    focused = replace(
        bundle.optics, focus_distance_mm=float(bundle.layer_depths_mm[focus_layer])
    )
    radii = np.empty(bundle.num_layers)
    for k in range(bundle.num_layers):
        c = coc_diameter(focused, float(bundle.layer_depths_mm[k]))
        radii[k] = aperture_scale * coc_to_radius_px(c, bundle.optics.pixel_pitch_um)
    return radii


def composite_layers(
    image: np.ndarray, layer_index: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Blur each depth layer and composite back to front.

    Color and mask blur together (premultiplied), each layer lies over
    what is behind it, and the accumulated coverage renormalizes the
    result so interior pixels keep their mean intensity.
    """
    color = image if image.ndim == 3 else image[:, :, None]
    out = np.zeros_like(color, dtype=float)
    coverage = np.zeros(color.shape[:2])
    for k in range(len(radii) - 1, -1, -1):
        mask = (layer_index == k).astype(float)
        if not mask.any():
            continue
        r = float(radii[k])
        if r <= 1e-12:
            b_col = color * mask[:, :, None]
            b_mask = mask
        else:
            b_col = hex_blur(color * mask[:, :, None], r)
            b_mask = hex_blur(mask, r)
        out = b_col + (1.0 - b_mask[:, :, None]) * out
        coverage = b_mask + (1.0 - b_mask) * coverage
    norm = np.maximum(coverage, 1e-12)[:, :, None]
    out = out / norm
    return out if image.ndim == 3 else out[:, :, 0]


def synthetic_defocus(
    bundle: RefocusBundle, focus_layer: int, aperture_scale: float = 1.0
) -> np.ndarray:
    """Render the bundle with the chosen focal layer and aperture."""
    radii = layer_blur_radii(bundle, focus_layer, aperture_scale)
    if np.all(radii <= 1e-12):
        return bundle.all_in_focus.copy()
    return composite_layers(bundle.all_in_focus, bundle.layer_index, radii)


def export_refocus_bundle(
    aif: np.ndarray,
    depth: DepthMap,
    stack: FocalStack,
    optics: OpticsParams,
    num_layers: int,
    out_dir: str,
) -> RefocusBundle:
    """Write allfocus.png, depth.png (raw uint16 layer indices), meta.json."""
    if aif.shape[:2] != depth.values.shape:
        raise ValueError("image and depth dimensions must match")
    os.makedirs(out_dir, exist_ok=True)
    idx, centers = quantize_depth(depth.values, stack.num_frames, num_layers)
    frame_axis = np.arange(stack.num_frames)
    layer_depths = np.interp(centers, frame_axis, stack.focal_distances_mm)
    save_image(os.path.join(out_dir, "allfocus.png"), aif)
    write_png16(os.path.join(out_dir, "depth.png"), idx.astype(np.uint16))
    meta = {
        "bundle_version": BUNDLE_VERSION,
        "width": int(aif.shape[1]),
        "height": int(aif.shape[0]),
        "num_layers": int(num_layers),
        "layer_depths_mm": [float(d) for d in layer_depths],
        "optics": optics.to_dict(),
        "kernel_shape": "hexagon",
        "depth_min": float(depth.values.min()),
        "depth_max": float(depth.values.max()),
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    return RefocusBundle(
        all_in_focus=aif,
        layer_index=idx,
        layer_depths_mm=layer_depths,
        optics=optics,
    )


def load_refocus_bundle(bundle_dir: str) -> RefocusBundle:
    meta_path = os.path.join(bundle_dir, "meta.json")
    if not os.path.isfile(meta_path):
        raise ValueError(f"missing file: {meta_path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("bundle_version") != BUNDLE_VERSION:
        raise ValueError(
            f"unsupported bundle version: {meta.get('bundle_version')!r}"
        )
    aif = load_image(os.path.join(bundle_dir, "allfocus.png"))
    idx = read_png16(os.path.join(bundle_dir, "depth.png")).astype(int)
    return RefocusBundle(
        all_in_focus=aif,
        layer_index=idx,
        layer_depths_mm=np.asarray(meta["layer_depths_mm"], dtype=float),
        optics=OpticsParams.from_dict(meta["optics"]),
        kernel_shape=meta.get("kernel_shape", "hexagon"),
    )
