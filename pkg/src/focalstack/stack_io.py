"""Focal-stack and depth-map I/O, resampling, and guided upsampling.

Images are plain numpy arrays: float64 samples in [0, 1], shape (h, w) for
grayscale or (h, w, 3) for RGB. A stack manifest is a JSON file::

    {
      "frames": [
        {"path": "f00.png", "focal_distance_mm": 300.0},
        ...
      ],
      "optics": {"focal_length_mm": 4.2, "f_number": 2.8,
                 "pixel_pitch_um": 1.5}          # optional
    }

Depth maps persist as 16-bit grayscale PNG plus a JSON sidecar recording
the value range and units, so quantization never loses more than one part
in 65535 of the stored span.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class FocalStack:
    """Ordered focus bracket: frames sorted by ascending focal distance.

    ``homographies[k]``, when present, maps reference-frame pixel
    coordinates (x, y, 1) to pixel coordinates in the original frame k;
    frame 0 is the reference and carries the identity.
    """

    frames: list[np.ndarray]
    focal_distances_mm: np.ndarray
    homographies: list[np.ndarray] | None = None
    optics: dict | None = None

    def __post_init__(self):
        if len(self.frames) < 2:
            raise ValueError("insufficient frames: a focal stack needs at least 2")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise ValueError(
                    f"dimension mismatch: frame {i} is {f.shape}, expected {shape}"
                )
        d = np.asarray(self.focal_distances_mm, dtype=float)
        if d.shape != (len(self.frames),):
            raise ValueError("one focal distance per frame required")
        if np.any(np.diff(d) <= 0):
            raise ValueError("non-monotone focal distances")
        object.__setattr__(self, "focal_distances_mm", d)
        if self.homographies is not None:
            if len(self.homographies) != len(self.frames):
                raise ValueError("one homography per frame required")
            if not np.allclose(self.homographies[0], np.eye(3), atol=1e-9):
                raise ValueError("reference frame homography must be identity")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth (frame-index units unless stated) with confidence."""

    values: np.ndarray
    confidence: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("depth values must be a 2-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("depth values must be finite")
        object.__setattr__(self, "values", v)
        c = self.confidence
        if c is None:
            c = np.ones_like(v)
        c = np.asarray(c, dtype=float)
        if c.shape != v.shape:
            raise ValueError("confidence shape must match values")
        if c.min() < 0 or c.max() > 1:
            raise ValueError("confidence must lie in [0, 1]")
        object.__setattr__(self, "confidence", c)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def to_millimeters(self, focal_distances_mm: np.ndarray) -> np.ndarray:
        """Convert index-unit depth to mm by interpolating frame distances."""
        d = np.asarray(focal_distances_mm, dtype=float)
        idx = np.clip(self.values, 0.0, len(d) - 1.0)
        return np.interp(idx.ravel(), np.arange(len(d)), d).reshape(idx.shape)


def load_image(path: str) -> np.ndarray:
    """Load a PNG/JPEG as float64 in [0, 1]; color comes back as RGB."""
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"missing or unreadable image file: {path}")
    if raw.dtype == np.uint8:
        img = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        img = raw.astype(np.float64) / 65535.0
    else:
        img = np.clip(raw.astype(np.float64), 0.0, 1.0)
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        img = img[:, :, ::-1].copy()  # BGR -> RGB
    return img


def save_image(path: str, img: np.ndarray) -> None:
    """Write an 8-bit PNG; float input is clipped to [0, 1]."""
    arr = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    q = np.rint(arr * 255.0).astype(np.uint8)
    if q.ndim == 3:
        q = q[:, :, ::-1]  # RGB -> BGR
    if not cv2.imwrite(path, q):
        raise ValueError(f"failed to write image: {path}")


def write_png16(path: str, arr: np.ndarray) -> None:
    """Write a raw uint16 grayscale PNG (no scaling)."""
    a = np.asarray(arr)
    if a.dtype != np.uint16:
        raise ValueError("write_png16 expects uint16 data")
    if not cv2.imwrite(path, a):
        raise ValueError(f"failed to write image: {path}")


def read_png16(path: str) -> np.ndarray:
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"missing or unreadable image file: {path}")
    if raw.ndim != 2:
        raise ValueError(f"expected single-channel 16-bit PNG: {path}")
    return raw.astype(np.uint16)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luminance conversion, 0.299 R + 0.587 G + 0.114 B."""
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]
    raise ValueError(f"unsupported channel count: shape {img.shape}")


def load_stack(manifest_path: str) -> FocalStack:
    """Load a stack manifest; frames come back sorted by focal distance."""
    if not os.path.isfile(manifest_path):
        raise ValueError(f"missing file: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    entries = manifest.get("frames", [])
    if len(entries) < 2:
        raise ValueError("insufficient frames: manifest must list at least 2")
    base = os.path.dirname(os.path.abspath(manifest_path))
    entries = sorted(entries, key=lambda e: float(e["focal_distance_mm"]))
    frames = []
    dists = []
    for e in entries:
        p = e["path"]
        if not os.path.isabs(p):
            p = os.path.join(base, p)
        frames.append(load_image(p))
        dists.append(float(e["focal_distance_mm"]))
    return FocalStack(
        frames=frames,
        focal_distances_mm=np.asarray(dists),
        optics=manifest.get("optics"),
    )


def downsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Block-mean downsample by an integer factor.

    Output dimensions are ceil(dim / factor); partial edge blocks are
    averaged over the pixels they actually contain.
    """
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    if factor == 1:
        return img.copy()
    a = np.asarray(img, dtype=float)
    h, w = a.shape[:2]
    ri = np.arange(0, h, factor)
    ci = np.arange(0, w, factor)
    sums = np.add.reduceat(np.add.reduceat(a, ri, axis=0), ci, axis=1)
    rh = np.minimum(ri + factor, h) - ri
    cw = np.minimum(ci + factor, w) - ci
    counts = np.multiply.outer(rh, cw).astype(float)
    if a.ndim == 3:
        counts = counts[:, :, None]
    return sums / counts


def joint_bilateral_upsample(
    depth_lo: DepthMap,
    guide: np.ndarray,
    factor: int,
    sigma_spatial: float | None = None,
    sigma_range: float = 0.1,
) -> DepthMap:
    """Upsample a low-resolution depth map guided by a full-resolution image.

    Each output pixel is a normalized sum over a low-res neighborhood;
    weights are a spatial Gaussian (distances in high-res pixels) times a
    range Gaussian on the difference between the guide intensity at the
    output pixel and the block-mean guide intensity at the low-res sample.
    Normalized weights make every output a convex combination of input
    depths, so the output range never exceeds the input range.
    """
    if factor < 1:
        raise ValueError("upsample factor must be >= 1")
    if sigma_spatial is None:
        sigma_spatial = float(factor)
    if sigma_spatial <= 0 or sigma_range <= 0:
        raise ValueError("sigmas must be positive")
    g = to_grayscale(np.asarray(guide, dtype=float))
    lo = depth_lo.values
    h_lo, w_lo = lo.shape
    h_hi, w_hi = g.shape
    if not (
        int(np.ceil(h_hi / factor)) == h_lo and int(np.ceil(w_hi / factor)) == w_lo
    ):
        raise ValueError(
            f"dimension mismatch: guide {g.shape} is not ~{factor}x of {lo.shape}"
        )

    g_lo = downsample(g, factor)
    rows = np.arange(h_hi, dtype=float)
    cols = np.arange(w_hi, dtype=float)
    # Fractional low-res coordinates of each high-res pixel center.
    rl = (rows[:, None] + 0.5) / factor - 0.5
    cl = (cols[None, :] + 0.5) / factor - 0.5
    r0 = np.rint(rl).astype(int)
    c0 = np.rint(cl).astype(int)
    rad = max(1, int(np.ceil(2.0 * sigma_spatial / factor)))

    acc_d = np.zeros((h_hi, w_hi))
    acc_c = np.zeros((h_hi, w_hi))
    acc_w = np.zeros((h_hi, w_hi))
    inv2ss = 1.0 / (2.0 * sigma_spatial**2)
    inv2sr = 1.0 / (2.0 * sigma_range**2)
    for dy in range(-rad, rad + 1):
        for dx in range(-rad, rad + 1):
            yy = r0 + dy
            xx = c0 + dx
            valid = (yy >= 0) & (yy < h_lo) & (xx >= 0) & (xx < w_lo)
            yc = np.clip(yy, 0, h_lo - 1)
            xc = np.clip(xx, 0, w_lo - 1)
            dist2 = ((yy - rl) * factor) ** 2 + ((xx - cl) * factor) ** 2
            w = np.exp(-dist2 * inv2ss - (g - g_lo[yc, xc]) ** 2 * inv2sr)
            w = np.where(valid, w, 0.0)
            acc_d += w * lo[yc, xc]
            acc_c += w * depth_lo.confidence[yc, xc]
            acc_w += w
    acc_w = np.maximum(acc_w, 1e-300)
    return DepthMap(values=acc_d / acc_w, confidence=np.clip(acc_c / acc_w, 0.0, 1.0))


def save_depth(depth: DepthMap, path: str, units: str = "frame_index") -> None:
    """Persist depth as 16-bit PNG + JSON sidecar with the value range."""
    v = depth.values
    vmin = float(v.min())
    vmax = float(v.max())
    span = vmax - vmin
    if span <= 0:
        q = np.zeros(v.shape, dtype=np.uint16)
    else:
        q = np.rint((v - vmin) / span * 65535.0).astype(np.uint16)
    write_png16(path, q)
    sidecar = os.path.splitext(path)[0] + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"min": vmin, "max": vmax, "units": units}, fh, indent=2)


def load_depth(path: str) -> DepthMap:
    q = read_png16(path).astype(np.float64)
    sidecar = os.path.splitext(path)[0] + ".json"
    if not os.path.isfile(sidecar):
        raise ValueError(f"missing depth sidecar: {sidecar}")
    with open(sidecar) as fh:
        meta = json.load(fh)
    vmin = float(meta["min"])
    vmax = float(meta["max"])
    values = vmin + q / 65535.0 * (vmax - vmin)
    return DepthMap(values=values)
