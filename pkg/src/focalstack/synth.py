"""Synthetic test-data generation: focal stacks with ground truth, and the
noisy-depth instances used by the solver benchmark.

No public focal-stack dataset ships with ground-truth depth, so end-to-end
accuracy is measured on generated scenes: a textured layer map is blurred
per layer with the thin-lens hexagonal model at each frame's focus
distance, which yields a stack whose true depth is known exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from focalstack.defocus import (
    OpticsParams,
    coc_diameter,
    coc_to_radius_px,
    composite_layers,
)
from focalstack.stack_io import DepthMap, FocalStack, save_depth, save_image

SCENE_KINDS = ("two_plane", "ramp")

DEFAULT_OPTICS = {
    "focal_length_mm": 25.0,
    "f_number": 2.0,
    "pixel_pitch_um": 30.0,
}


@dataclass(frozen=True)
class SceneSpec:
    kind: str = "two_plane"
    width: int = 360
    height: int = 360
    num_frames: int = 12
    near_mm: float = 600.0
    far_mm: float = 3000.0
    front_index: int | None = None  # defaults to num_frames // 4
    back_index: int | None = None  # defaults to 3 * num_frames // 4
    seed: int = 0
    optics: dict = field(default_factory=lambda: dict(DEFAULT_OPTICS))

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind: {self.kind!r}")
        if self.num_frames < 3:
            raise ValueError("scene needs at least 3 frames")
        if self.front_index is None:
            object.__setattr__(self, "front_index", self.num_frames // 4)
        if self.back_index is None:
            object.__setattr__(self, "back_index", 3 * self.num_frames // 4)
        if not (0 <= self.front_index < self.num_frames):
            raise ValueError("front_index out of range")
        if not (0 <= self.back_index < self.num_frames):
            raise ValueError("back_index out of range")
        if self.width < 16 or self.height < 16:
            raise ValueError("scene too small")

    @classmethod
    def from_json(cls, path: str) -> "SceneSpec":
        with open(path) as fh:
            return cls(**json.load(fh))


def focus_distances(spec: SceneSpec) -> np.ndarray:
    """Frame focus distances, uniform in 1/distance (uniform defocus steps)."""
    inv = np.linspace(1.0 / spec.near_mm, 1.0 / spec.far_mm, spec.num_frames)
    return 1.0 / inv


def make_texture(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """Dense texture with edges at several scales, rich in corners."""
    coarse = ndi.gaussian_filter(rng.standard_normal((height, width)), 6.0)
    blocks = 0.5 + 0.5 * (coarse > 0)
    mid = ndi.gaussian_filter(rng.standard_normal((height, width)), 1.5)
    fine = rng.random((height, width))
    tex = 0.45 * blocks + 0.35 * (0.5 + 1.2 * mid) + 0.2 * fine
    return np.clip(tex, 0.02, 0.98)


def ground_truth_layers(spec: SceneSpec) -> np.ndarray:
    """Per-pixel true depth as integer frame indices."""
    h, w = spec.height, spec.width
    if spec.kind == "two_plane":
        layers = np.full((h, w), spec.back_index, dtype=int)
        y0, y1 = int(0.28 * h), int(0.72 * h)
        x0, x1 = int(0.28 * w), int(0.72 * w)
        layers[y0:y1, x0:x1] = spec.front_index
        return layers
    # ramp: left-to-right sweep across all frames
    cols = np.linspace(0, spec.num_frames - 1, w)
    return np.tile(np.rint(cols).astype(int), (h, 1))


def render_stack(spec: SceneSpec) -> tuple[FocalStack, DepthMap, np.ndarray]:
    """Render the scene into a focal stack.

    Returns the stack, the ground-truth depth (frame-index units), and the
    sharp texture the scene was built from.
    """
    rng = np.random.default_rng(spec.seed)
    texture = make_texture(spec.height, spec.width, rng)
    layers = ground_truth_layers(spec)
    dists = focus_distances(spec)
    optics = OpticsParams.from_dict(spec.optics)
    present = np.unique(layers)

    frames = []
    for k in range(spec.num_frames):
        focused = OpticsParams(
            focal_length_mm=optics.focal_length_mm,
            aperture_diameter_mm=optics.aperture_diameter_mm,
            focus_distance_mm=float(dists[k]),
            pixel_pitch_um=optics.pixel_pitch_um,
        )
        radii = np.zeros(spec.num_frames)
        for j in present:
            c = coc_diameter(focused, float(dists[j]))
            radii[j] = coc_to_radius_px(c, optics.pixel_pitch_um)
        frames.append(np.clip(composite_layers(texture, layers, radii), 0.0, 1.0))

    stack = FocalStack(frames=frames, focal_distances_mm=dists, optics=spec.optics)
    gt = DepthMap(values=layers.astype(float))
    return stack, gt, texture


def write_scene(spec: SceneSpec, out_dir: str) -> str:
    """Write frames, manifest, and ground truth; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    stack, gt, texture = render_stack(spec)
    entries = []
    for k, frame in enumerate(stack.frames):
        name = f"frame_{k:02d}.png"
        save_image(os.path.join(out_dir, name), frame)
        entries.append(
            {"path": name, "focal_distance_mm": float(stack.focal_distances_mm[k])}
        )
    manifest = {"frames": entries, "optics": spec.optics}
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    save_depth(gt, os.path.join(out_dir, "ground_truth.png"))
    save_image(os.path.join(out_dir, "texture.png"), texture)
    return manifest_path


def make_noisy_depth(
    seed: int,
    size: int = 128,
    outlier_fraction: float = 0.10,
    noise_sigma: float = 0.03,
) -> tuple[np.ndarray, np.ndarray]:
    """A piecewise-smooth depth-like field plus its corrupted observation.

    The clean field mixes a smooth background with a few constant-depth
    blocks; the observation adds Gaussian noise and flips a fraction of
    pixels to 0 or 1, mimicking focus-fit failures in an initial depth map.
    Values live in [0, 1].
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    clean = 0.45 + 0.25 * np.sin(2 * np.pi * (0.7 * xx + 0.4 * yy + rng.random()))
    for _ in range(rng.integers(2, 5)):
        h = rng.integers(size // 8, size // 3)
        w = rng.integers(size // 8, size // 3)
        y0 = rng.integers(0, size - h)
        x0 = rng.integers(0, size - w)
        clean[y0 : y0 + h, x0 : x0 + w] = rng.uniform(0.15, 0.85)
    clean = np.clip(clean, 0.05, 0.95)

    noisy = clean + noise_sigma * rng.standard_normal(clean.shape)
    n_out = int(round(outlier_fraction * clean.size))
    flat = rng.choice(clean.size, size=n_out, replace=False)
    noisy.ravel()[flat] = rng.integers(0, 2, size=n_out).astype(float)
    return clean, np.clip(noisy, 0.0, 1.0)


def make_salt_pepper(
    size: int = 16, level: float = 0.5, fraction: float = 0.10, seed: int = 7
) -> np.ndarray:
    """Constant field with a fraction of pixels flipped to 0 or 1."""
    rng = np.random.default_rng(seed)
    img = np.full((size, size), level)
    n = int(round(fraction * img.size))
    flat = rng.choice(img.size, size=n, replace=False)
    img.ravel()[flat] = rng.integers(0, 2, size=n).astype(float)
    return img
