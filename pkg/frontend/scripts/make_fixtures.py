#!/usr/bin/env python3
"""Generate viewer test fixtures with the primary pipeline.

Writes a small refocus bundle, reference renders at several focal choices,
hexagonal kernel masks, and a pair of known-pixel PNGs for the decoder
tests. Everything is produced by the installed `focalstack` package so the
viewer tests check cross-implementation parity, not self-consistency.
"""

import json
import os
import sys

import numpy as np

from focalstack.cli import main as cli_main
from focalstack.defocus import OpticsParams, export_refocus_bundle, hexagonal_kernel
from focalstack.stack_io import DepthMap, FocalStack, save_image, write_png16
from focalstack.synth import make_texture

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

RENDER_PARAMS = [
    {"focus_layer": 0, "aperture_scale": 1.0},
    {"focus_layer": 3, "aperture_scale": 1.5},
    {"focus_layer": 1, "aperture_scale": 0.6},
]


def build_bundle(out_dir):
    rng = np.random.default_rng(42)
    size = 128
    tex = np.stack(
        [
            make_texture(size, size, rng),
            make_texture(size, size, rng),
            make_texture(size, size, rng),
        ],
        axis=2,
    )
    layers = np.zeros((size, size))
    layers[:, 40:] = 1.0
    layers[:, 75:] = 2.0
    layers[:, 105:] = 3.0
    layers[36:84, 14:60] = 0.0  # foreground block overlapping two bands
    depth = DepthMap(values=layers)
    dists = np.array([600.0, 1000.0, 1600.0, 2600.0])
    frames = [np.zeros((size, size, 3))] * 4
    stack = FocalStack(frames=frames, focal_distances_mm=dists)
    optics = OpticsParams(
        focal_length_mm=25.0,
        aperture_diameter_mm=12.5,
        focus_distance_mm=600.0,
        pixel_pitch_um=30.0,
    )
    return export_refocus_bundle(tex, depth, stack, optics, 4, out_dir)


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    bundle_dir = os.path.join(FIXTURES, "bundle")
    build_bundle(bundle_dir)

    renders_dir = os.path.join(FIXTURES, "renders")
    os.makedirs(renders_dir, exist_ok=True)
    params = []
    for spec in RENDER_PARAMS:
        name = f"render_f{spec['focus_layer']}_s{spec['aperture_scale']}.png"
        # Render through the CLI so the fixtures are exactly what the
        # `refocus` subcommand produces.
        code = cli_main(
            [
                "refocus",
                "--bundle", bundle_dir,
                "--focus-layer", str(spec["focus_layer"]),
                "--aperture-scale", str(spec["aperture_scale"]),
                "--output", os.path.join(renders_dir, name),
            ]
        )
        assert code == 0, f"refocus render failed for {spec}"
        params.append({**spec, "path": name})
    with open(os.path.join(renders_dir, "params.json"), "w") as fh:
        json.dump(params, fh, indent=2)

    kernels = {}
    for r in (1, 2, 3, 4, 5, 6):
        kernels[str(r)] = (hexagonal_kernel(r) > 0).astype(int).tolist()
    with open(os.path.join(FIXTURES, "hex_kernels.json"), "w") as fh:
        json.dump(kernels, fh)

    png_dir = os.path.join(FIXTURES, "png")
    os.makedirs(png_dir, exist_ok=True)
    rng = np.random.default_rng(7)
    rgb = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
    save_image(os.path.join(png_dir, "rgb8.png"), rgb.astype(float) / 255.0)
    gray16 = rng.integers(0, 65536, (6, 4)).astype(np.uint16)
    write_png16(os.path.join(png_dir, "gray16.png"), gray16)
    with open(os.path.join(png_dir, "expected.json"), "w") as fh:
        json.dump({"rgb8": rgb.tolist(), "gray16": gray16.tolist()}, fh)

    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    sys.exit(main())
