"""Depth from focal stacks.

Pipeline: load a focus-bracketed stack, align frames to the reference,
compute a per-pixel focus volume, fit the focus peak for an initial depth
map, refine it with TV-L1 denoising solved by preconditioned ADMM, upsample
with the sharp composite as guide, and render layered synthetic defocus.
"""

from focalstack.stack_io import (
    DepthMap,
    FocalStack,
    downsample,
    joint_bilateral_upsample,
    load_image,
    load_stack,
    save_image,
    to_grayscale,
)

__all__ = [
    "DepthMap",
    "FocalStack",
    "downsample",
    "joint_bilateral_upsample",
    "load_image",
    "load_stack",
    "save_image",
    "to_grayscale",
]

__version__ = "0.1.0"
