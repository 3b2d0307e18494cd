"""Command-line pipeline driver.

Subcommands:
    depth          full pipeline: align, focus volume, initial depth,
                   downsample, TV-L1 refinement, guided upsample
    bench          solver benchmark over seeded synthetic instances
    refocus        render one defocused view from a refocus bundle
    synth          generate a synthetic focal stack with ground truth
    export-bundle  run the pipeline and write a refocus bundle

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from focalstack import align as align_mod
from focalstack import focus as focus_mod
from focalstack.defocus import (
    OpticsParams,
    export_refocus_bundle,
    load_refocus_bundle,
    synthetic_defocus,
)
from focalstack.optimize import (
    BASELINE_METHODS,
    DenoiseProblem,
    PADMMConfig,
    baseline_solve,
    padmm_solve,
)
from focalstack.stack_io import (
    DepthMap,
    downsample,
    joint_bilateral_upsample,
    load_stack,
    save_depth,
    save_image,
)
from focalstack.synth import SceneSpec, make_noisy_depth, write_scene

ALL_METHODS = ("padmm",) + BASELINE_METHODS

DEFAULT_OPTICS = {
    "focal_length_mm": 4.2,
    "f_number": 2.8,
    "pixel_pitch_um": 1.5,
}


@dataclass
class PipelineConfig:
    input: str = ""
    output: str = "out"
    lam: float = 0.7
    max_iters: int = 300
    downsample_factor: int = 3
    mean_filter_radius: int = 2
    align: bool = True
    method: str = "padmm"
    layers: int = 12
    seed: int = 0
    threads: int = 1
    dump_focus: bool = False

    def validate(self) -> None:
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.max_iters < 1:
            raise ValueError("max-iters must be >= 1")
        if self.downsample_factor < 1:
            raise ValueError("downsample factor must be >= 1")
        if self.mean_filter_radius < 0:
            raise ValueError("mean-filter radius must be >= 0")
        if self.layers < 2:
            raise ValueError("layer count must be >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method: {self.method!r}")


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge defaults, optional config file, and explicit CLI flags."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        known = {f.name for f in fields(PipelineConfig)}
        unknown = set(file_cfg) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **file_cfg)
    flag_map = {
        "input": "input",
        "output": "output",
        "lam": "lam",
        "max_iters": "max_iters",
        "downsample": "downsample_factor",
        "radius": "mean_filter_radius",
        "method": "method",
        "layers": "layers",
        "seed": "seed",
        "threads": "threads",
    }
    overrides = {}
    for flag, name in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[name] = val
    if getattr(args, "no_align", False):
        overrides["align"] = False
    if getattr(args, "dump_focus", False):
        overrides["dump_focus"] = True
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


class _StageTimer:
    def __init__(self):
        self.stages: list[tuple[str, float]] = []

    def run(self, name, fn):
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        self.stages.append((name, dt))
        print(f"[{name}] {dt:.2f}s")
        return out


def run_depth_pipeline(cfg: PipelineConfig) -> dict:
    """Execute the full depth pipeline; returns the produced artifacts."""
    os.makedirs(cfg.output, exist_ok=True)
    timer = _StageTimer()

    stack = timer.run("load", lambda: load_stack(cfg.input))

    if cfg.align:
        def do_align():
            aligned, reports = align_mod.align_stack(stack, threads=cfg.threads)
            with open(os.path.join(cfg.output, "alignment.json"), "w") as fh:
                json.dump([r.to_dict() for r in reports], fh, indent=2)
            return aligned

        stack_aligned = timer.run("align", do_align)
    else:
        stack_aligned = stack

    volume = timer.run(
        "focus-volume",
        lambda: focus_mod.build_focus_volume(stack_aligned, cfg.mean_filter_radius),
    )
    if cfg.dump_focus:
        focus_mod.dump_focus_volume(volume, os.path.join(cfg.output, "focus_volume"))
    depth0 = timer.run("initial-depth", lambda: focus_mod.initial_depth(volume))
    aif = timer.run("all-in-focus", lambda: focus_mod.all_in_focus(stack_aligned, depth0))

    def refine():
        nf = stack_aligned.num_frames
        lo_vals = downsample(depth0.values, cfg.downsample_factor)
        scale = max(nf - 1.0, 1.0)
        problem = DenoiseProblem(observed=lo_vals / scale, lam=cfg.lam)
        solver_cfg = PADMMConfig(max_iters=cfg.max_iters)
        if cfg.method == "padmm":
            refined, trace = padmm_solve(problem, solver_cfg)
        else:
            refined, trace = baseline_solve(problem, cfg.method, solver_cfg)
        trace.to_csv(os.path.join(cfg.output, f"trace_{cfg.method}.csv"))
        lo_conf = np.clip(downsample(depth0.confidence, cfg.downsample_factor), 0, 1)
        return DepthMap(values=refined.values * scale, confidence=lo_conf)

    depth_lo = timer.run("refine", refine)

    def upsample():
        if cfg.downsample_factor == 1:
            return depth_lo
        return joint_bilateral_upsample(
            depth_lo, aif, cfg.downsample_factor, sigma_spatial=float(cfg.downsample_factor)
        )

    depth_hi = timer.run("upsample", upsample)

    depth_path = os.path.join(cfg.output, "depth.png")
    save_depth(depth_hi, depth_path)
    save_image(os.path.join(cfg.output, "allfocus.png"), aif)
    total = sum(dt for _, dt in timer.stages)
    print(f"[total] {total:.2f}s")
    return {
        "depth": depth_hi,
        "allfocus": aif,
        "stack": stack_aligned,
        "stages": timer.stages,
    }


def cmd_depth(args) -> int:
    cfg = load_config(args)
    run_depth_pipeline(cfg)
    return 0


def cmd_export_bundle(args) -> int:
    cfg = load_config(args)
    result = run_depth_pipeline(cfg)
    stack = result["stack"]
    optics_dict = dict(DEFAULT_OPTICS)
    if stack.optics:
        optics_dict.update(stack.optics)
    optics = OpticsParams.from_dict(optics_dict)
    bundle_dir = os.path.join(cfg.output, "bundle")
    export_refocus_bundle(
        result["allfocus"], result["depth"], stack, optics, cfg.layers, bundle_dir
    )
    print(f"bundle written to {bundle_dir}")
    return 0


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ValueError("at least one method required")
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method: {m!r}")
    if args.seeds < 1:
        raise ValueError("seeds must be >= 1")
    os.makedirs(args.output, exist_ok=True)
    lam = args.lam if args.lam is not None else 0.7
    max_iters = args.max_iters if args.max_iters is not None else 300
    cfg = PADMMConfig(max_iters=max_iters, tol=0.0)

    finals: dict[str, list[float]] = {m: [] for m in methods}
    for seed in range(args.seeds):
        _, noisy = make_noisy_depth(seed, size=args.size)
        problem = DenoiseProblem(observed=noisy, lam=lam)
        for m in methods:
            if m == "padmm":
                _, trace = padmm_solve(problem, cfg)
            else:
                _, trace = baseline_solve(problem, m, cfg)
            trace.to_csv(os.path.join(args.output, f"{m}_seed{seed}.csv"))
            finals[m].append(trace.final_residual)

    summary = {
        m: {
            "median_final_residual": float(np.median(finals[m])),
            "mean_final_residual": float(np.mean(finals[m])),
            "std_final_residual": float(np.std(finals[m])),
        }
        for m in methods
    }
    with open(os.path.join(args.output, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"{'method':<26} {'median':>12} {'mean':>12} {'std':>12}")
    for m in methods:
        s = summary[m]
        print(
            f"{m:<26} {s['median_final_residual']:>12.4e} "
            f"{s['mean_final_residual']:>12.4e} {s['std_final_residual']:>12.4e}"
        )
    return 0


def cmd_refocus(args) -> int:
    bundle = load_refocus_bundle(args.bundle)
    img = synthetic_defocus(bundle, args.focus_layer, args.aperture_scale)
    save_image(args.output, img)
    print(f"refocused render written to {args.output}")
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        spec = SceneSpec.from_json(args.spec)
    else:
        spec = SceneSpec(
            kind=args.kind,
            width=args.width,
            height=args.height,
            num_frames=args.frames,
            seed=args.seed if args.seed is not None else 0,
        )
    manifest = write_scene(spec, args.output)
    print(f"scene written, manifest at {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="focalstack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pipeline_flags(p):
        p.add_argument("--input", required=False, help="stack manifest JSON")
        p.add_argument("--output", help="output directory")
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--lambda", dest="lam", type=float, help="fidelity weight")
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--downsample", type=int, help="pre-solver downsample factor")
        p.add_argument("--radius", type=int, help="focus mean-filter radius")
        p.add_argument("--method", choices=ALL_METHODS)
        p.add_argument("--layers", type=int, help="refocus bundle layer count")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--no-align", action="store_true", dest="no_align")
        p.add_argument(
            "--dump-focus", action="store_true", dest="dump_focus",
            help="write the focus volume as 16-bit PNGs for debugging",
        )

    p_depth = sub.add_parser("depth", help="run the depth pipeline")
    add_pipeline_flags(p_depth)
    p_depth.set_defaults(func=cmd_depth)

    p_export = sub.add_parser("export-bundle", help="pipeline + refocus bundle")
    add_pipeline_flags(p_export)
    p_export.set_defaults(func=cmd_export_bundle)

    p_bench = sub.add_parser("bench", help="solver benchmark")
    p_bench.add_argument("--output", required=True)
    p_bench.add_argument("--methods", default=",".join(ALL_METHODS))
    p_bench.add_argument("--seeds", type=int, default=10)
    p_bench.add_argument("--size", type=int, default=128)
    p_bench.add_argument("--lambda", dest="lam", type=float)
    p_bench.add_argument("--max-iters", dest="max_iters", type=int)
    p_bench.set_defaults(func=cmd_bench)

    p_refocus = sub.add_parser("refocus", help="render from a bundle")
    p_refocus.add_argument("--bundle", required=True)
    p_refocus.add_argument("--focus-layer", type=int, required=True)
    p_refocus.add_argument("--aperture-scale", type=float, default=1.0)
    p_refocus.add_argument("--output", required=True)
    p_refocus.set_defaults(func=cmd_refocus)

    p_synth = sub.add_parser("synth", help="generate a synthetic stack")
    p_synth.add_argument("--output", required=True)
    p_synth.add_argument("--spec", help="scene spec JSON (overrides flags)")
    p_synth.add_argument("--kind", choices=("two_plane", "ramp"), default="two_plane")
    p_synth.add_argument("--width", type=int, default=360)
    p_synth.add_argument("--height", type=int, default=360)
    p_synth.add_argument("--frames", type=int, default=12)
    p_synth.add_argument("--seed", type=int)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
