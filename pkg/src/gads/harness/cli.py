"""Command line entry point: ``gads {render,experiment,sweep,scene-dump}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .. import io
from ..rendering import render_view
from ..sampling import geometry_intervals
from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig, config_from_dict
from .experiment import (CSV_COLUMNS, SWEEP_AXES, coarse_depth, load_scene, make_field, reference_views,
                         run_experiment, sampler_config, sweep)
from .scenes import EXTRA, SUITE, get_scene

EXIT_OK, EXIT_ARM_FAILED, EXIT_CONFIG = 0, 1, 2


def _depth_range(s: str):
    try:
        near, far = (float(x) for x in s.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected near:far, e.g. 2:9") from None
    return near, far


def _floats(s: str):
    try:
        return [float(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None


def _add_overrides(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config overrides")
    g.add_argument("--scene", choices=SUITE + EXTRA)
    g.add_argument("--seed", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--n-views", type=int)
    g.add_argument("--oracle-samples", type=int)
    g.add_argument("--n-coarse", type=int, help="coarse samples for every gads arm")
    g.add_argument("--n-dynamic", type=int, help="dynamic samples for every gads arm")
    g.add_argument("--delta-d", type=float, help="half width of the sampling interval around coarse depth")
    g.add_argument("--depth-hypotheses", type=int)
    g.add_argument("--depth-range", type=_depth_range, metavar="NEAR:FAR", help="plane-sweep depth range")
    g.add_argument("--tau", type=float, help="coarse-depth softmax temperature")
    g.add_argument("--fusion", choices=("uniform", "var", "angle", "variance-softmax", "angle-softmax"))
    g.add_argument("--fusion-tau", type=float)
    g.add_argument("--dc-noise", type=float, metavar="SIGMA", help="gaussian noise added to coarse depth")
    g.add_argument("--field", choices=("analytic", "photo"), dest="field_type")
    g.add_argument("--threads", type=int)
    g.add_argument("--output-dir")


def _raw_config(args) -> dict:
    raw = {"schema_version": SCHEMA_VERSION}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError([f"<root>: cannot read {args.config}: {e}"]) from None
        if not isinstance(raw, dict):
            raise ConfigError(["<root>: must be an object"])
    top = {"scene": args.scene, "seed": args.seed, "width": args.width, "height": args.height,
           "n_views": args.n_views, "oracle_samples": args.oracle_samples, "delta_d": args.delta_d,
           "dc_noise": args.dc_noise, "field_type": args.field_type, "threads": args.threads,
           "output_dir": args.output_dir}
    raw.update({k: v for k, v in top.items() if v is not None})
    cd = dict(raw.get("coarse_depth", {})) if isinstance(raw.get("coarse_depth", {}), dict) else raw["coarse_depth"]
    if isinstance(cd, dict):
        if args.depth_hypotheses is not None:
            cd["n_hypotheses"] = args.depth_hypotheses
        if args.depth_range is not None:
            cd["near"], cd["far"] = args.depth_range
        if args.tau is not None:
            cd["tau"] = args.tau
        if cd:
            raw["coarse_depth"] = cd
    fu = dict(raw.get("fusion", {})) if isinstance(raw.get("fusion", {}), dict) else raw["fusion"]
    if isinstance(fu, dict):
        if args.fusion is not None:
            fu["scheme"] = args.fusion
        if args.fusion_tau is not None:
            fu["tau"] = args.fusion_tau
        if fu:
            raw["fusion"] = fu
    if args.n_coarse is not None or args.n_dynamic is not None:
        arms = raw.get("arms", [asdict(a) for a in ExperimentConfig().arms])
        if isinstance(arms, list):
            for a in arms:
                if isinstance(a, dict) and a.get("sampler") == "gads":
                    if args.n_coarse is not None:
                        a["n_coarse"] = args.n_coarse
                    if args.n_dynamic is not None:
                        a["n_dynamic"] = args.n_dynamic
            raw["arms"] = arms
    return raw


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _print_table(rows, lead=None) -> None:
    cols = ([lead] if lead else []) + ["arm", "status", "samples_per_ray", "field_evals", "psnr", "ssim", "rmse"]
    print("  ".join(f"{c:>14}" for c in cols))
    for r in rows:
        print("  ".join(f"{r.get(c, '')[:14]:>14}" for c in cols))


def cmd_render(args) -> int:
    raw = _raw_config(args)
    arm = {"name": "render", "sampler": args.sampler}
    if args.sampler == "stratified":
        arm["n_stratified"] = args.n_samples
    else:
        arm["n_coarse"] = args.n_coarse if args.n_coarse is not None else 24
        arm["n_dynamic"] = args.n_dynamic if args.n_dynamic is not None else 24
    raw["arms"] = [arm]
    cfg = config_from_dict(raw)
    spec = load_scene(cfg)
    needs_refs = cfg.field_type == "photo" or args.sampler == "gads"
    refs = reference_views(spec, cfg) if needs_refs else []
    intervals = None
    if args.sampler == "gads":
        dc, _ = coarse_depth(spec, refs, cfg)
        intervals = geometry_intervals(dc.depth, cfg.delta_d, spec.near, spec.far)
    r = render_view(make_field(spec, refs, cfg), spec.target, sampler_config(cfg.arms[0]), spec.scene.background,
                    spec.near, spec.far, intervals=intervals, eps_bg=cfg.eps_bg, seed=cfg.seed,
                    threads=cfg.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    (io.write_png if out.suffix.lower() == ".png" else io.write_ppm)(out, r.image.rgb)
    if args.depth_out:
        io.write_depth(args.depth_out, r.depth)
    print(f"wrote {out} ({r.field_evals} field evaluations)")
    return EXIT_OK


def cmd_experiment(args) -> int:
    raw = _raw_config(args)
    if args.dump_cost_volume:
        raw["dump_cost_volume"] = True
    cfg = config_from_dict(raw)
    rep = run_experiment(cfg, log=None if args.quiet else _log)
    _print_table(rep.rows())
    print(f"wrote {rep.output_dir / 'metrics.csv'}")
    return EXIT_OK if rep.ok else EXIT_ARM_FAILED


def cmd_sweep(args) -> int:
    cfg = config_from_dict(_raw_config(args))
    values = [int(v) if args.axis != "delta_d" else v for v in args.values]
    reps = sweep(cfg, args.axis, values, log=None if args.quiet else _log)
    rows = [{args.axis: str(v), **r} for v, rep in zip(values, reps) for r in rep.rows()]
    _print_table(rows, args.axis)
    print(f"wrote {cfg.resolved_output_dir().resolve() / 'sweep.csv'}")
    return EXIT_OK if all(r.ok for r in reps) else EXIT_ARM_FAILED


def cmd_scene_dump(args) -> int:
    spec = get_scene(args.scene, args.seed, args.width, args.height, args.n_views)
    text = json.dumps(spec.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gads", description="Volume rendering with geometry-aware dynamic sampling.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render the target view of a scene")
    r.add_argument("config", nargs="?", help="experiment config (JSON); optional")
    r.add_argument("--sampler", choices=("stratified", "gads"), default="stratified")
    r.add_argument("--n-samples", type=int, default=64, help="samples per ray for the stratified sampler")
    r.add_argument("--out", default="render.ppm", help=".ppm or .png")
    r.add_argument("--depth-out", help="raw float32 depth map path")
    _add_overrides(r)
    r.set_defaults(func=cmd_render)

    e = sub.add_parser("experiment", help="run every arm of a config and write metrics.csv")
    e.add_argument("config", nargs="?", help="experiment config (JSON); defaults are used without one")
    e.add_argument("--dump-cost-volume", action="store_true")
    e.add_argument("--quiet", action="store_true")
    _add_overrides(e)
    e.set_defaults(func=cmd_experiment)

    s = sub.add_parser("sweep", help="repeat an experiment over values of one parameter")
    s.add_argument("config", nargs="?")
    s.add_argument("--axis", choices=SWEEP_AXES, required=True)
    s.add_argument("--values", type=_floats, required=True, help="comma-separated, e.g. 0.1,0.4,0.8")
    s.add_argument("--quiet", action="store_true")
    _add_overrides(s)
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("scene-dump", help="print a built-in scene and its camera rig as JSON")
    d.add_argument("scene", choices=SUITE + EXTRA)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--width", type=int, default=128)
    d.add_argument("--height", type=int, default=128)
    d.add_argument("--n-views", type=int, default=5)
    d.add_argument("--out")
    d.set_defaults(func=cmd_scene_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG


__all__ = ["main", "build_parser", "CSV_COLUMNS"]
