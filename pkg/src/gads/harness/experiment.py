"""Sampler comparison experiments.

Per experiment: the target and reference views are rendered with the dense
oracle, the target's analytic depth is computed, and (when a ``gads`` arm is
present) plane-sweep coarse depth over the references gives per-pixel
sampling intervals.  Each arm then renders the target and is scored against
the oracle image and the analytic depth.

Arms run one after another.  A failing arm is recorded in the report and
the remaining arms still run.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import io
from ..coarse_depth import build_cost_volume, inverse_depth_hypotheses, regress_depth, z_to_ray_distance
from ..fields import DEPTH_SENTINEL, PhotoconsistencyField, SceneField, ground_truth_depth_map
from ..fusion import PosedImage
from ..metrics import DepthMetrics, ImageMetrics, NoDataError, composite_score, depth_metrics, image_metrics
from ..rendering import DepthMap, RenderResult, SamplerConfig, render_view
from ..sampling import geometry_intervals
from .config import ArmConfig, ExperimentConfig
from .scenes import SceneSpec, get_scene

CSV_COLUMNS = (
    "scene", "seed", "arm", "sampler", "n_stratified", "n_coarse", "n_dynamic", "samples_per_ray",
    "field_evals", "status", "mse", "psnr", "ssim", "msc", "composite",
    "abs_rel", "sq_rel", "rmse", "delta1", "delta2", "delta3", "error",
)
SWEEP_AXES = ("delta_d", "n_samples", "n_views")

# oracle renders keyed by (scene, camera, samples, seed); shared across
# experiments in one process so sweeps render each view once
_ORACLE_CACHE: dict = {}
# optional directory for persisting oracle renders between processes
ORACLE_CACHE_ENV = "GADS_ORACLE_CACHE"


@dataclass
class ArmResult:
    arm: ArmConfig
    status: str = "ok"
    image: ImageMetrics | None = None
    depth: DepthMetrics | None = None
    composite: float | None = None
    field_evals: int = 0
    wall_time: float = 0.0
    error: str = ""
    render: RenderResult | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    arms: list[ArmResult]
    oracle: np.ndarray = field(repr=False, default=None)
    gt_depth: DepthMap = field(repr=False, default=None)
    coarse_depth: DepthMap | None = field(repr=False, default=None)
    cost_volume: object = field(repr=False, default=None)
    output_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return all(a.ok for a in self.arms)

    def arm(self, name: str) -> ArmResult:
        for a in self.arms:
            if a.arm.name == name:
                return a
        raise KeyError(name)

    def rows(self) -> list[dict]:
        return [_row(self.config, a) for a in self.arms]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def _row(cfg: ExperimentConfig, a: ArmResult) -> dict:
    r = {
        "scene": cfg.scene_name, "seed": cfg.seed, "arm": a.arm.name, "sampler": a.arm.sampler,
        "n_stratified": a.arm.n_stratified if a.arm.sampler == "stratified" else "",
        "n_coarse": a.arm.n_coarse if a.arm.sampler == "gads" else "",
        "n_dynamic": a.arm.n_dynamic if a.arm.sampler == "gads" else "",
        "samples_per_ray": a.arm.per_ray, "field_evals": a.field_evals, "status": a.status,
        "composite": a.composite, "error": a.error,
    }
    for k in ("mse", "psnr", "ssim", "msc"):
        r[k] = getattr(a.image, k) if a.image else None
    for k in ("abs_rel", "sq_rel", "rmse", "delta1", "delta2", "delta3"):
        r[k] = getattr(a.depth, k) if a.depth else None
    return {k: _fmt(r[k]) for k in CSV_COLUMNS}


def write_csv(path, rows: list[dict], columns) -> None:
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------- pipeline pieces

def load_scene(cfg: ExperimentConfig) -> SceneSpec:
    if isinstance(cfg.scene, str):
        return get_scene(cfg.scene, cfg.seed, cfg.width, cfg.height, cfg.n_views)
    return SceneSpec.from_dict(cfg.scene).with_views(cfg.n_views)


def oracle_render(spec: SceneSpec, camera, samples: int, seed: int, threads: int = 1) -> np.ndarray:
    key = (json.dumps(spec.scene.to_dict(), sort_keys=True), json.dumps(camera.to_dict(), sort_keys=True),
           spec.near, spec.far, samples, seed)
    if key in _ORACLE_CACHE:
        return _ORACLE_CACHE[key]
    disk = os.environ.get(ORACLE_CACHE_ENV)
    path = None
    if disk:
        path = Path(disk) / (hashlib.sha256(repr(key).encode()).hexdigest()[:32] + ".npy")
        if path.exists():
            _ORACLE_CACHE[key] = np.load(path)
            return _ORACLE_CACHE[key]
    r = render_view(SceneField(spec.scene), camera, SamplerConfig("stratified", samples),
                    spec.scene.background, spec.near, spec.far, seed=seed, threads=threads)
    _ORACLE_CACHE[key] = r.image.rgb
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, r.image.rgb)
    return r.image.rgb


def clear_oracle_cache() -> None:
    _ORACLE_CACHE.clear()


def reference_views(spec: SceneSpec, cfg: ExperimentConfig) -> list[PosedImage]:
    # reference i keeps its camera and seed for any n_views > i, so nested rigs share renders
    return [PosedImage(c, oracle_render(spec, c, cfg.oracle_samples, _oracle_seed(cfg.seed, i + 1), cfg.threads))
            for i, c in enumerate(spec.refs)]


def _oracle_seed(seed: int, view: int) -> int:
    return int(np.random.SeedSequence([seed, 0x0AC1E, view]).generate_state(1)[0])


def coarse_depth(spec: SceneSpec, refs: list[PosedImage], cfg: ExperimentConfig):
    """Plane-sweep coarse depth as ray distances, plus the cost volume."""
    cd = cfg.coarse_depth
    near = cd.near if cd.near is not None else spec.near
    far = cd.far if cd.far is not None else spec.far
    hyp = inverse_depth_hypotheses(near, far, cd.n_hypotheses)
    vol = build_cost_volume(spec.target, refs, hyp, ceiling=cd.ceiling, box_filter=cd.box_filter)
    d = z_to_ray_distance(regress_depth(vol, cd.tau), spec.target)
    if cfg.dc_noise > 0:
        noise = np.random.default_rng([cfg.seed, 0xD0C]).normal(0.0, cfg.dc_noise, d.depth.shape)
        d = DepthMap(np.where(d.valid, d.depth + noise, d.sentinel), d.sentinel, d.eps_bg)
    return d, vol


def make_field(spec: SceneSpec, refs, cfg: ExperimentConfig):
    if cfg.field_type == "photo":
        return PhotoconsistencyField(refs, cfg.photo.tau, cfg.photo.sigma_scale, cfg.fusion.scheme, cfg.fusion.tau)
    return SceneField(spec.scene)


def sampler_config(arm: ArmConfig) -> SamplerConfig:
    return SamplerConfig(arm.sampler, arm.n_stratified, arm.n_coarse, arm.n_dynamic)


# ---------------------------------------------------------------- experiment

def run_experiment(cfg: ExperimentConfig, write: bool = True, log=None) -> ExperimentReport:
    """Run every arm of ``cfg``; write outputs under its output directory when ``write``.

    Outputs: ``oracle.ppm``, ``gt_depth.f32``, ``coarse_depth.f32`` (when
    computed), ``<arm>.ppm`` and ``<arm>_depth.f32`` per successful arm,
    ``metrics.csv`` and ``timings.csv`` (plus ``cost_volume.f32`` with
    ``dump_cost_volume``).  Wall times live only in
    ``timings.csv`` so that ``metrics.csv`` is reproducible byte for byte.
    """
    log = log or (lambda msg: None)
    spec = load_scene(cfg)
    bg = spec.scene.background
    log(f"[{spec.name}] oracle render ({cfg.oracle_samples} samples/ray)")
    oracle = oracle_render(spec, spec.target, cfg.oracle_samples, _oracle_seed(cfg.seed, 0), cfg.threads)
    gt = DepthMap(ground_truth_depth_map(spec.scene, spec.target, spec.near, spec.far), DEPTH_SENTINEL, cfg.eps_bg)

    needs_refs = cfg.field_type == "photo" or any(a.sampler == "gads" for a in cfg.arms)
    refs = reference_views(spec, cfg) if needs_refs else []
    dc = vol = intervals = None
    if any(a.sampler == "gads" for a in cfg.arms):
        log(f"[{spec.name}] coarse depth ({len(refs)} views, {cfg.coarse_depth.n_hypotheses} planes)")
        dc, vol = coarse_depth(spec, refs, cfg)
        intervals = geometry_intervals(dc.depth, cfg.delta_d, spec.near, spec.far)
    fld = make_field(spec, refs, cfg)

    results = []
    for arm in cfg.arms:
        res = ArmResult(arm)
        t0 = time.perf_counter()
        try:
            r = render_view(fld, spec.target, sampler_config(arm), bg, spec.near, spec.far,
                            intervals=intervals if arm.sampler == "gads" else None,
                            eps_bg=cfg.eps_bg, seed=cfg.seed, threads=cfg.threads)
            res.render = r
            res.field_evals = r.field_evals
            res.image = image_metrics(r.image.rgb, oracle, cfg.msc_levels)
            res.composite = composite_score(res.image.mse, res.image.msc, cfg.alpha, cfg.beta)
            try:
                res.depth = depth_metrics(r.depth, gt)
            except NoDataError:
                res.depth = None
        except Exception as e:  # noqa: BLE001 - recorded per arm, other arms keep running
            res.status = "failed"
            res.error = f"{type(e).__name__}: {e}"
            log(traceback.format_exc())
        res.wall_time = time.perf_counter() - t0
        psnr = f"{res.image.psnr:.2f} dB" if res.image else res.error
        log(f"[{spec.name}] {arm.name}: {res.status} {psnr} ({res.wall_time:.1f}s)")
        results.append(res)

    report = ExperimentReport(cfg, results, oracle, gt, dc, vol)
    if write:
        write_report(report)
    return report


def write_report(report: ExperimentReport, out: Path | None = None) -> Path:
    cfg = report.config
    out = Path(out or cfg.resolved_output_dir())
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    io.write_ppm(out / "oracle.ppm", report.oracle)
    io.write_depth(out / "gt_depth.f32", report.gt_depth)
    if report.coarse_depth is not None:
        io.write_depth(out / "coarse_depth.f32", report.coarse_depth)
    if cfg.dump_cost_volume and report.cost_volume is not None:
        report.cost_volume.dump(out / "cost_volume.f32")
    for a in report.arms:
        if a.render is not None:
            io.write_ppm(out / f"{a.arm.name}.ppm", a.render.image.rgb)
            io.write_depth(out / f"{a.arm.name}_depth.f32", a.render.depth)
    write_csv(out / "metrics.csv", report.rows(), CSV_COLUMNS)
    write_csv(out / "timings.csv", [{"arm": a.arm.name, "wall_time_s": f"{a.wall_time:.3f}"} for a in report.arms],
              ("arm", "wall_time_s"))
    report.output_dir = out
    return out


def dump_cost_volume(cfg: ExperimentConfig, path) -> None:
    spec = load_scene(cfg)
    _, vol = coarse_depth(spec, reference_views(spec, cfg), cfg)
    vol.dump(path)


# ---------------------------------------------------------------- sweeps

def _apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "delta_d":
        return cfg.replace(delta_d=float(value))
    if axis == "n_views":
        return cfg.replace(n_views=int(value))
    if axis == "n_samples":
        v = int(value)
        arms = []
        for a in cfg.to_dict()["arms"]:
            if a["sampler"] == "stratified":
                a["n_stratified"] = v
            else:
                a["n_coarse"], a["n_dynamic"] = v // 2, v - v // 2
            arms.append(a)
        return cfg.replace(arms=arms)
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")


def sweep(cfg: ExperimentConfig, axis: str, values, write: bool = True, log=None) -> list[ExperimentReport]:
    """One experiment per value of ``axis``, all with the config's seed.

    For ``n_samples`` each stratified arm uses ``v`` samples and each gads
    arm ``v // 2`` coarse plus the rest dynamic.  Per-value outputs go to
    ``<output_dir>/<axis>_<value>/`` and the combined table to
    ``<output_dir>/sweep.csv`` with the axis value as its first column.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    base = cfg.resolved_output_dir().resolve()
    cfgs = [_apply_axis(cfg, axis, v) for v in values]  # validate every value before running
    reports = []
    rows = []
    for v, c in zip(values, cfgs):
        c = c.replace(output_dir=str(base / f"{axis}_{v}"))
        rep = run_experiment(c, write=write, log=log)
        reports.append(rep)
        rows += [{axis: _fmt(v), **r} for r in rep.rows()]
    if write:
        base.mkdir(parents=True, exist_ok=True)
        write_csv(base / "sweep.csv", rows, (axis,) + CSV_COLUMNS)
    return reports
