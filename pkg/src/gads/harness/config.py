"""Experiment configuration files.

A config is a JSON object.  Every key is optional except ``schema_version``;
see the README for the full schema.  ``load_config`` reports every problem it
finds at once, each prefixed with the path of the offending key, e.g.
``arms[1].n_dynamic: must be an integer >= 0``.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .scenes import EXTRA, SUITE

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "GADS_OUTPUT_ROOT"
SAMPLERS = ("stratified", "gads")
FIELDS = ("analytic", "photo")
FUSION_SCHEMES = ("uniform", "variance-softmax", "angle-softmax", "var", "angle")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  {e}" for e in self.errors))


@dataclass(frozen=True)
class ArmConfig:
    name: str
    sampler: str = "stratified"
    n_stratified: int = 64
    n_coarse: int = 24
    n_dynamic: int = 24

    @property
    def per_ray(self) -> int:
        return self.n_stratified if self.sampler == "stratified" else self.n_coarse + self.n_dynamic


@dataclass(frozen=True)
class CoarseDepthConfig:
    n_hypotheses: int = 64
    tau: float = 3e-4
    near: float | None = None  # None: the scene's near/far
    far: float | None = None
    box_filter: bool = True
    ceiling: float = 1.0


@dataclass(frozen=True)
class FusionConfig:
    scheme: str = "variance-softmax"
    tau: float = 0.01


@dataclass(frozen=True)
class PhotoFieldConfig:
    tau: float = 1e-3
    sigma_scale: float = 50.0


@dataclass(frozen=True)
class ExperimentConfig:
    scene: str | dict = "sphere_plane"
    seed: int = 0
    width: int = 128
    height: int = 128
    n_views: int = 5
    arms: tuple = (ArmConfig("stratified64", "stratified", n_stratified=64),
                   ArmConfig("gads48", "gads", n_coarse=24, n_dynamic=24))
    delta_d: float = 0.8
    dc_noise: float = 0.0
    coarse_depth: CoarseDepthConfig = field(default_factory=CoarseDepthConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    field_type: str = "analytic"
    photo: PhotoFieldConfig = field(default_factory=PhotoFieldConfig)
    oracle_samples: int = 4096
    msc_levels: int = 3
    alpha: float = 1.0
    beta: float = 1.0
    eps_bg: float = 1e-3
    output_dir: str = "runs/experiment"
    threads: int = 1
    dump_cost_volume: bool = False
    schema_version: int = SCHEMA_VERSION

    @property
    def scene_name(self) -> str:
        return self.scene if isinstance(self.scene, str) else self.scene.get("name", "custom")

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arms"] = [asdict(a) for a in self.arms]
        return d

    def replace(self, **kw) -> "ExperimentConfig":
        """Copy with top-level or dotted (``coarse_depth.tau``) keys replaced; re-validated."""
        d = self.to_dict()
        for k, v in kw.items():
            node = d
            *head, last = k.split(".")
            for h in head:
                node = node[h]
            node[last] = v
        return config_from_dict(d)


# ---------------------------------------------------------------- validation

def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Checker:
    def __init__(self):
        self.errors = []

    def err(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def known(self, d, allowed, prefix):
        for k in d:
            if k not in allowed:
                self.err(f"{prefix}{k}", "unknown key")

    def int(self, d, key, path, lo=None):
        v = d[key]
        if not _is_int(v) or (lo is not None and v < lo):
            self.err(path, f"must be an integer >= {lo}" if lo is not None else "must be an integer")
            return False
        return True

    def num(self, d, key, path, positive=False, nonneg=False):
        v = d[key]
        if not _is_num(v) or (positive and not v > 0) or (nonneg and not v >= 0):
            self.err(path, "must be a positive number" if positive
                     else "must be a non-negative number" if nonneg else "must be a number")
            return False
        return True

    def bool(self, d, key, path):
        if not isinstance(d[key], bool):
            self.err(path, "must be true or false")

    def choice(self, d, key, path, options):
        if d[key] not in options:
            self.err(path, f"must be one of {', '.join(options)}")


def _section(chk, raw, key, cls, checks):
    sub = raw.get(key, {})
    if not isinstance(sub, dict):
        chk.err(key, "must be an object")
        return cls()
    defaults = asdict(cls())
    chk.known(sub, defaults, f"{key}.")
    merged = {**defaults, **{k: v for k, v in sub.items() if k in defaults}}
    for name, fn in checks.items():
        if name in sub:
            fn(merged, name, f"{key}.{name}")
    return cls(**merged)


def _check_scene(chk, scene):
    if isinstance(scene, str):
        if scene not in SUITE + EXTRA:
            chk.err("scene", f"unknown scene {scene!r}; known: {', '.join(SUITE + EXTRA)}")
        return
    if not isinstance(scene, dict):
        chk.err("scene", "must be a scene name or a scene object")
        return
    for k in ("scene", "target"):
        if k not in scene:
            chk.err(f"scene.{k}", "required for an inline scene")
    if "refs" in scene and not isinstance(scene["refs"], list):
        chk.err("scene.refs", "must be a list of cameras")
    if not chk.errors:
        from .scenes import SceneSpec
        try:
            SceneSpec.from_dict(scene)
        except (KeyError, TypeError, ValueError) as e:
            chk.err("scene", f"cannot be loaded: {e}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: must be an object"])
    chk = _Checker()
    raw = copy.deepcopy(raw)
    defaults = ExperimentConfig()
    top = {k: getattr(defaults, k) for k in defaults.__dataclass_fields__}
    chk.known(raw, top, "")
    if "schema_version" not in raw:
        chk.err("schema_version", "required")
    elif raw["schema_version"] != SCHEMA_VERSION:
        chk.err("schema_version", f"unsupported version {raw['schema_version']!r} (expected {SCHEMA_VERSION})")
    v = {**top, **{k: raw[k] for k in raw if k in top}}

    _check_scene(chk, v["scene"])
    for k in ("seed",):
        chk.int(v, k, k, lo=0)
    for k in ("width", "height", "oracle_samples", "threads", "msc_levels"):
        chk.int(v, k, k, lo=1)
    chk.int(v, "n_views", "n_views", lo=1)
    chk.num(v, "delta_d", "delta_d", positive=True)
    for k in ("dc_noise", "alpha", "beta"):
        chk.num(v, k, k, nonneg=True)
    chk.num(v, "eps_bg", "eps_bg", positive=True)
    chk.choice(v, "field_type", "field_type", FIELDS)
    chk.bool(v, "dump_cost_volume", "dump_cost_volume")
    if not isinstance(v["output_dir"], str) or not v["output_dir"]:
        chk.err("output_dir", "must be a non-empty string")

    cd = _section(chk, raw, "coarse_depth", CoarseDepthConfig, {
        "n_hypotheses": lambda d, k, p: chk.int(d, k, p, lo=2),
        "tau": lambda d, k, p: chk.num(d, k, p, positive=True),
        "near": lambda d, k, p: d[k] is None or chk.num(d, k, p, positive=True),
        "far": lambda d, k, p: d[k] is None or chk.num(d, k, p, positive=True),
        "box_filter": chk.bool,
        "ceiling": lambda d, k, p: chk.num(d, k, p, nonneg=True),
    })
    if (cd.near is None) != (cd.far is None):
        chk.err("coarse_depth", "near and far must be given together")
    elif cd.near is not None and _is_num(cd.near) and _is_num(cd.far) and not cd.near < cd.far:
        chk.err("coarse_depth.far", "must exceed coarse_depth.near")
    fu = _section(chk, raw, "fusion", FusionConfig, {
        "scheme": lambda d, k, p: chk.choice(d, k, p, FUSION_SCHEMES),
        "tau": lambda d, k, p: chk.num(d, k, p, positive=True),
    })
    ph = _section(chk, raw, "photo", PhotoFieldConfig, {
        "tau": lambda d, k, p: chk.num(d, k, p, positive=True),
        "sigma_scale": lambda d, k, p: chk.num(d, k, p, nonneg=True),
    })

    arms = []
    raw_arms = v["arms"]
    if "arms" in raw and (not isinstance(raw_arms, list) or not raw_arms):
        chk.err("arms", "must be a non-empty list")
        raw_arms = []
    elif "arms" not in raw:
        raw_arms = [asdict(a) for a in raw_arms]
    names = set()
    arm_keys = set(ArmConfig.__dataclass_fields__)
    for i, a in enumerate(raw_arms):
        p = f"arms[{i}]"
        if not isinstance(a, dict):
            chk.err(p, "must be an object")
            continue
        chk.known(a, arm_keys, f"{p}.")
        if not isinstance(a.get("name"), str) or not a.get("name"):
            chk.err(f"{p}.name", "required non-empty string")
        elif a["name"] in names:
            chk.err(f"{p}.name", f"duplicate arm name {a['name']!r}")
        else:
            names.add(a["name"])
        a = {**asdict(ArmConfig("")), **{k: x for k, x in a.items() if k in arm_keys}}
        chk.choice(a, "sampler", f"{p}.sampler", SAMPLERS)
        if a["sampler"] == "stratified":
            chk.int(a, "n_stratified", f"{p}.n_stratified", lo=1)
        else:
            if chk.int(a, "n_coarse", f"{p}.n_coarse", lo=0) & chk.int(a, "n_dynamic", f"{p}.n_dynamic", lo=0):
                if a["n_coarse"] + a["n_dynamic"] < 1:
                    chk.err(p, "n_coarse + n_dynamic must be at least 1")
        arms.append(ArmConfig(**a))

    needs_refs = v["field_type"] == "photo" or any(a.sampler == "gads" for a in arms)
    if needs_refs and _is_int(v["n_views"]) and v["n_views"] < 2:
        chk.err("n_views", "at least 2 reference views are needed for coarse depth or the photo field")
    if _is_int(v["msc_levels"]) and _is_int(v["width"]) and _is_int(v["height"]) and v["msc_levels"] >= 1:
        f = 2 ** (v["msc_levels"] - 1)
        if v["width"] % f or v["height"] % f:
            chk.err("msc_levels", f"width and height must be divisible by {f}")
    if chk.errors:
        raise ConfigError(chk.errors)
    v.update(arms=tuple(arms), coarse_depth=cd, fusion=fu, photo=ph)
    return ExperimentConfig(**v)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError([f"<root>: not valid JSON ({e})"]) from None
    return config_from_dict(raw)


def default_config(**kw) -> ExperimentConfig:
    return replace(ExperimentConfig(), **kw)
