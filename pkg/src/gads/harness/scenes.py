"""Procedural test scenes with camera rigs.

World frame is z-up, units are meters.  Every rig has one target camera and
``n_views`` reference cameras placed around it; reference ``i`` is the same
camera for every ``n_views > i`` so rigs of different sizes are nested.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fields import Primitive, SceneDescription
from ..geometry import Camera, CameraIntrinsics, Pose

SUITE = ("sphere_plane", "occluding_boxes", "blob_cluster")
EXTRA = ("textured_plane",)
FOV_DEG = 40.0
# references see a wider field so they cover the target frustum edges
REF_FOV_DEG = 55.0
GOLDEN = np.pi * (3 - np.sqrt(5))


@dataclass
class SceneSpec:
    name: str
    scene: SceneDescription
    target: Camera
    refs: list[Camera] = field(default_factory=list)
    near: float = 1.0
    far: float = 10.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "scene": self.scene.to_dict(),
            "near": self.near,
            "far": self.far,
            "target": self.target.to_dict(),
            "refs": [c.to_dict() for c in self.refs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(d.get("name", "custom"), SceneDescription.from_dict(d["scene"]),
                   Camera.from_dict(d["target"]), [Camera.from_dict(c) for c in d.get("refs", [])],
                   float(d.get("near", 1.0)), float(d.get("far", 10.0)))

    def with_views(self, n_views: int) -> "SceneSpec":
        if n_views > len(self.refs):
            raise ValueError(f"scene {self.name!r} has only {len(self.refs)} reference views")
        return SceneSpec(self.name, self.scene, self.target, self.refs[:n_views], self.near, self.far)


def _orbit(look_at, radius, azimuth_deg, elevation_deg):
    az, el = np.radians(azimuth_deg), np.radians(elevation_deg)
    return np.asarray(look_at) + radius * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def orbit_rig(intr: CameraIntrinsics, look_at, radius, azimuth, elevation, n_views, spread_deg=9.0,
              ref_intr: CameraIntrinsics | None = None):
    """Target on a hemisphere plus references on a ring ``spread_deg`` around it."""
    target = Camera(intr, Pose.look_at(_orbit(look_at, radius, azimuth, elevation), look_at))
    ref_intr = ref_intr or intr
    refs = []
    for i in range(n_views):
        a = i * GOLDEN
        r = spread_deg * (0.75 + 0.25 * ((i * 0.618) % 1.0))
        eye = _orbit(look_at, radius, azimuth + r * np.cos(a), elevation + 0.7 * r * np.sin(a))
        refs.append(Camera(ref_intr, Pose.look_at(eye, look_at)))
    return target, refs


def _intrinsics(width, height):
    return (CameraIntrinsics.from_fov(width, height, FOV_DEG),
            CameraIntrinsics.from_fov(width, height, REF_FOV_DEG))


def _ground(seed, half=6.0):
    return Primitive("box", (0, 0, -0.1), (half, half, 0.1), 40.0, (0.75, 0.7, 0.55), "noise",
                     seed, 2.5)


def sphere_plane(seed: int = 0, width: int = 128, height: int = 128, n_views: int = 5) -> SceneSpec:
    rng = np.random.default_rng([seed, 1])
    r = 0.6
    c = (rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), r)
    scene = SceneDescription(
        [_ground(seed * 10 + 1), Primitive("sphere", c, r, 40.0, (0.35, 0.6, 0.9), "noise", seed * 10 + 2, 3.0)],
        (0.08, 0.08, 0.12),
    )
    intr, ref_intr = _intrinsics(width, height)
    target, refs = orbit_rig(intr, (0, 0, 0.4), 4.5, -60 + rng.uniform(-10, 10), 45, n_views,
                             ref_intr=ref_intr)
    return SceneSpec("sphere_plane", scene, target, refs, 2.0, 9.0)


def occluding_boxes(seed: int = 0, width: int = 128, height: int = 128, n_views: int = 5) -> SceneSpec:
    # framed close with a wide reference ring so the front box hides part of the back box and
    # the ground from some references
    rng = np.random.default_rng([seed, 2])
    front = Primitive("box", (0.35 + rng.uniform(-0.05, 0.05), -0.55, 0.45), (0.3, 0.3, 0.45), 40.0,
                      (0.9, 0.5, 0.3), "noise", seed * 10 + 3, 3.0)
    back = Primitive("box", (-0.35, 0.45 + rng.uniform(-0.05, 0.05), 0.55), (0.4, 0.4, 0.55), 40.0,
                     (0.3, 0.8, 0.5), "noise", seed * 10 + 4, 3.0)
    scene = SceneDescription([_ground(seed * 10 + 1), front, back], (0.08, 0.08, 0.12))
    intr, ref_intr = _intrinsics(width, height)
    target, refs = orbit_rig(intr, (0, 0, 0.4), 3.5, -70 + rng.uniform(-5, 5), 35, n_views,
                             spread_deg=12.0, ref_intr=ref_intr)
    return SceneSpec("occluding_boxes", scene, target, refs, 1.5, 8.0)


def blob_cluster(seed: int = 0, width: int = 128, height: int = 128, n_views: int = 5) -> SceneSpec:
    rng = np.random.default_rng([seed, 3])
    prims = [_ground(seed * 10 + 1)]
    for i in range(5):
        c = rng.uniform([-0.6, -0.6, 0.35], [0.6, 0.6, 0.8])
        albedo = rng.uniform(0.3, 0.95, size=3)
        prims.append(Primitive("gaussian", c, rng.uniform(0.22, 0.32), rng.uniform(25, 40), albedo,
                               "noise", seed * 10 + 5 + i, 3.0))
    scene = SceneDescription(prims, (0.08, 0.08, 0.12))
    intr, ref_intr = _intrinsics(width, height)
    target, refs = orbit_rig(intr, (0, 0, 0.4), 4.5, -45 + rng.uniform(-10, 10), 40, n_views,
                             ref_intr=ref_intr)
    return SceneSpec("blob_cluster", scene, target, refs, 2.0, 9.0)


PLANE_NEAR, PLANE_FAR, PLANE_HYPOTHESES = 1.0, 6.0, 64
# default wall depth: hypothesis 24 of 64 inverse-depth planes over [1, 6]
PLANE_DEPTH = 1.0 / np.linspace(1.0 / PLANE_NEAR, 1.0 / PLANE_FAR, PLANE_HYPOTHESES)[24]


def textured_plane(seed: int = 0, width: int = 128, height: int = 128, n_views: int = 5,
                   depth: float | None = None, baseline: float = 0.3) -> SceneSpec:
    """Fronto-parallel textured wall at ``depth`` in front of an identity-pose target.

    References are pure translations of the target, so the wall stays
    fronto-parallel in every view.  The depth range is fixed at [1, 6].
    """
    depth = PLANE_DEPTH if depth is None else float(depth)
    wall = Primitive("box", (0, 0, depth + 0.5), (20, 20, 0.5), 200.0, (0.9, 0.85, 0.8), "noise",
                     seed * 10 + 7, 4.0)
    scene = SceneDescription([wall], (0.0, 0.0, 0.0))
    intr = CameraIntrinsics.from_fov(width, height, FOV_DEG)
    target = Camera(intr, Pose.identity())
    refs = []
    for i in range(n_views):
        a = i * GOLDEN
        off = baseline * (0.75 + 0.25 * ((i * 0.618) % 1.0)) * np.array([np.cos(a), np.sin(a), 0.0])
        refs.append(Camera(intr, Pose(np.eye(3), -off)))
    return SceneSpec("textured_plane", scene, target, refs, PLANE_NEAR, PLANE_FAR)


_BUILDERS = {f.__name__: f for f in (sphere_plane, occluding_boxes, blob_cluster, textured_plane)}


def get_scene(name: str, seed: int = 0, width: int = 128, height: int = 128, n_views: int = 5) -> SceneSpec:
    try:
        return _BUILDERS[name](seed, width, height, n_views)
    except KeyError:
        raise KeyError(f"unknown scene {name!r}; known: {sorted(_BUILDERS)}") from None


def make_scene_suite(seed: int = 0, width: int = 128, height: int = 128, n_views: int = 5) -> list[SceneSpec]:
    return [get_scene(n, seed, width, height, n_views) for n in SUITE]
