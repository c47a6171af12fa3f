"""Density/color fields and analytic ground-truth depth.

A field provider is any object with a vectorized ``query(x, d)`` method that
returns ``(sigma, color)`` for points ``x`` of shape ``(N, 3)`` and unit view
directions ``d`` of the same shape.  :class:`SceneField` evaluates a
procedural :class:`SceneDescription`; :class:`PhotoconsistencyField` derives
density from agreement between posed images.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.special import erf

from . import _kernels
from .geometry import Ray, camera_rays

DEPTH_SENTINEL = -1.0
LN2 = float(np.log(2.0))

SHAPES = ("sphere", "box", "gaussian")
TEXTURES = ("solid", "checker", "noise")


class FieldProvider(Protocol):
    def query(self, x: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class FieldSample:
    sigma: float
    color: np.ndarray

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        c = np.asarray(self.color, dtype=np.float64)
        if c.shape != (3,) or np.any(c < 0) or np.any(c > 1):
            raise ValueError("color must be a 3-vector in [0, 1]")


@dataclass
class Primitive:
    """One scene element.

    ``size`` is the radius of a sphere, the half extents of an axis-aligned
    box, or the standard deviation of a gaussian blob.
    """

    shape: str
    center: Sequence[float]
    size: float | Sequence[float]
    sigma_max: float
    albedo: Sequence[float] = (0.8, 0.8, 0.8)
    texture: str = "solid"
    texture_seed: int = 0
    texture_scale: float = 4.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}")
        if self.sigma_max < 0:
            raise ValueError("sigma_max must be non-negative")
        self.center = tuple(float(c) for c in self.center)
        if self.shape == "box":
            s = np.broadcast_to(np.asarray(self.size, dtype=np.float64), (3,))
            self.size = tuple(float(v) for v in s)
        else:
            self.size = float(self.size)
        self.albedo = tuple(float(a) for a in self.albedo)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "center": list(self.center),
            "size": list(self.size) if isinstance(self.size, tuple) else self.size,
            "sigma_max": self.sigma_max,
            "albedo": list(self.albedo),
            "texture": self.texture,
            "texture_seed": self.texture_seed,
            "texture_scale": self.texture_scale,
        }


@dataclass
class SceneDescription:
    primitives: list[Primitive] = field(default_factory=list)
    background: Sequence[float] = (0.0, 0.0, 0.0)

    def to_dict(self) -> dict:
        return {"primitives": [p.to_dict() for p in self.primitives],
                "background": list(self.background)}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneDescription":
        return cls([Primitive(**p) for p in d.get("primitives", [])],
                   tuple(d.get("background", (0.0, 0.0, 0.0))))

    def scaled_density(self, factor: float) -> "SceneDescription":
        prims = [Primitive(**{**p.to_dict(), "sigma_max": p.sigma_max * factor}) for p in self.primitives]
        return SceneDescription(prims, self.background)


# ---------------------------------------------------------------- textures

_NOISE_WAVES = 8


def _noise_params(seed: int):
    rng = np.random.default_rng(seed)
    freqs = rng.normal(size=(_NOISE_WAVES, 3))
    freqs *= rng.uniform(0.6, 1.6, size=(_NOISE_WAVES, 1)) / np.linalg.norm(freqs, axis=1, keepdims=True)
    phases = rng.uniform(0, 2 * np.pi, size=_NOISE_WAVES)
    amps = rng.uniform(0.5, 1.0, size=_NOISE_WAVES)
    return freqs, phases, amps


def texture_value(name: str, local: np.ndarray, seed: int, scale: float) -> np.ndarray:
    """Scalar pattern in [0, 1] evaluated at primitive-local coordinates."""
    if name == "solid":
        return np.ones(local.shape[:-1])
    p = local * scale
    if name == "checker":
        return (np.floor(p).sum(axis=-1) % 2).astype(np.float64)
    freqs, phases, amps = _noise_params(seed)
    s = np.sin(p @ (2 * np.pi * freqs.T) + phases) @ amps
    # sharpen into a high-contrast but smooth pattern
    return 0.5 + 0.5 * np.tanh(1.5 * s / np.sqrt(np.sum(amps**2)))


def _primitive_color(p: Primitive, x: np.ndarray) -> np.ndarray:
    albedo = np.asarray(p.albedo)
    if p.texture == "solid":
        return np.broadcast_to(albedo, x.shape).copy()
    v = texture_value(p.texture, x - np.asarray(p.center), p.texture_seed, p.texture_scale)
    return albedo * (0.15 + 0.85 * v[..., None])


# ---------------------------------------------------------------- densities

def primitive_density(p: Primitive, x: np.ndarray) -> np.ndarray:
    rel = x - np.asarray(p.center)
    if p.shape == "sphere":
        return np.where(np.einsum("...i,...i->...", rel, rel) <= p.size**2, p.sigma_max, 0.0)
    if p.shape == "box":
        return np.where(np.all(np.abs(rel) <= np.asarray(p.size), axis=-1), p.sigma_max, 0.0)
    r2 = np.einsum("...i,...i->...", rel, rel)
    return p.sigma_max * np.exp(-r2 / (2 * p.size**2))


# a primitive's color is skipped where it contributes less than this fraction
# of the total density at the point
_COLOR_FLOOR = 1e-9


class SceneField:
    """Field provider for a procedural scene.

    Color is the density-weighted mean of primitive colors (primitives below
    a 1e-9 share of the local density are left out) and is
    view-independent unless ``view_tint > 0``, in which case it is scaled by
    ``1 - view_tint * (1 - d.z) / 2`` (brighter when looking along ``+z``).
    Points with zero density get black.

    ``query`` runs a compiled kernel; ``query_reference`` is the plain numpy
    evaluation of the same formulas.
    """

    def __init__(self, scene: SceneDescription, view_tint: float = 0.0):
        self.scene = scene
        self.view_tint = float(view_tint)
        self._packed = _kernels.pack(scene.primitives, _noise_params)

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        k, _, c, s, sm = self._packed[:5]
        return _kernels.density_kernel(np.ascontiguousarray(x.reshape(-1, 3)), k, c, s, sm).reshape(x.shape[:-1])

    def query(self, x: np.ndarray, d: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        shape = x.shape[:-1]
        d = np.broadcast_to(np.asarray(d, dtype=np.float64), x.shape)
        sigma, color = _kernels.query_kernel(
            np.ascontiguousarray(x.reshape(-1, 3)), np.ascontiguousarray(d.reshape(-1, 3)),
            self.view_tint, _COLOR_FLOOR, *self._packed)
        return sigma.reshape(shape), color.reshape(shape + (3,))

    def query_reference(self, x: np.ndarray, d: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        shape = x.shape[:-1]
        x = x.reshape(-1, 3)
        dens = [primitive_density(p, x) for p in self.scene.primitives]
        sigma = np.zeros(len(x))
        for dp in dens:
            sigma += dp
        csum = np.zeros((len(x), 3))
        for p, dp in zip(self.scene.primitives, dens):
            m = dp > _COLOR_FLOOR * sigma
            if np.any(m):
                csum[m] += dp[m, None] * _primitive_color(p, x[m])
        with np.errstate(invalid="ignore", divide="ignore"):
            color = np.where(sigma[:, None] > 0, csum / sigma[:, None], 0.0)
        if self.view_tint > 0:
            dz = np.broadcast_to(np.asarray(d, dtype=np.float64), shape + (3,)).reshape(-1, 3)[:, 2]
            color = color * (1 - self.view_tint * (1 - dz) / 2)[:, None]
        return sigma.reshape(shape), np.clip(color, 0.0, 1.0).reshape(shape + (3,))

    def optical_depth(self, origins, dirs, t0, t1) -> np.ndarray:
        """Exact integral of sigma along each ray between ``t0`` and ``t1``."""
        o = np.asarray(origins, dtype=np.float64)
        d = np.asarray(dirs, dtype=np.float64)
        t0 = np.asarray(t0, dtype=np.float64)
        t1 = np.asarray(t1, dtype=np.float64)
        # allow t of shape (R, S) against rays of shape (R, 3)
        extra = (None,) * (max(t0.ndim, t1.ndim) - (o.ndim - 1))
        total = np.zeros(np.broadcast_shapes(t0.shape, t1.shape))
        for p in self.scene.primitives:
            c = np.asarray(p.center)
            if p.shape == "gaussian":
                oc = c - o
                tc = np.einsum("...i,...i->...", oc, d)
                b2 = np.maximum(np.einsum("...i,...i->...", oc, oc) - tc**2, 0.0)
                k = p.sigma_max * np.exp(-b2 / (2 * p.size**2)) * p.size * np.sqrt(np.pi / 2)
                s2 = p.size * np.sqrt(2.0)
                tc, k = tc[(...,) + extra], k[(...,) + extra]
                total = total + k * (erf((t1 - tc) / s2) - erf((t0 - tc) / s2))
                continue
            lo, hi = _ray_extent(p, o, d)
            lo, hi = lo[(...,) + extra], hi[(...,) + extra]
            overlap = np.clip(np.minimum(hi, t1) - np.maximum(lo, t0), 0.0, None)
            total = total + p.sigma_max * overlap
        return total


def _ray_extent(p: Primitive, o: np.ndarray, d: np.ndarray):
    """Entry/exit distances of rays through a hard primitive (empty -> lo > hi)."""
    c = np.asarray(p.center)
    if p.shape == "sphere":
        oc = o - c
        b = np.einsum("...i,...i->...", oc, d)
        disc = b**2 - (np.einsum("...i,...i->...", oc, oc) - p.size**2)
        sq = np.sqrt(np.maximum(disc, 0.0))
        lo = np.where(disc >= 0, -b - sq, np.inf)
        hi = np.where(disc >= 0, -b + sq, -np.inf)
        return lo, hi
    half = np.asarray(p.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (c - half - o) * inv
        tb = (c + half - o) * inv
    tmin = np.fmin(ta, tb)
    tmax = np.fmax(ta, tb)
    # rays parallel to a slab: inside -> unbounded, outside -> empty
    par = d == 0
    inside = np.abs(o - c) <= half
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    return tmin.max(axis=-1), tmax.min(axis=-1)


def query_field(scene: SceneDescription, x, direction) -> FieldSample:
    sigma, color = SceneField(scene).query(np.asarray(x, dtype=np.float64)[None],
                                           np.asarray(direction, dtype=np.float64)[None])
    return FieldSample(float(sigma[0]), color[0])


# ---------------------------------------------------------------- ground truth

GT_STEPS = 4096


def ground_truth_depths(scene: SceneDescription, origins, dirs, near, far,
                        steps: int = GT_STEPS, tol: float = 1e-6) -> np.ndarray:
    """Distance to the first ``T = 0.5`` crossing along each ray.

    The crossing is bracketed on a uniform grid of ``steps`` intervals of the
    exact optical depth and refined by bisection to ``tol``.  Rays whose
    transmittance never drops below one half get :data:`DEPTH_SENTINEL`.
    """
    f = SceneField(scene)
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = len(o)
    near = np.broadcast_to(np.asarray(near, dtype=np.float64), (n,))
    far = np.broadcast_to(np.asarray(far, dtype=np.float64), (n,))
    out = np.full(n, DEPTH_SENTINEL)
    chunk = max(1, 2**21 // (steps + 1))
    for s in range(0, n, chunk):
        sl = slice(s, s + chunk)
        grid = near[sl, None] + (far[sl] - near[sl])[:, None] * np.linspace(0, 1, steps + 1)
        tau = f.optical_depth(o[sl], d[sl], near[sl, None], grid)
        crossed = tau >= LN2
        hit = crossed.any(axis=1)
        if not hit.any():
            continue
        i = np.argmax(crossed, axis=1)[hit]
        rows = np.nonzero(hit)[0]
        a = grid[rows, np.maximum(i - 1, 0)]
        b = grid[rows, i]
        oo, dd, nn = o[sl][rows], d[sl][rows], near[sl][rows]
        while np.max(b - a) > tol:
            m = 0.5 * (a + b)
            over = f.optical_depth(oo, dd, nn, m) >= LN2
            b = np.where(over, m, b)
            a = np.where(over, a, m)
        out[s + rows] = 0.5 * (a + b)
    return out


def ground_truth_depth(scene: SceneDescription, ray: Ray) -> float:
    return float(ground_truth_depths(scene, ray.origin[None], ray.direction[None],
                                     ray.t_near, ray.t_far)[0])


def ground_truth_depth_map(scene: SceneDescription, camera, near, far) -> np.ndarray:
    o, d, _ = camera_rays(camera)
    return ground_truth_depths(scene, o, d, near, far).reshape(camera.height, camera.width)


# ---------------------------------------------------------------- photo-consistency

class PhotoconsistencyField:
    """Density from multi-view color agreement.

    ``sigma = sigma_scale * exp(-variance / tau)`` where ``variance`` is the
    across-view color variance (averaged over channels) of the views that see
    the point.  Fewer than two such views gives zero density.  Color is the
    fused color of those views.
    """

    def __init__(self, views, tau: float = 1e-3, sigma_scale: float = 50.0,
                 scheme: str = "variance-softmax", fusion_tau: float = 0.01):
        self.views = list(views)
        self.tau = float(tau)
        self.sigma_scale = float(sigma_scale)
        self.scheme = scheme
        self.fusion_tau = float(fusion_tau)

    def query(self, x, d):
        from .fusion import ViewFetch, fetch_views, fuse

        x = np.asarray(x, dtype=np.float64)
        shape = x.shape[:-1]
        x = x.reshape(-1, 3)
        d = np.asarray(d, dtype=np.float64).reshape(-1, 3)
        fetches = fetch_views(x, self.views)
        vals = np.stack([f.value for f in fetches])
        valid = np.stack([f.valid for f in fetches])
        nvalid = valid.sum(axis=0)
        ok = nvalid >= 2
        sigma = np.zeros(len(x))
        color = np.zeros((len(x), 3))
        if np.any(ok):
            v = vals[:, ok]
            w = valid[:, ok, None].astype(np.float64)
            n = nvalid[ok, None]
            mean = (v * w).sum(0) / n
            var = (((v - mean) ** 2) * w).sum(0) / n
            sigma[ok] = self.sigma_scale * np.exp(-var.mean(axis=-1) / self.tau)
            sub = [ViewFetch(f.index, f.value[ok], f.valid[ok], f.direction[ok]) for f in fetches]
            color[ok], _ = fuse(sub, self.scheme, self.fusion_tau, target_dir=d[ok])
        return sigma.reshape(shape), np.clip(color, 0, 1).reshape(shape + (3,))


def query_photoconsistency_field(views, x, params: dict) -> FieldSample:
    f = PhotoconsistencyField(views, tau=params.get("tau", 1e-3),
                              sigma_scale=params.get("sigma_scale", 50.0))
    x = np.asarray(x, dtype=np.float64)[None]
    sigma, color = f.query(x, np.array([[0.0, 0.0, 1.0]]))
    return FieldSample(float(sigma[0]), color[0])
