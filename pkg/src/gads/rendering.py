"""Volume rendering along sampled rays and whole-view rendering.

For samples ``t_1 < ... < t_M`` with slab widths ``delta_j = t_j - t_{j-1}``
(``delta_1`` measured from the interval start)::

    T_j = exp(-sum_{k<j} sigma_k delta_k)
    w_j = T_j (1 - exp(-sigma_j delta_j))
    C   = sum_j w_j c_j + (1 - sum_j w_j) * background

Light that survives past the last sample is attributed to the background.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fields import DEPTH_SENTINEL
from .geometry import Camera, camera_rays
from .samples import RaySamples
from .sampling import (SamplerBudget, dynamic_samples_batch, evaluate_density, evaluate_field,
                       stratified_samples)

EPS_BG = 1e-3
# points evaluated per chunk; fixed so results do not depend on thread count
CHUNK_POINTS = 2**19
# samples lighter than this are composited as black instead of being shaded
COLOR_WEIGHT_FLOOR = 1e-10


class RenderError(RuntimeError):
    def __init__(self, pixel, message):
        super().__init__(f"pixel {pixel}: {message}")
        self.pixel = pixel


@dataclass
class RenderedImage:
    rgb: np.ndarray  # (H, W, 3)
    opacity: np.ndarray  # (H, W)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


@dataclass
class DepthMap:
    depth: np.ndarray  # (H, W); sentinel where no surface
    sentinel: float = DEPTH_SENTINEL
    eps_bg: float = EPS_BG

    @property
    def valid(self) -> np.ndarray:
        return self.depth != self.sentinel

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass
class RenderResult:
    image: RenderedImage
    depth: DepthMap
    field_evals: int


@dataclass(frozen=True)
class SamplerConfig:
    """``kind`` is ``"stratified"`` (uses ``n_stratified``) or ``"gads"``."""

    kind: str = "stratified"
    n_stratified: int = 64
    n_coarse: int = 24
    n_dynamic: int = 24

    @property
    def per_ray(self) -> int:
        return self.n_stratified if self.kind == "stratified" else self.n_coarse + self.n_dynamic


def transmittances(samples: RaySamples) -> RaySamples:
    """Fill ``samples.T`` and ``samples.w`` in place and return ``samples``."""
    sd = samples.sigma * samples.delta
    tau = np.cumsum(sd, axis=-1)
    tau = np.concatenate([np.zeros(sd.shape[:-1] + (1,)), tau[..., :-1]], axis=-1)
    samples.T = np.exp(-tau)
    samples.w = samples.T * -np.expm1(-sd)
    return samples


def composite_color(samples: RaySamples, background) -> np.ndarray:
    if samples.w is None:
        transmittances(samples)
    acc = samples.w.sum(axis=-1)
    c = np.einsum("rk,rkc->rc", samples.w, samples.color)
    return c + (1.0 - acc)[:, None] * np.asarray(background, dtype=np.float64)


def fine_depth(samples: RaySamples, eps_bg: float = EPS_BG) -> np.ndarray:
    """Weight-normalized mean sample depth; sentinel where ``sum w < eps_bg``."""
    if samples.w is None:
        transmittances(samples)
    acc = samples.w.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = (samples.w * samples.t).sum(axis=-1) / acc
    return np.where(acc >= eps_bg, d, DEPTH_SENTINEL)


def fill_colors(field, origins, dirs, samples: RaySamples, min_weight: float = COLOR_WEIGHT_FLOOR):
    """Fetch colors for samples whose weight exceeds ``min_weight``.

    Skipped samples get black; their total contribution to a pixel is at
    most ``K * min_weight``.
    """
    if samples.w is None:
        transmittances(samples)
    need = samples.w > min_weight
    color = np.zeros(samples.t.shape + (3,))
    if np.any(need):
        rows, cols = np.nonzero(need)
        x = origins[rows] + samples.t[rows, cols, None] * dirs[rows]
        color[rows, cols] = field.query(x, dirs[rows])[1]
    samples.color = color
    return samples


def sample_rays(field, origins, dirs, lo, hi, sampler: SamplerConfig, rng) -> RaySamples:
    """Place samples for a batch of rays over ``[lo, hi]`` and evaluate density.

    Colors are filled only where the sampler fetched them (``gads``); use
    :func:`fill_colors` for the rest.
    """
    if sampler.kind == "stratified":
        t = stratified_samples(lo, hi, sampler.n_stratified, rng)
        return RaySamples(t, evaluate_density(field, origins, dirs, t), None, lo)
    if sampler.kind != "gads":
        raise ValueError(f"unknown sampler {sampler.kind!r}")
    budget = SamplerBudget(sampler.n_coarse, sampler.n_dynamic)
    degenerate = (hi - lo) < 1e-9
    if not np.any(degenerate):
        return dynamic_samples_batch(field, origins, dirs, lo, hi, budget, seed=rng)
    # a degenerate interval is one sample at lo, padded with zero-width empty slabs
    k = budget.total
    t = np.repeat(lo[:, None], k, axis=1)
    sigma = np.zeros((len(lo), k))
    color = np.zeros((len(lo), k, 3))
    ok = ~degenerate
    if np.any(ok):
        s = dynamic_samples_batch(field, origins[ok], dirs[ok], lo[ok], hi[ok], budget, seed=rng)
        t[ok], sigma[ok], color[ok] = s.t, s.sigma, s.color
    s1, c1 = evaluate_field(field, origins[degenerate], dirs[degenerate], lo[degenerate][:, None])
    sigma[degenerate, :1], color[degenerate, :1] = s1, c1
    return RaySamples(t, sigma, color, lo)


def render_rays(field, origins, dirs, lo, hi, sampler: SamplerConfig, background,
                eps_bg: float = EPS_BG, seed: int = 0, threads: int = 1):
    """Render a batch of rays.  Returns ``(rgb, opacity, depth, field_evals)``."""
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (n,)).copy()
    chunk = max(1, CHUNK_POINTS // sampler.per_ray)
    starts = list(range(0, n, chunk))
    rgb = np.zeros((n, 3))
    opacity = np.zeros(n)
    depth = np.zeros(n)

    def work(ci):
        sl = slice(starts[ci], starts[ci] + chunk)
        rng = np.random.default_rng([seed, ci])
        s = sample_rays(field, origins[sl], dirs[sl], lo[sl], hi[sl], sampler, rng)
        bad = ~np.isfinite(s.sigma).all(axis=1)
        if s.color is None:
            fill_colors(field, origins[sl], dirs[sl], s)
        bad |= ~np.isfinite(s.color).all(axis=(1, 2))
        if np.any(bad):
            raise RenderError(starts[ci] + int(np.argmax(bad)), "non-finite field value")
        if s.w is None:
            transmittances(s)
        rgb[sl] = np.clip(composite_color(s, background), 0.0, 1.0)
        opacity[sl] = np.clip(s.w.sum(axis=1), 0.0, 1.0)
        depth[sl] = fine_depth(s, eps_bg)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, range(len(starts))))
    else:
        for ci in range(len(starts)):
            work(ci)
    degenerate = (hi - lo) < 1e-9 if sampler.kind == "gads" else np.zeros(n, bool)
    evals = int(np.sum(np.where(degenerate, 1, sampler.per_ray)))
    return rgb, opacity, depth, evals


def render_view(field, camera: Camera, sampler: SamplerConfig, background, near: float, far: float,
                intervals=None, eps_bg: float = EPS_BG, seed: int = 0, threads: int = 1) -> RenderResult:
    """Render every pixel of ``camera``.

    ``intervals`` is an optional ``(lo, hi)`` pair of ``(H, W)`` arrays of
    per-pixel sampling bounds (distances along each ray); by default every
    ray is sampled over ``[near, far]``.  A :class:`RenderError` carries the
    ``(col, row)`` of the first failing pixel.
    """
    h, w = camera.height, camera.width
    o, d, _ = camera_rays(camera)
    if intervals is None:
        lo, hi = np.full(h * w, float(near)), np.full(h * w, float(far))
    else:
        lo, hi = (np.asarray(a, dtype=np.float64).reshape(-1) for a in intervals)
    try:
        rgb, opacity, depth, evals = render_rays(field, o, d, lo, hi, sampler, background,
                                                 eps_bg, seed, threads)
    except RenderError as e:
        raise RenderError((e.pixel % w, e.pixel // w), str(e).split(": ", 1)[1]) from None
    return RenderResult(
        RenderedImage(rgb.reshape(h, w, 3), opacity.reshape(h, w)),
        DepthMap(depth.reshape(h, w), DEPTH_SENTINEL, eps_bg),
        evals,
    )
