"""Plane-sweep coarse depth from posed reference images.

Reference images are warped into the target view through fronto-parallel
planes at each depth hypothesis.  Photometric disagreement (variance across
views) gives a cost volume; a softmax over negative costs gives per-pixel
depth probabilities, and the depth estimate is the probability-weighted mean
hypothesis.  Depths here are target camera-frame ``z`` values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .fields import DEPTH_SENTINEL
from .geometry import Camera, DomainError, apply_homography, bilinear_sample, pixel_centers, plane_homography
from .rendering import DepthMap


class ConfigurationError(ValueError):
    pass


@dataclass
class CostVolume:
    hypotheses: np.ndarray  # (D,), ascending
    cost: np.ndarray  # (H, W, D)
    n_valid: np.ndarray  # (H, W, D) views contributing to each cost
    ceiling: float

    def __post_init__(self):
        if np.any(np.diff(self.hypotheses) <= 0):
            raise DomainError("hypotheses must be strictly increasing")

    @property
    def n_hypotheses(self) -> int:
        return len(self.hypotheses)

    def argmin_depth(self) -> np.ndarray:
        return self.hypotheses[np.argmin(self.cost, axis=-1)]

    def dump(self, path) -> None:
        """Write the costs as raw little-endian float32 in ``(D, H, W)`` order."""
        np.ascontiguousarray(np.moveaxis(self.cost, -1, 0), dtype="<f4").tofile(path)


def inverse_depth_hypotheses(near: float, far: float, n: int = 64) -> np.ndarray:
    """``n`` depths between ``near`` and ``far``, uniform in inverse depth, ascending."""
    if not 0 < near < far or n < 2:
        raise DomainError("need 0 < near < far and at least two hypotheses")
    return 1.0 / np.linspace(1.0 / near, 1.0 / far, n)


def build_cost_volume(target: Camera, refs, hypotheses, ceiling: float = 1.0,
                      box_filter: bool = False) -> CostVolume:
    """Variance cost volume over reference views warped into ``target``.

    ``cost[y, x, k]`` is the channel-averaged across-view variance of the
    reference colors fetched through the plane at ``hypotheses[k]``.  Views
    whose fetch falls outside their image are excluded; fewer than two valid
    views gives ``ceiling``.  ``box_filter`` applies an optional 3x3 mean
    filter to each cost slice.
    """
    refs = list(refs)
    if len(refs) < 2:
        raise ConfigurationError("plane sweep needs at least two reference views")
    hyp = np.asarray(hypotheses, dtype=np.float64)
    if len(hyp) < 2:
        raise ConfigurationError("plane sweep needs at least two depth hypotheses")
    h, w = target.height, target.width
    pix = pixel_centers(w, h).reshape(-1, 2)
    cost = np.empty((h, w, len(hyp)))
    n_valid = np.empty((h, w, len(hyp)), dtype=np.int64)
    for k, depth in enumerate(hyp):
        s1 = np.zeros((h * w, 3))
        s2 = np.zeros((h * w, 3))
        cnt = np.zeros(h * w)
        for ref in refs:
            warped = apply_homography(plane_homography(ref.camera, target, depth), pix)
            vals, valid = bilinear_sample(ref.image, warped)
            s1 += vals
            s2 += vals**2
            cnt += valid
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = s1 / cnt[:, None]
            var = np.maximum(s2 / cnt[:, None] - mean**2, 0.0).mean(axis=-1)
        c = np.where(cnt >= 2, var, ceiling)
        if box_filter:
            c = uniform_filter(c.reshape(h, w), size=3, mode="nearest").reshape(-1)
        cost[..., k] = c.reshape(h, w)
        n_valid[..., k] = cnt.reshape(h, w)
    return CostVolume(hyp, cost, n_valid, float(ceiling))


def depth_probabilities(vol: CostVolume, tau: float) -> np.ndarray:
    if not tau > 0:
        raise DomainError("tau must be positive")
    logits = -vol.cost / tau
    logits -= logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=-1, keepdims=True)


def regress_depth(vol: CostVolume, tau: float = 3e-4) -> DepthMap:
    """Probability-weighted mean hypothesis per pixel.

    Pixels where no hypothesis had two valid views get the sentinel.
    """
    p = depth_probabilities(vol, tau)
    d = p @ vol.hypotheses
    seen = (vol.n_valid >= 2).any(axis=-1)
    return DepthMap(np.where(seen, d, DEPTH_SENTINEL))


def rescale_depth(d: DepthMap, scale: float, offset: float = 0.0) -> DepthMap:
    if not scale > 0:
        raise DomainError("scale must be positive")
    out = np.where(d.valid, d.depth * scale + offset, d.sentinel)
    return DepthMap(out, d.sentinel, d.eps_bg)


def z_to_ray_distance(d: DepthMap, camera: Camera) -> DepthMap:
    """Convert camera-frame ``z`` depths to distances along each pixel's ray."""
    k = camera.intrinsics
    pix = pixel_centers(k.width, k.height)
    x = (pix[..., 0] - k.cx) / k.fx
    y = (pix[..., 1] - k.cy) / k.fy
    stretch = np.sqrt(1 + x**2 + y**2)
    return DepthMap(np.where(d.valid, d.depth * stretch, d.sentinel), d.sentinel, d.eps_bg)
