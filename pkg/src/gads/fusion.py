"""Point-wise multi-view fetching and weighted fusion.

Every 3D point is projected into each posed view and the view's color (or a
3x3 patch descriptor) is fetched bilinearly.  The fetched values are then
blended with per-point weights computed analytically from the fetches
themselves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Camera, bilinear_sample, project_points

SCHEMES = ("uniform", "variance-softmax", "angle-softmax")
_ALIASES = {"var": "variance-softmax", "angle": "angle-softmax"}


class NoDataError(ValueError):
    """No view observes the point."""


@dataclass(frozen=True)
class PosedImage:
    camera: Camera
    image: np.ndarray  # (H, W, 3) in [0, 1]


@dataclass
class ViewFetch:
    """Values fetched from one view for a batch of points.

    ``value`` has shape ``(N, C)``, ``valid`` ``(N,)`` and ``direction``
    ``(N, 3)`` (unit vector from the view center to each point).
    """

    index: int
    value: np.ndarray
    valid: np.ndarray
    direction: np.ndarray


_PATCH_OFFSETS = np.array([(du, dv) for dv in (-1, 0, 1) for du in (-1, 0, 1)], dtype=np.float64)


def fetch_views(x, views, descriptor: str = "color") -> list[ViewFetch]:
    """Project points into every view and fetch colors or 3x3 patches.

    A fetch is invalid when the point is behind (or at) the view center or
    its bilinear footprint leaves the image.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    out = []
    for i, view in enumerate(views):
        pix, _, in_front, _ = project_points(view.camera, x)
        if descriptor == "color":
            value, valid = bilinear_sample(view.image, pix)
        elif descriptor == "patch3x3":
            samples = [bilinear_sample(view.image, pix + off) for off in _PATCH_OFFSETS]
            value = np.concatenate([s[0] for s in samples], axis=-1)
            valid = np.all([s[1] for s in samples], axis=0)
        else:
            raise ValueError(f"unknown descriptor {descriptor!r}")
        valid = valid & in_front
        r = x - view.camera.center
        n = np.linalg.norm(r, axis=-1, keepdims=True)
        valid &= n[:, 0] > 1e-12
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(n > 1e-12, r / n, 0.0)
        out.append(ViewFetch(i, np.where(valid[:, None], value, 0.0), valid, r))
    return out


def fuse(fetches: list[ViewFetch], scheme: str = "variance-softmax", tau: float = 0.01,
         target_dir=None):
    """Blend fetched values per point.

    ``uniform`` weighs valid views equally.  ``variance-softmax`` uses
    ``exp(-||V_i - median(V)||^2 / tau)``, which suppresses occluded
    outliers.  ``angle-softmax`` uses ``exp(cos(r_i, target_dir) / tau)``.

    Returns ``(fused, weights)`` with shapes ``(N, C)`` and ``(V, N)``.
    Raises :class:`NoDataError` if some point has no valid fetch.
    """
    scheme = _ALIASES.get(scheme, scheme)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown fusion scheme {scheme!r}")
    vals = np.stack([f.value for f in fetches]).astype(np.float64)
    valid = np.stack([f.valid for f in fetches])
    if vals.ndim == 2:  # single point given as (C,) per view
        vals, valid = vals[:, None], valid.reshape(len(fetches), 1)
    if not np.all(valid.any(axis=0)):
        raise NoDataError("a point has no valid view")

    if scheme == "uniform":
        logits = np.zeros(valid.shape)
    elif scheme == "variance-softmax":
        if tau <= 0:
            raise ValueError("tau must be positive")
        med = np.nanmedian(np.where(valid[..., None], vals, np.nan), axis=0)
        logits = -np.sum((vals - med) ** 2, axis=-1) / tau
    else:
        if tau <= 0:
            raise ValueError("tau must be positive")
        if target_dir is None:
            raise ValueError("angle-softmax needs target_dir")
        dirs = np.stack([np.atleast_2d(f.direction) for f in fetches])
        t = np.atleast_2d(np.asarray(target_dir, dtype=np.float64))
        t = t / np.linalg.norm(t, axis=-1, keepdims=True)
        logits = np.einsum("vnc,nc->vn", dirs, t) / tau

    logits = np.where(valid, logits, -np.inf)
    logits = logits - logits.max(axis=0)
    w = np.where(valid, np.exp(logits), 0.0)
    w /= w.sum(axis=0)
    fused = np.einsum("vn,vnc->nc", w, vals)
    return fused, w
