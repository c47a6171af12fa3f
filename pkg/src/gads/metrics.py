"""Image and depth quality metrics.

``msc`` is a multi-level feature consistency score computed on a fixed
Gaussian pyramid (with gradient channels) rather than a learned encoder, so
its values are not comparable with perceptual metrics such as LPIPS.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import DomainError

PSNR_CAP = 99.0
DELTA_BASE = 1.25


class NoDataError(ValueError):
    pass


@dataclass(frozen=True)
class ImageMetrics:
    mse: float
    psnr: float
    ssim: float
    msc: float = 0.0


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    delta1: float
    delta2: float
    delta3: float


def _rgb(img) -> np.ndarray:
    return np.asarray(getattr(img, "rgb", img), dtype=np.float64)


def mse(pred, gt) -> float:
    a, b = _rgb(pred), _rgb(gt)
    if a.shape != b.shape:
        raise DomainError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(m: float) -> float:
    return PSNR_CAP if m <= 0 else float(10 * np.log10(1.0 / m))


def ssim(pred, gt, sigma: float = 1.5, win: int = 11, k1: float = 0.01, k2: float = 0.03,
         data_range: float = 1.0) -> float:
    """Mean SSIM with a Gaussian window, averaged over channels.

    Statistics use population (biased) moments; the mean is taken over
    pixels whose window lies fully inside the image, or over all pixels for
    images smaller than the window.
    """
    a, b = _rgb(pred), _rgb(gt)
    if a.shape != b.shape:
        raise DomainError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    r = (win - 1) // 2
    trunc = r / sigma
    vals = []
    for ch in range(a.shape[-1]):
        x, y = a[..., ch], b[..., ch]
        blur = lambda z: gaussian_filter(z, sigma, truncate=trunc, mode="reflect")  # noqa: E731
        mx, my = blur(x), blur(y)
        sxx = blur(x * x) - mx * mx
        syy = blur(y * y) - my * my
        sxy = blur(x * y) - mx * my
        m = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx**2 + my**2 + c1) * (sxx + syy + c2))
        inner = m[r:-r or None, r:-r or None]
        vals.append(inner.mean() if inner.size else m.mean())
    return float(np.mean(vals))


def _encode(img: np.ndarray, levels: int, gradients: bool) -> list[np.ndarray]:
    feats = []
    cur = img
    for lvl in range(levels):
        if lvl:
            cur = gaussian_filter(cur, sigma=(1.0, 1.0, 0), mode="reflect")[::2, ::2]
        f = [cur]
        if gradients:
            f += [np.gradient(cur, axis=1), np.gradient(cur, axis=0)]
        feats.append(np.concatenate(f, axis=-1))
    return feats


def msc(pred, gt, levels: int = 3, gradients: bool = True) -> float:
    """Sum over pyramid levels of the mean squared feature difference.

    Level 1 is the image itself; each further level is a blurred 2x
    downsample of the previous one.  With ``gradients`` every level also
    carries its x/y finite-difference channels.
    """
    a, b = _rgb(pred), _rgb(gt)
    if a.shape != b.shape:
        raise DomainError(f"image shapes differ: {a.shape} vs {b.shape}")
    if levels < 1:
        raise DomainError("need at least one level")
    f = 2 ** (levels - 1)
    if a.shape[0] % f or a.shape[1] % f:
        raise DomainError(f"image size {a.shape[:2]} not divisible by {f}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    return float(sum(np.mean((fa - fb) ** 2)
                     for fa, fb in zip(_encode(a, levels, gradients), _encode(b, levels, gradients))))


def composite_score(mse_value: float, msc_value: float, alpha: float = 1.0, beta: float = 1.0) -> float:
    if alpha < 0 or beta < 0:
        raise DomainError("alpha and beta must be non-negative")
    return alpha * mse_value + beta * msc_value


def image_metrics(pred, gt, msc_levels: int | None = 3) -> ImageMetrics:
    m = mse(pred, gt)
    s = msc(pred, gt, msc_levels) if msc_levels else 0.0
    return ImageMetrics(m, psnr_from_mse(m), ssim(pred, gt), s)


def depth_metrics(pred, gt, sentinel: float | None = None) -> DepthMetrics:
    """Depth errors over pixels where both maps are valid and ``gt > 0``.

    ``pred``/``gt`` are :class:`~gads.rendering.DepthMap` objects or arrays
    (arrays use ``sentinel``, default -1).  The delta thresholds are strict.
    """
    p = np.asarray(getattr(pred, "depth", pred), dtype=np.float64)
    g = np.asarray(getattr(gt, "depth", gt), dtype=np.float64)
    if p.shape != g.shape:
        raise DomainError(f"depth shapes differ: {p.shape} vs {g.shape}")
    sp = getattr(pred, "sentinel", -1.0 if sentinel is None else sentinel)
    sg = getattr(gt, "sentinel", -1.0 if sentinel is None else sentinel)
    ok = (p != sp) & (g != sg) & (g > 0) & np.isfinite(p) & np.isfinite(g)
    if not np.any(ok):
        raise NoDataError("no pixel has valid depth in both maps")
    p, g = p[ok], g[ok]
    diff = p - g
    with np.errstate(divide="ignore"):
        ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        delta1=float(np.mean(ratio < DELTA_BASE)),
        delta2=float(np.mean(ratio < DELTA_BASE**2)),
        delta3=float(np.mean(ratio < DELTA_BASE**3)),
    )
