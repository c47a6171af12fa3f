import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gads.fields import DEPTH_SENTINEL
from gads.geometry import DomainError
from gads.metrics import (PSNR_CAP, NoDataError, composite_score, depth_metrics, image_metrics, msc, mse,
                          psnr_from_mse, ssim)
from gads.rendering import DepthMap, RenderedImage


def _depth_loop_oracle(p, g):
    n = 0
    s_abs = s_sq = s_se = 0.0
    d = [0, 0, 0]
    for a, b in zip(p.ravel().tolist(), g.ravel().tolist()):
        if a == DEPTH_SENTINEL or b == DEPTH_SENTINEL or b <= 0:
            continue
        n += 1
        s_abs += abs(a - b) / b
        s_sq += (a - b) ** 2 / b
        s_se += (a - b) ** 2
        r = max(a / b, b / a)
        for k in range(3):
            d[k] += r < 1.25 ** (k + 1)
    return [s_abs / n, s_sq / n, math.sqrt(s_se / n)] + [x / n for x in d]


def test_identical_images():
    img = np.random.default_rng(0).random((16, 16, 3))
    m = image_metrics(img, img)
    assert m.mse == 0 and m.psnr == PSNR_CAP and m.ssim == pytest.approx(1.0) and m.msc == 0


def test_constant_images_psnr():
    m = image_metrics(np.full((8, 8, 3), 0.5), np.zeros((8, 8, 3)))
    assert m.mse == 0.25
    assert abs(m.psnr - 6.0206) < 1e-3


def test_accepts_rendered_images():
    a = RenderedImage(np.full((8, 8, 3), 0.5), np.ones((8, 8)))
    assert mse(a, np.zeros((8, 8, 3))) == 0.25


def test_shape_mismatch():
    with pytest.raises(DomainError):
        mse(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))
    with pytest.raises(DomainError):
        ssim(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


def test_ssim_translate_is_lower(rng):
    img = rng.random((40, 40, 3))
    from scipy.ndimage import gaussian_filter
    img = gaussian_filter(img, (1, 1, 0))
    shifted = np.roll(img, 1, axis=1)
    assert ssim(img, shifted) < ssim(img, img)


def test_ssim_matches_scikit_image(rng):
    skm = pytest.importorskip("skimage.metrics")
    a = rng.random((48, 40, 3))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    ref = skm.structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                    data_range=1.0, channel_axis=-1)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-6)


@given(st.floats(1e-8, 1.0), st.floats(1e-8, 1.0))
def test_psnr_strictly_decreasing(a, b):
    if a < b:
        assert psnr_from_mse(a) > psnr_from_mse(b)


def test_depth_examples():
    g = DepthMap(np.ones((4, 4)))
    m = depth_metrics(g, g)
    assert (m.abs_rel, m.sq_rel, m.rmse) == (0, 0, 0) and (m.delta1, m.delta2, m.delta3) == (1, 1, 1)
    m = depth_metrics(DepthMap(np.full((4, 4), 1.25)), g)
    assert m.delta1 == 0 and m.delta2 == 1
    assert m.abs_rel == pytest.approx(0.25) and m.rmse == pytest.approx(0.25)


def test_depth_no_data():
    with pytest.raises(NoDataError):
        depth_metrics(DepthMap(np.full((2, 2), DEPTH_SENTINEL)), DepthMap(np.ones((2, 2))))


def test_depth_matches_scalar_loop_oracle(rng):
    for _ in range(20):
        g = rng.uniform(0.5, 8, (17, 13))
        p = g * rng.lognormal(0, 0.3, g.shape)
        p[rng.random(p.shape) < 0.1] = DEPTH_SENTINEL
        g[rng.random(g.shape) < 0.1] = DEPTH_SENTINEL
        m = depth_metrics(DepthMap(p), DepthMap(g))
        got = [m.abs_rel, m.sq_rel, m.rmse, m.delta1, m.delta2, m.delta3]
        assert np.allclose(got, _depth_loop_oracle(p, g), rtol=1e-12, atol=1e-12)


@given(st.integers(0, 10_000))
def test_delta_chain_and_nonnegativity(seed):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.1, 10, 50)
    p = rng.uniform(0.1, 10, 50)
    m = depth_metrics(p, g)
    assert 0 <= m.delta1 <= m.delta2 <= m.delta3 <= 1
    assert min(m.abs_rel, m.sq_rel, m.rmse) >= 0


def test_depth_metric_asymmetry():
    p, g = np.array([2.0]), np.array([1.0])
    a, b = depth_metrics(p, g), depth_metrics(g, p)
    assert a.abs_rel == 1.0 and b.abs_rel == 0.5
    assert a.sq_rel == 1.0 and b.sq_rel == 0.5
    assert a.rmse == b.rmse and a.delta1 == b.delta1


# ---------------------------------------------------------------- msc and composite

def test_msc_examples(rng):
    a = rng.random((16, 16, 3))
    for m in (1, 2, 3):
        assert msc(a, a, m) == 0
    b = rng.random((16, 16, 3))
    assert msc(a, b, 1, gradients=False) == mse(a, b)
    with pytest.raises(DomainError):
        msc(a[:15], b[:15], 3)
    with pytest.raises(DomainError):
        msc(a, b, 0)


@given(st.integers(0, 10_000))
def test_msc_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((2, 8, 12, 3))
    assert msc(a, b) == pytest.approx(msc(b, a), rel=1e-14)
    assert mse(a, b) == mse(b, a)


def test_msc_prefers_noise_over_structural_corruption(rng):
    yy, xx = np.mgrid[0:64, 0:64] / 64.0
    gt = np.stack([0.5 + 0.3 * np.sin(6 * xx), 0.5 + 0.3 * np.cos(5 * yy), 0.5 + 0.2 * np.sin(4 * (xx + yy))], -1)
    structural = gt.copy()
    structural[16:48, 16:48] += 0.1  # a displaced block
    noise = rng.normal(0, 1, gt.shape)
    noise *= np.sqrt(mse(structural, gt) / np.mean(noise**2))
    noisy = gt + noise
    assert mse(noisy, gt) == pytest.approx(mse(structural, gt), rel=1e-12)
    assert msc(structural, gt, 3) > msc(noisy, gt, 3)


def test_composite_examples():
    assert composite_score(0.1, 0.2, 1, 0) == 0.1
    assert composite_score(0.1, 0.2, 0, 1) == 0.2
    assert composite_score(0.1, 0.2) == pytest.approx(0.3)
    with pytest.raises(DomainError):
        composite_score(0.1, 0.2, -1, 1)


def test_ssim_small_image_is_finite(rng):
    a = rng.random((6, 6, 3))
    assert ssim(a, a) == pytest.approx(1.0)
    assert np.isfinite(ssim(a, rng.random((6, 6, 3))))
