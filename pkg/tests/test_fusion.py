import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gads.fields import SceneDescription
from gads.fusion import SCHEMES, NoDataError, PosedImage, ViewFetch, fetch_views, fuse
from gads.geometry import Camera, CameraIntrinsics, Pose
from gads.harness.experiment import oracle_render
from gads.harness.scenes import textured_plane


def _fetches(values, valid=None, dirs=None):
    values = np.asarray(values, dtype=np.float64)
    n_views, n_pts = values.shape[:2]
    valid = np.ones((n_views, n_pts), bool) if valid is None else np.asarray(valid)
    if dirs is None:
        dirs = np.tile([0, 0, 1.0], (n_views, n_pts, 1))
    return [ViewFetch(i, values[i], valid[i], dirs[i]) for i in range(n_views)]


def _random_dirs(rng, shape):
    d = rng.normal(size=shape + (3,))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_identical_values_fuse_to_that_value(scheme, rng):
    v = rng.random((1, 6, 3)).repeat(4, axis=0)
    fused, w = fuse(_fetches(v, dirs=_random_dirs(rng, (4, 6))), scheme, 0.05, target_dir=[0, 0, 1.0])
    assert np.allclose(fused, v[0], atol=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_single_valid_view_gets_all_weight(scheme, rng):
    v = rng.random((3, 5, 3))
    valid = np.zeros((3, 5), bool)
    valid[1] = True
    fused, w = fuse(_fetches(v, valid), scheme, 0.05, target_dir=[0, 0, 1.0])
    assert np.array_equal(w[1], np.ones(5)) and np.all(w[[0, 2]] == 0)
    assert np.allclose(fused, v[1])


def test_no_valid_view_raises():
    with pytest.raises(NoDataError):
        fuse(_fetches(np.zeros((2, 3, 3)), np.zeros((2, 3), bool)))


def test_outlier_is_suppressed_with_variance_scale_tau(rng):
    base = np.array([0.4, 0.5, 0.6])
    agree = base + rng.normal(0, 0.01, (4, 3))
    outlier = np.array([0.05, 0.9, 0.1])
    vals = np.vstack([agree, outlier])[:, None, :]
    tau = np.sum(np.var(agree, axis=0, ddof=1))
    _, w = fuse(_fetches(vals), "variance-softmax", tau)
    # direct evaluation of the softmax formula
    med = np.median(vals[:, 0], axis=0)
    logits = -np.sum((vals[:, 0] - med) ** 2, axis=1) / tau
    expect = np.exp(logits - logits.max())
    expect /= expect.sum()
    assert np.allclose(w[:, 0], expect, rtol=1e-12, atol=1e-300)
    assert w[4, 0] < 0.05


def test_angle_softmax_prefers_aligned_view():
    dirs = np.array([[[0, 0, 1.0]], [[0, np.sin(0.5), np.cos(0.5)]]])
    _, w = fuse(_fetches(np.zeros((2, 1, 3)), dirs=dirs), "angle", 0.1, target_dir=[0, 0, 1])
    assert w[0, 0] > w[1, 0]
    assert w[0, 0] / w[1, 0] == pytest.approx(np.exp((1 - np.cos(0.5)) / 0.1))


def test_scheme_validation():
    f = _fetches(np.zeros((2, 1, 3)))
    with pytest.raises(ValueError):
        fuse(f, "learned")
    with pytest.raises(ValueError):
        fuse(f, "angle-softmax")
    with pytest.raises(ValueError):
        fuse(f, "variance-softmax", tau=0.0)


@given(st.integers(0, 10_000), st.sampled_from(SCHEMES), st.floats(1e-3, 1.0))
def test_permutation_convexity_normalization(seed, scheme, tau):
    rng = np.random.default_rng(seed)
    n_views, n_pts = int(rng.integers(1, 7)), 8
    vals = rng.random((n_views, n_pts, 3))
    valid = rng.random((n_views, n_pts)) < 0.7
    valid[rng.integers(0, n_views, n_pts), np.arange(n_pts)] = True
    dirs = _random_dirs(rng, (n_views, n_pts))
    target = rng.normal(size=(n_pts, 3))
    fused, w = fuse(_fetches(vals, valid, dirs), scheme, tau, target_dir=target)
    assert np.allclose(w.sum(axis=0), 1, atol=1e-9)
    assert np.all(w[~valid] == 0) and np.all(w >= 0)
    lo = np.where(valid[..., None], vals, np.inf).min(axis=0)
    hi = np.where(valid[..., None], vals, -np.inf).max(axis=0)
    assert np.all((fused >= lo - 1e-12) & (fused <= hi + 1e-12))
    perm = rng.permutation(n_views)
    fused_p, w_p = fuse(_fetches(vals[perm], valid[perm], dirs[perm]), scheme, tau, target_dir=target)
    assert np.allclose(w_p, w[perm], atol=1e-12)
    assert np.allclose(fused_p, fused, atol=1e-12)


# ---------------------------------------------------------------- fetching

def _view(pose, n=16, fill=0.5):
    return PosedImage(Camera(CameraIntrinsics.from_fov(n, n, 60), pose), np.full((n, n, 3), fill))


def test_point_at_camera_center_is_invalid():
    views = [_view(Pose.identity()), _view(Pose(np.eye(3), (-0.5, 0, 0)))]
    f = fetch_views([[0.0, 0.0, 0.0]], views)
    assert not f[0].valid[0]


def test_single_view_valid_iff_in_frustum():
    views = [_view(Pose.identity())]
    f = fetch_views([[0, 0, 2.0], [10, 0, 2.0], [0, 0, -2.0]], views)
    assert len(f) == 1
    assert f[0].valid.tolist() == [True, False, False]
    assert np.allclose(np.linalg.norm(f[0].direction[:2], axis=1), 1)


def test_patch_descriptor_shape_and_border():
    views = [_view(Pose.identity())]
    f = fetch_views([[0, 0, 2.0]], views, "patch3x3")
    assert f[0].value.shape == (1, 27) and f[0].valid[0]
    with pytest.raises(ValueError):
        fetch_views([[0, 0, 2.0]], views, "sift")


def test_lambertian_plane_fetches_agree():
    # a texture resolved at the image scale; the wall is a thin dense slab, so a finer
    # 3D texture is seen through slightly different depths by oblique views
    spec = textured_plane(0, 96, 96, 5)
    wall = dataclasses.replace(spec.scene.primitives[0], texture_scale=1.0)
    spec = dataclasses.replace(spec, scene=SceneDescription([wall], spec.scene.background))
    views = [PosedImage(c, oracle_render(spec, c, 2048, i)) for i, c in enumerate(spec.refs)]
    z = wall.center[2] - wall.size[2]
    rng = np.random.default_rng(0)
    x = np.c_[rng.uniform(-0.1, 0.1, (400, 2)), np.full(400, z + 1e-4)]
    f = fetch_views(x, views)
    vals = np.stack([v.value for v in f])
    ok = np.all([v.valid for v in f], axis=0)
    assert ok.all()
    assert np.max(vals.max(axis=0) - vals.min(axis=0)) <= 1e-2
