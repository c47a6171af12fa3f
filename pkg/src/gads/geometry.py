"""Pinhole cameras, rays, projection and plane-induced homographies.

Conventions used everywhere in the package:

* Poses map world to camera: ``X_cam = R @ X_world + t``.  The camera looks
  down ``+z``, with ``x`` to the right and ``y`` down.
* Continuous pixel coordinates ``(u, v)`` put the *center* of integer pixel
  ``(i, j)`` (column ``i``, row ``j``) at ``(i + 0.5, j + 0.5)``.  Image arrays
  are indexed ``image[row, col]``.
* Scene units are meters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """An argument is outside the domain of the operation."""


class BehindCameraError(DomainError):
    """A point lies on or behind the image plane of a camera."""


_MIN_DEPTH = 1e-9


def _frozen(a, shape) -> np.ndarray:
    a = np.array(a, dtype=np.float64).reshape(shape)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DomainError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DomainError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x_deg: float) -> "CameraIntrinsics":
        f = 0.5 * width / np.tan(np.radians(fov_x_deg) / 2)
        return cls(f, f, width / 2, height / 2, width, height)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for the same field of view at ``factor`` times the resolution."""
        w, h = int(round(self.width * factor)), int(round(self.height * factor))
        return CameraIntrinsics(self.fx * factor, self.fy * factor, self.cx * factor,
                                self.cy * factor, w, h)


@dataclass(frozen=True)
class Pose:
    """Rigid world-to-camera transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation, (3, 3))
        t = _frozen(self.translation, (3,))
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise DomainError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise DomainError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> "Pose":
        """Camera at ``eye`` looking at ``target``; image ``-y`` roughly along ``up``."""
        eye = np.asarray(eye, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - eye
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(x) < 1e-9:
            x = np.cross(z, [1.0, 0.0, 0.0])
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.stack([x, y, z])
        # re-orthonormalize so the 1e-9 checks hold after the float arithmetic above
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
        return cls(R, -R @ eye)

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """The transform ``x -> self(other(x))``."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Camera:
    intrinsics: CameraIntrinsics
    pose: Pose = field(default_factory=Pose.identity)

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height

    @property
    def center(self) -> np.ndarray:
        return self.pose.center

    def to_dict(self) -> dict:
        k = self.intrinsics
        return {
            "intrinsics": k.K.tolist(),
            "width": k.width,
            "height": k.height,
            "rotation": self.pose.rotation.tolist(),
            "translation": self.pose.translation.tolist(),
            "units": "meters",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        K = np.asarray(d["intrinsics"], dtype=np.float64)
        intr = CameraIntrinsics(K[0, 0], K[1, 1], K[0, 2], K[1, 2], int(d["width"]), int(d["height"]))
        return cls(intr, Pose(d["rotation"], d["translation"]))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        o = _frozen(self.origin, (3,))
        d = _frozen(self.direction, (3,))
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise DomainError("ray direction must be a unit vector")
        if not (0 <= self.t_near < self.t_far):
            raise DomainError("ray bounds must satisfy 0 <= t_near < t_far")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.direction


def ray_for_pixel(cam: CameraIntrinsics, pose: Pose, px, near: float, far: float) -> Ray:
    """Ray through continuous pixel coordinate ``px = (u, v)``."""
    u, v = map(float, px)
    if not (0 <= u <= cam.width and 0 <= v <= cam.height):
        raise DomainError(f"pixel {px} outside the {cam.width}x{cam.height} image")
    d_cam = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    d = pose.rotation.T @ d_cam
    return Ray(pose.center, d / np.linalg.norm(d), near, far)


def pixel_centers(width: int, height: int) -> np.ndarray:
    """Continuous coordinates of all pixel centers, shape ``(height, width, 2)``."""
    u, v = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    return np.stack([u, v], axis=-1)


def camera_rays(camera: Camera, pixels: np.ndarray | None = None):
    """Origins and unit directions for ``pixels`` (default: every pixel center).

    Returns ``(origins, directions, z_per_t)`` where ``z_per_t`` converts a
    distance along each ray to camera-frame depth (``z = t * z_per_t``).
    """
    k = camera.intrinsics
    if pixels is None:
        pixels = pixel_centers(k.width, k.height).reshape(-1, 2)
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    d_cam = np.stack(
        [(pixels[:, 0] - k.cx) / k.fx, (pixels[:, 1] - k.cy) / k.fy, np.ones(len(pixels))], axis=-1
    )
    norm = np.linalg.norm(d_cam, axis=-1)
    dirs = (d_cam / norm[:, None]) @ camera.pose.rotation
    origins = np.broadcast_to(camera.center, dirs.shape).copy()
    return origins, dirs, 1.0 / norm


def project_points(camera: Camera, x: np.ndarray):
    """Vectorized projection that never raises.

    Returns ``(pixels, depth, in_front, in_view)``; pixels of points not in
    front of the camera are NaN.
    """
    k = camera.intrinsics
    xc = camera.pose.apply(np.asarray(x, dtype=np.float64))
    z = xc[..., 2]
    in_front = z > _MIN_DEPTH
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(in_front, z, np.nan)
        u = k.fx * xc[..., 0] / zs + k.cx
        v = k.fy * xc[..., 1] / zs + k.cy
    pix = np.stack([u, v], axis=-1)
    in_view = in_front & (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
    return pix, z, in_front, in_view


def project(cam: CameraIntrinsics, pose: Pose, x):
    """Project a world point.  Returns ``(pixel, depth, in_view)``.

    Raises :class:`BehindCameraError` if the camera-frame depth is ``<= 1e-9``.
    Points outside the image are not an error; ``in_view`` is ``False``.
    """
    pix, z, in_front, in_view = project_points(Camera(cam, pose), np.asarray(x, dtype=np.float64))
    if not np.all(in_front):
        raise BehindCameraError("point is behind the camera")
    return pix, z, in_view


def plane_homography(ref: Camera, tgt: Camera, depth: float) -> np.ndarray:
    """Homography taking target pixels to reference pixels.

    The plane is fronto-parallel to the target camera at target-frame depth
    ``depth`` (normal = target optical axis).  ``H`` is left unnormalized:
    the third homogeneous coordinate of a mapped pixel is the reference
    depth of the plane point divided by ``depth``, so its sign tells whether
    the point is in front of the reference camera.
    """
    if not depth > 0:
        raise DomainError("plane depth must be positive")
    rel = ref.pose.compose(tgt.pose.inverse())  # target camera frame -> reference camera frame
    n = np.array([0.0, 0.0, 1.0])
    return ref.intrinsics.K @ (rel.rotation + np.outer(rel.translation, n) / depth) @ tgt.intrinsics.K_inv


def apply_homography(H: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Map pixels through ``H``; pixels whose plane point lies behind the
    destination camera (homogeneous coordinate ``<= 0``) come back as NaN."""
    p = np.asarray(pixels, dtype=np.float64)
    ph = p @ H[:, :2].T + H[:, 2]
    w = ph[..., 2:3]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(w > 1e-12, ph[..., :2] / w, np.nan)


def bilinear_sample(image: np.ndarray, pixels: np.ndarray):
    """Bilinear fetch at continuous pixel coordinates.

    Fetches whose 2x2 footprint leaves the image are invalid (value 0) rather
    than clamped.  Returns ``(values, valid)``.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w = img.shape[:2]
    p = np.asarray(pixels, dtype=np.float64)
    x = p[..., 0] - 0.5
    y = p[..., 1] - 0.5
    valid = np.isfinite(x) & np.isfinite(y) & (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.where(valid, x, 0.0)
    ys = np.where(valid, y, 0.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = (xs - x0)[..., None]
    ay = (ys - y0)[..., None]
    top = img[y0, x0] * (1 - ax) + img[y0, x1] * ax
    bot = img[y1, x0] * (1 - ax) + img[y1, x1] * ax
    vals = top * (1 - ay) + bot * ay
    vals = np.where(valid[..., None], vals, 0.0)
    if np.asarray(image).ndim == 2:
        vals = vals[..., 0]
    return vals, valid
