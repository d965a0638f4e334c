"""Core projective value types and elementary camera operations.

Pixel and world points are plain float ndarrays (shape (2,) and (3,)); the
structured types below wrap them only where field grouping pays off. All
pixel coordinates are Euclidean (post homogeneous division); homogeneous
forms are transient inside the functions that need them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import PointAtInfinity

Array = np.ndarray


def _as_float(x) -> Array:
    return np.asarray(x, dtype=float)


def homogenize(p) -> Array:
    """Append a unit coordinate: (..., d) -> (..., d+1)."""
    p = _as_float(p)
    return np.concatenate([p, np.ones(p.shape[:-1] + (1,))], axis=-1)


@dataclass(frozen=True)
class CameraP:
    """3x4 projective camera matrix (finite camera: left 3x3 nonsingular)."""

    P: Array

    def __post_init__(self):
        P = _as_float(self.P).reshape(3, 4)
        object.__setattr__(self, "P", P)

    @property
    def center(self) -> Array:
        """Camera center in world coordinates (null space of P)."""
        c = np.linalg.svd(self.P)[2][-1]
        return c[:3] / c[3]

    def flat(self) -> list[float]:
        """Row-major 12-element list, for serialization."""
        return [float(x) for x in self.P.ravel()]


@dataclass(frozen=True)
class Pose:
    """Rigid transform taking world points into the camera frame: x = R X + t."""

    R: Array
    t: Array

    def __post_init__(self):
        object.__setattr__(self, "R", _as_float(self.R).reshape(3, 3))
        object.__setattr__(self, "t", _as_float(self.t).reshape(3))


@dataclass(frozen=True)
class AffineCorrespondence:
    """Point match plus the 2x2 map of local image-1 offsets to image-2 offsets."""

    p1: Array
    p2: Array
    A: Array

    def __post_init__(self):
        object.__setattr__(self, "p1", _as_float(self.p1).reshape(2))
        object.__setattr__(self, "p2", _as_float(self.p2).reshape(2))
        object.__setattr__(self, "A", _as_float(self.A).reshape(2, 2))


@dataclass(frozen=True)
class DirectionPair:
    """Matched image directions; ``scale`` is alpha in alpha * d2 = A @ d1."""

    d1: Array
    d2: Array
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "d1", _as_float(self.d1).reshape(2))
        object.__setattr__(self, "d2", _as_float(self.d2).reshape(2))
        if self.scale is not None:
            object.__setattr__(self, "scale", float(self.scale))


def project(cam: CameraP, X) -> Array:
    """Project a world point to Euclidean pixel coordinates.

    Raises PointAtInfinity when the depth denominator vanishes relative to
    the operand magnitudes (scene units are arbitrary, so the threshold is
    scale-free).
    """
    Xh = homogenize(X)
    h = Xh @ cam.P.T
    q = h[..., 2]
    bound = 1e-12 * np.linalg.norm(cam.P[2]) * np.linalg.norm(Xh, axis=-1)
    if np.any(np.abs(q) <= bound):
        raise PointAtInfinity("point on the principal plane of the camera")
    return h[..., :2] / q[..., None]


def projection_gradients(cam: CameraP, x, X) -> Array:
    """2x3 Jacobian of the pixel coordinates w.r.t. the world point.

    ``x`` must be the projection of ``X``; it is passed in because callers
    always have it already.
    """
    x = _as_float(x)
    Xh = homogenize(X)
    q = Xh @ cam.P[2]
    bound = 1e-12 * np.linalg.norm(cam.P[2]) * np.linalg.norm(Xh, axis=-1)
    if np.any(np.abs(q) <= bound):
        raise PointAtInfinity("point on the principal plane of the camera")
    gu = (cam.P[0, :3] - x[..., 0, None] * cam.P[2, :3]) / q[..., None]
    gv = (cam.P[1, :3] - x[..., 1, None] * cam.P[2, :3]) / q[..., None]
    return np.stack([gu, gv], axis=-2)


def compose_camera(K, pose: Pose) -> CameraP:
    """P = K [R | t]."""
    K = _as_float(K).reshape(3, 3)
    return CameraP(K @ np.hstack([pose.R, pose.t[:, None]]))


def euler_rotation(rx: float, ry: float, rz: float) -> Array:
    """Rotation from intrinsic X-Y-Z Euler angles in radians (R = Rz Ry Rx)."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def skew(v) -> Array:
    """3x3 cross-product matrix: skew(v) @ w == cross(v, w)."""
    v = _as_float(v).reshape(3)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix, in radians."""
    R = _as_float(R)
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def intrinsics(focal: float, cx: float, cy: float) -> Array:
    """Square-pixel pinhole intrinsic matrix."""
    return np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]])
