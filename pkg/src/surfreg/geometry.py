"""Point clouds, Euler-angle rigid motions and the small geometric helpers
everything else is built on.

Conventions: lengths in millimetres, angles in degrees. A rotation given as
angles ``(alpha, beta, psi)`` about the fixed x, y and z axes is the matrix
``Rz(psi) @ Ry(beta) @ Rx(alpha)`` and a motion maps ``p -> R @ p + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyCloudError, NonFiniteCoordinateError
from .validation import as_points


def normalize_angle(angle: float) -> float:
    """Wrap an angle in degrees into [-180, 180)."""
    a = float(angle)
    if -180.0 <= a < 180.0:
        return a
    r = math.fmod(a + 180.0, 360.0)
    if r < 0.0:
        r += 360.0
    r -= 180.0
    # fmod/addition rounding can land exactly on the excluded upper end
    if r >= 180.0:
        r -= 360.0
    return r


@dataclass(frozen=True)
class EulerAngles:
    """Rotation angles in degrees about the x (alpha), y (beta) and z (psi) axes."""

    alpha: float = 0.0
    beta: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "psi"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise NonFiniteCoordinateError(f"angle {name} is not finite")
            object.__setattr__(self, name, normalize_angle(value))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.psi)


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(b):
    c, s = math.cos(b), math.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(p):
    c, s = math.cos(p), math.sin(p)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(angles) -> np.ndarray:
    """Return ``Rz(psi) @ Ry(beta) @ Rx(alpha)`` for angles given in degrees.

    ``angles`` may be an :class:`EulerAngles` or any 3-sequence.
    """
    if isinstance(angles, EulerAngles):
        a, b, p = angles.as_tuple()
    else:
        a, b, p = (float(v) for v in angles)
    return _rz(math.radians(p)) @ _ry(math.radians(b)) @ _rx(math.radians(a))


def matrix_to_euler(rotation) -> EulerAngles:
    """Decompose a rotation matrix into the artifact's Euler convention.

    ``beta`` is chosen in [-90, 90]. At gimbal lock (``|cos beta| < 1e-9``)
    ``alpha`` is set to zero and the remaining rotation is folded into ``psi``.
    """
    R = np.asarray(rotation, dtype=float)
    beta = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    if abs(math.cos(beta)) < 1e-9:
        alpha = 0.0
        psi = math.atan2(-R[0, 1], R[1, 1])
    else:
        alpha = math.atan2(R[2, 1], R[2, 2])
        psi = math.atan2(R[1, 0], R[0, 0])
    return EulerAngles(math.degrees(alpha), math.degrees(beta), math.degrees(psi))


@dataclass(frozen=True)
class PointCloud:
    """Ordered, read-only set of 3D points (millimetres).

    ``points`` is stored as a non-writeable ``(n, 3)`` float64 array. Clouds
    may be empty; operations that need geometry raise :class:`EmptyCloudError`.
    """

    points: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        pts = as_points(self.points)
        if pts is self.points or np.shares_memory(pts, self.points):
            pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None

    def require_nonempty(self) -> "PointCloud":
        if len(self) == 0:
            raise EmptyCloudError(f"point cloud {self.source_id or '<unnamed>'} is empty")
        return self


def as_cloud(data, source_id: str = "") -> PointCloud:
    if isinstance(data, PointCloud):
        return data
    return PointCloud(data, source_id=source_id)


@dataclass(frozen=True)
class RigidMotion:
    """Rotation (Euler angles, degrees) followed by a translation (mm)."""

    rotation: EulerAngles = field(default_factory=EulerAngles)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not isinstance(self.rotation, EulerAngles):
            object.__setattr__(self, "rotation", EulerAngles(*self.rotation))
        t = tuple(float(v) for v in self.translation)
        if len(t) != 3 or not all(math.isfinite(v) for v in t):
            raise NonFiniteCoordinateError("translation must be three finite numbers")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls()

    @classmethod
    def from_matrix(cls, rotation, translation) -> "RigidMotion":
        return cls(matrix_to_euler(rotation), tuple(np.asarray(translation, dtype=float)))

    @property
    def matrix(self) -> np.ndarray:
        return euler_to_matrix(self.rotation)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.translation)

    def homogeneous(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.matrix
        H[:3, 3] = self.translation
        return H


def transform_points(rotation: np.ndarray, translation, points) -> np.ndarray:
    """Apply ``p -> R @ p + t`` row-wise to an ``(n, 3)`` array."""
    pts = np.asarray(points, dtype=float)
    return pts @ np.asarray(rotation).T + np.asarray(translation, dtype=float)


def apply_motion(motion: RigidMotion, cloud) -> PointCloud:
    cloud = as_cloud(cloud).require_nonempty()
    moved = transform_points(motion.matrix, motion.translation, cloud.points)
    return PointCloud(moved, source_id=cloud.source_id)


def inverse(motion: RigidMotion) -> RigidMotion:
    """Analytic inverse: rotation R^T, translation -R^T t."""
    R = motion.matrix
    t = motion.vector
    return RigidMotion(matrix_to_euler(R.T), tuple(-R.T @ t))


def inverse_matrix(rotation, translation) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of a motion given as a matrix pair, without an Euler round trip."""
    R = np.asarray(rotation, dtype=float)
    return R.T, -R.T @ np.asarray(translation, dtype=float)


def compose(first: RigidMotion, second: RigidMotion) -> RigidMotion:
    """Motion equivalent to applying ``first`` and then ``second``."""
    R1, R2 = first.matrix, second.matrix
    return RigidMotion.from_matrix(R2 @ R1, R2 @ first.vector + second.vector)


def centroid(cloud) -> np.ndarray:
    cloud = as_cloud(cloud).require_nonempty()
    return cloud.points.mean(axis=0)


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.min) & (pts <= self.max), axis=1)

    def dilated(self, fraction: float, floor: float = 0.0) -> "Aabb":
        pad = np.maximum(self.extent * fraction, floor)
        return Aabb(self.min - pad, self.max + pad)


def bounding_box(cloud) -> Aabb:
    cloud = as_cloud(cloud).require_nonempty()
    return Aabb(cloud.points.min(axis=0), cloud.points.max(axis=0))


def downsample(cloud, target_count: int = 2000, seed: int = 0) -> PointCloud:
    """Uniform random subsample without replacement.

    Clouds already at or below ``target_count`` are returned unchanged. The
    kept points stay in their original relative order.
    """
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    cloud = as_cloud(cloud).require_nonempty()
    n = len(cloud)
    if n <= target_count:
        return cloud
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=target_count, replace=False))
    return PointCloud(cloud.points[keep], source_id=cloud.source_id)
