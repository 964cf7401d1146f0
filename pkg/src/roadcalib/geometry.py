"""Rigid-body transforms, pinhole camera model and point projection.

Conventions used everywhere in this package:

* A pose is the tuple (tx, ty, tz, rx, ry, rz): translation in meters,
  rotation as roll/pitch/yaw in radians.
* The rotation matrix of a pose is R = Rz(yaw) @ Ry(pitch) @ Rx(roll)
  (extrinsic X-Y-Z).
* The camera frame is the usual pinhole frame: x right, y down, z forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Points closer than this to the camera plane are never projected.
Z_MIN = 0.1

_TWO_PI = 2.0 * np.pi


def normalize_angle(a):
    """Wrap angle(s) to the interval (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    wrapped = a - _TWO_PI * np.floor((a + np.pi) / _TWO_PI)
    # floor maps +pi to -pi; push it back to the closed end of the interval
    wrapped = np.where(wrapped <= -np.pi, wrapped + _TWO_PI, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Pose6:
    """Rigid transform as a 6-tuple; angles normalized to (-pi, pi]."""

    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0
    rx: float = 0.0
    ry: float = 0.0
    rz: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rx", normalize_angle(self.rx))
        object.__setattr__(self, "ry", normalize_angle(self.ry))
        object.__setattr__(self, "rz", normalize_angle(self.rz))

    @classmethod
    def from_vector(cls, v) -> "Pose6":
        v = np.asarray(v, dtype=np.float64)
        return cls(*(float(x) for x in v))

    def as_vector(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.tz, self.rx, self.ry, self.rz])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.tz])

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz])


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) transform: p_out = R @ p_in + t."""

    R: np.ndarray
    t: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points."""
        return points @ self.R.T + self.t

    def orthonormality_drift(self) -> float:
        return float(np.abs(self.R.T @ self.R - np.eye(3)).max())


def _rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def pose_to_transform(p: Pose6) -> RigidTransform:
    """Pose tuple -> SE(3), R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    R = _rot_z(p.rz) @ _rot_y(p.ry) @ _rot_x(p.rx)
    return RigidTransform(R, p.translation)


def transform_to_pose(t: RigidTransform) -> Pose6:
    """SE(3) -> pose tuple, inverse of :func:`pose_to_transform`."""
    R = t.R
    sy = -R[2, 0]
    sy = min(1.0, max(-1.0, float(sy)))
    ry = float(np.arcsin(sy))
    if abs(sy) < 1.0 - 1e-12:
        rx = float(np.arctan2(R[2, 1], R[2, 2]))
        rz = float(np.arctan2(R[1, 0], R[0, 0]))
    else:
        # gimbal lock: roll and yaw are coupled, fold everything into roll
        rx = float(np.arctan2(-R[1, 2], R[1, 1]))
        rz = 0.0
    return Pose6(t.t[0], t.t[1], t.t[2], rx, ry, rz)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform that applies b first, then a."""
    R = a.R @ b.R
    drift = np.abs(R.T @ R - np.eye(3)).max()
    if drift > 1e-9:
        # re-orthonormalize via SVD to stop drift accumulating over long chains
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
    return RigidTransform(R, a.R @ b.t + a.t)


def inverse(t: RigidTransform) -> RigidTransform:
    return RigidTransform(t.R.T, -t.R.T @ t.t)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Square-pixel pinhole model of a rectified stereo pair."""

    f: float
    cu: float
    cv: float
    b: float
    width: int
    height: int

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")
        if self.b <= 0:
            raise ValueError("stereo baseline must be positive")
        if not (0 <= self.cu < self.width and 0 <= self.cv < self.height):
            raise ValueError("principal point outside image")


@dataclass
class IntensityCloud:
    """3D points with 8-bit reflectance intensity, in a named frame."""

    frame: str
    points: np.ndarray  # (N, 3) float64, meters
    intensity: np.ndarray  # (N,) float64 in [0, 255]

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.intensity = np.clip(
            np.asarray(self.intensity, dtype=np.float64).reshape(-1), 0.0, 255.0
        )
        if not np.isfinite(self.points).all():
            raise ValueError("cloud contains non-finite coordinates")
        if len(self.intensity) != len(self.points):
            raise ValueError("points / intensity length mismatch")

    def __len__(self) -> int:
        return len(self.points)


def apply(t: RigidTransform, c: IntensityCloud, frame: str = "") -> IntensityCloud:
    """Rigidly transform a cloud; intensities carried over unchanged."""
    return IntensityCloud(frame, t.apply_points(c.points), c.intensity.copy())


def project_points(k: CameraIntrinsics, points: np.ndarray):
    """Project (N, 3) camera-frame points.

    Returns (u, v, valid): pixel coordinates (float) and a mask of points in
    front of the near plane and inside the image bounds.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = points[:, 2]
    safe_z = np.where(z > Z_MIN, z, 1.0)
    u = k.f * points[:, 0] / safe_z + k.cu
    v = k.f * points[:, 1] / safe_z + k.cv
    valid = (z > Z_MIN) & (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
    return u, v, valid


def project(k: CameraIntrinsics, point):
    """Project a single camera-frame point; None when unprojectable."""
    u, v, valid = project_points(k, np.asarray(point, dtype=np.float64).reshape(1, 3))
    if not valid[0]:
        return None
    return float(u[0]), float(v[0])


def disparity_to_point(k: CameraIntrinsics, u: float, v: float, d: float):
    """Back-project a pixel with disparity d (px); None for d <= 0."""
    if d <= 0:
        return None
    z = k.f * k.b / d
    x = (u - k.cu) * z / k.f
    y = (v - k.cv) * z / k.f
    return np.array([x, y, z])


def disparity_to_points(k: CameraIntrinsics, u: np.ndarray, v: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Vectorized back-projection; caller must pass d > 0."""
    z = k.f * k.b / d
    x = (u - k.cu) * z / k.f
    y = (v - k.cv) * z / k.f
    return np.stack([x, y, z], axis=1)
