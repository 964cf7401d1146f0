"""Accumulate LiDAR scans into a global intensity map and render it.

The map is built once from odometry and the (known) LiDAR extrinsics; during
calibration it is repeatedly re-expressed in candidate camera frames and
splatted into a LiDAR intensity image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import (
    CameraIntrinsics,
    IntensityCloud,
    Pose6,
    RigidTransform,
    Z_MIN,
    compose,
    inverse,
    normalize_angle,
    pose_to_transform,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LidarScan:
    timestamp: float
    sensor_id: int
    cloud: IntensityCloud


@dataclass
class GlobalMap:
    """Intensity cloud in the global frame plus per-point source timestamps."""

    cloud: IntensityCloud
    timestamps: np.ndarray  # (N,) seconds

    def __len__(self) -> int:
        return len(self.cloud)


@dataclass
class LidarIntensityImage:
    image: np.ndarray  # (H, W) uint8
    depth: np.ndarray  # (H, W) float64, inf where invalid
    valid: np.ndarray  # (H, W) bool


def pose_at(trajectory, timestamp: float) -> Pose6:
    """Interpolate the vehicle pose at a timestamp.

    Translation is linear; each angle is interpolated through the shortest
    arc, so e.g. yaw crossing the +-pi seam takes the short way.
    """
    times = np.array([ts for ts, _ in trajectory])
    if timestamp < times[0] - 1e-9 or timestamp > times[-1] + 1e-9:
        raise ValueError(
            f"timestamp {timestamp} outside trajectory span [{times[0]}, {times[-1]}]"
        )
    timestamp = min(max(timestamp, times[0]), times[-1])
    idx = int(np.searchsorted(times, timestamp, side="right"))
    idx = min(max(idx, 1), len(times) - 1)
    t0, p0 = trajectory[idx - 1]
    t1, p1 = trajectory[idx]
    w = 0.0 if t1 == t0 else (timestamp - t0) / (t1 - t0)
    trans = (1 - w) * p0.translation + w * p1.translation
    a0 = p0.angles
    delta = normalize_angle(p1.angles - a0)
    ang = a0 + w * np.asarray(delta)
    return Pose6(trans[0], trans[1], trans[2], ang[0], ang[1], ang[2])


def accumulate(scans, trajectory, lidar_extrinsics: dict[int, Pose6],
               window_m: float = 80.0) -> GlobalMap:
    """Fuse scans into a global intensity map via interpolated odometry.

    Scans whose timestamp falls outside the trajectory span are rejected with
    a diagnostic.  Accumulation stops once the trajectory arc length covered
    by the used scans exceeds ``window_m``.
    """
    times = np.array([ts for ts, _ in trajectory])
    positions = np.array([p.translation for _, p in trajectory])
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(positions, axis=0), axis=1))])

    sensor_tf = {sid: pose_to_transform(p) for sid, p in lidar_extrinsics.items()}

    parts_pts: list[np.ndarray] = []
    parts_int: list[np.ndarray] = []
    parts_ts: list[np.ndarray] = []
    start_arc = None
    for scan in scans:
        if scan.sensor_id not in sensor_tf:
            raise KeyError(f"no extrinsic registered for lidar {scan.sensor_id}")
        if scan.timestamp < times[0] or scan.timestamp > times[-1]:
            log.warning(
                "scan at t=%.6f from lidar %d outside trajectory span; rejected",
                scan.timestamp, scan.sensor_id,
            )
            continue
        scan_arc = float(np.interp(scan.timestamp, times, arc))
        if start_arc is None:
            start_arc = scan_arc
        if scan_arc - start_arc > window_m:
            log.info("map window of %.1f m reached; later scans ignored", window_m)
            break
        vehicle = pose_to_transform(pose_at(trajectory, scan.timestamp))
        to_global = compose(vehicle, sensor_tf[scan.sensor_id])
        parts_pts.append(to_global.apply_points(scan.cloud.points))
        parts_int.append(scan.cloud.intensity)
        parts_ts.append(np.full(len(scan.cloud), scan.timestamp))

    if parts_pts:
        pts = np.concatenate(parts_pts)
        inten = np.concatenate(parts_int)
        ts = np.concatenate(parts_ts)
    else:
        pts = np.zeros((0, 3))
        inten = np.zeros(0)
        ts = np.zeros(0)
    return GlobalMap(IntensityCloud("global", pts, inten), ts)


def to_camera_frame(global_map: GlobalMap, vehicle_pose_at_image: Pose6,
                    candidate_extrinsic: Pose6) -> IntensityCloud:
    """Re-express the map in the stereo-left camera frame.

    ``candidate_extrinsic`` is the camera pose in the vehicle frame (the
    quantity the calibration estimates); the map goes global -> vehicle ->
    camera through the two inverses.
    """
    t_vg = inverse(pose_to_transform(vehicle_pose_at_image))
    t_cv = inverse(pose_to_transform(candidate_extrinsic))
    tf = compose(t_cv, t_vg)
    return IntensityCloud("camera", tf.apply_points(global_map.cloud.points),
                          global_map.cloud.intensity)


def render_intensity_image(cloud: IntensityCloud, k: CameraIntrinsics,
                           splat: int = 1, z_band: float = 0.05,
                           backend: str | None = None) -> LidarIntensityImage:
    """Project a camera-frame cloud with z-buffering and a splat footprint.

    Candidates within ``z_band`` (relative depth) of a pixel's nearest point
    are averaged rather than overwritten, so densely sampled surfaces render
    without a systematic half-pixel shift toward the camera.
    """
    pts = cloud.points
    z = pts[:, 2]
    front = z > Z_MIN
    pts = pts[front]
    inten = cloud.intensity[front]
    z = z[front]
    u = np.rint(k.f * pts[:, 0] / z + k.cu).astype(np.int64)
    v = np.rint(k.f * pts[:, 1] / z + k.cv).astype(np.int64)
    # keep points whose splat can still touch the image
    inb = (u >= -splat) & (u < k.width + splat) & (v >= -splat) & (v < k.height + splat)
    img, depth, valid = kernels.render_zbuffer(
        u[inb], v[inb], z[inb], inten[inb], k.height, k.width, splat,
        z_band=z_band, backend=backend
    )
    return LidarIntensityImage(img, depth, valid)
