"""Ground-truth synthetic world: textured road scene rendered into LiDAR
scans, a vehicle trajectory and rectified stereo pairs under known extrinsics.

The same procedural texture drives LiDAR reflectance and camera gray values,
so the cross-modal correlation the NID cost relies on exists by construction.
A deterministic speckle rides on every surface to give the block matcher
texture even on bare asphalt.

Frames: global = vehicle start; vehicle x forward, y left, z up; camera
x right, y down, z forward (mounted via roll/yaw of -90 deg).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dataio
from .geometry import (
    CameraIntrinsics,
    IntensityCloud,
    Pose6,
    RigidTransform,
    compose,
    inverse,
    pose_to_transform,
)

log = logging.getLogger(__name__)

DEG = np.pi / 180.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the global frame."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    intensity: float = 120.0

    def bounds(self):
        c = np.asarray(self.center)
        half = np.asarray(self.size) / 2.0
        return c - half, c + half


@dataclass(frozen=True)
class LidarModel:
    pose: Pose6  # sensor in vehicle frame
    kind: str  # "3d" or "2d"
    azimuth_deg: tuple[float, float, float]  # start, stop, step
    elevation_deg: tuple[float, ...] = ()  # rings; empty for 2d


def _default_lidars() -> dict[int, LidarModel]:
    rings = tuple(np.linspace(-45.0, -2.0, 16))
    return {
        # 3D side-facing sensors: azimuth sector keeps single-instant returns
        # outside the forward camera frustum
        0: LidarModel(Pose6(0.0, 0.8, 1.8, 0.0, 0.0, np.pi / 2), "3d",
                      (-40.0, 40.0, 2.5), rings),
        1: LidarModel(Pose6(0.0, -0.8, 1.8, 0.0, 0.0, -np.pi / 2), "3d",
                      (-40.0, 40.0, 2.5), rings),
        # 2D fore/aft sensors, pitched down so they sweep the road just
        # outside the image bottom
        2: LidarModel(Pose6(1.5, 0.0, 1.7, 0.0, 55.0 * DEG, 0.0), "2d",
                      (-60.0, 60.0, 0.5)),
        3: LidarModel(Pose6(-1.5, 0.0, 1.7, 0.0, 55.0 * DEG, np.pi), "2d",
                      (-60.0, 60.0, 0.5)),
    }


@dataclass(frozen=True)
class SceneSpec:
    """Synthetic urban road scene with known sensor extrinsics."""

    road_width: float = 8.0
    marking_zone: tuple[float, float] = (-10.0, 60.0)
    lane_line_offsets: tuple[float, ...] = (-3.0, 3.0)
    lane_line_width: float = 0.15
    center_dash_on: float = 3.0
    center_dash_off: float = 3.0
    center_width: float = 0.15
    crosswalk_x: tuple[float, ...] = (18.0, 38.0)
    crosswalk_length: float = 3.0  # bar extent along x
    stripe_pitch: float = 1.0  # bar repeat along y
    stripe_width: float = 0.5
    boxes: tuple[Box, ...] = (Box((65.0, 1.5, 0.5), (1.0, 1.0, 1.0)),)
    curb_height: float = 0.15
    curb_width: float = 0.25
    curb_intensity: float = 90.0

    trajectory_length: float = 80.0
    speed: float = 2.0
    traj_rate: float = 20.0
    image_rate: float = 0.5
    lidar_rate: float = 10.0
    lidar_range: float = 45.0

    camera_pose: Pose6 = Pose6(1.2, 0.2375, 1.25, -np.pi / 2, 0.0, -np.pi / 2)
    intrinsics: CameraIntrinsics = CameraIntrinsics(320.0, 320.0, 240.0, 0.475, 640, 480)
    lidars: dict[int, LidarModel] = field(default_factory=_default_lidars)

    marking_intensity: float = 200.0
    asphalt_intensity: float = 40.0
    offroad_intensity: float = 25.0
    sky_intensity: float = 15.0
    texture_amp: float = 8.0
    texture_cell: float = 0.25

    range_sigma: float = 0.0
    intensity_sigma: float = 0.0
    image_sigma: float = 0.0

    def duration(self) -> float:
        return self.trajectory_length / self.speed

    def scaled_noise(self, factor: float) -> "SceneSpec":
        return replace(self, range_sigma=self.range_sigma * factor,
                       intensity_sigma=self.intensity_sigma * factor,
                       image_sigma=self.image_sigma * factor)


def default_scene() -> SceneSpec:
    return SceneSpec()


def compact_scene(noise: float = 0.0) -> SceneSpec:
    """Small, fast variant for tests and the repeatability harness.

    ``noise`` scales preset measurement sigmas (range / LiDAR intensity /
    image gray); 0 keeps the scene exact.
    """
    return SceneSpec(
        trajectory_length=40.0,
        marking_zone=(-10.0, 30.0),
        crosswalk_x=(12.0, 26.0),
        boxes=(Box((34.0, 1.5, 0.5), (1.0, 1.0, 1.0)),),
        intrinsics=CameraIntrinsics(160.0, 160.0, 120.0, 0.475, 320, 240),
        image_rate=0.5,
        # camera noise dominates on purpose: it is independent per frame,
        # whereas LiDAR noise is baked into the one shared map, so frame
        # averaging can only suppress the former
        range_sigma=0.01 * noise,
        intensity_sigma=1.5 * noise,
        image_sigma=8.0 * noise,
    )


def spec_with_overrides(spec: SceneSpec, pairs: dict[str, str]) -> SceneSpec:
    """Apply key=value overrides to scalar scene fields.

    Tuple-of-float fields (crosswalk_x, marking_zone, lane_line_offsets)
    accept comma-separated values.
    """
    updates = {}
    tuple_fields = {"crosswalk_x", "marking_zone", "lane_line_offsets"}
    for key, value in pairs.items():
        if key in tuple_fields:
            updates[key] = tuple(float(v) for v in value.split(",") if v.strip())
            continue
        if not hasattr(spec, key):
            raise ValueError(f"unknown scene field {key!r}")
        current = getattr(spec, key)
        if isinstance(current, bool):
            updates[key] = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            updates[key] = int(value)
        elif isinstance(current, float):
            updates[key] = float(value)
        else:
            raise ValueError(f"scene field {key!r} cannot be set from a spec file")
    return replace(spec, **updates)


# ---------------------------------------------------------------------------
# procedural texture


def _speckle(x: np.ndarray, y: np.ndarray, cell: float, amp: float) -> np.ndarray:
    """Deterministic per-cell noise in [-amp, amp]."""
    ix = np.floor(x / cell).astype(np.int64).astype(np.uint64)
    iy = np.floor(y / cell).astype(np.int64).astype(np.uint64)
    h = ix * np.uint64(73856093) ^ iy * np.uint64(19349663)
    h = (h ^ (h >> np.uint64(13))) * np.uint64(0x5BD1E995)
    frac = (h & np.uint64(0x7FFFFFFF)).astype(np.float64) / float(0x7FFFFFFF)
    return (2.0 * frac - 1.0) * amp


def _is_marking(spec: SceneSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    in_zone = (x >= spec.marking_zone[0]) & (x <= spec.marking_zone[1])
    marking = np.zeros_like(x, dtype=bool)
    for offset in spec.lane_line_offsets:
        marking |= np.abs(y - offset) <= spec.lane_line_width / 2.0
    period = spec.center_dash_on + spec.center_dash_off
    dash_on = np.mod(x, period) < spec.center_dash_on
    marking |= (np.abs(y) <= spec.center_width / 2.0) & dash_on
    for x0 in spec.crosswalk_x:
        in_x = (x >= x0) & (x <= x0 + spec.crosswalk_length)
        bar = np.mod(y + spec.road_width / 2.0, spec.stripe_pitch) < spec.stripe_width
        marking |= in_x & bar
    return marking & in_zone


def ground_intensity(spec: SceneSpec, x: np.ndarray, y: np.ndarray,
                     modality: str = "camera") -> np.ndarray:
    """Ground value at (x, y) for one sensing modality.

    The camera sees speckle texture everywhere (worn asphalt is never
    visually flat, and block matching needs the texture).  LiDAR reflectance
    carries the speckle only inside the marked stretch: beyond it the surface
    returns a uniform value, so images past the markings share no
    cross-modal structure with the map.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    on_road = np.abs(y) <= spec.road_width / 2.0
    base = np.where(on_road, spec.asphalt_intensity, spec.offroad_intensity)
    base = np.where(_is_marking(spec, x, y) & on_road, spec.marking_intensity, base)
    speck = _speckle(x, y, spec.texture_cell, spec.texture_amp)
    if modality == "lidar":
        in_zone = (x >= spec.marking_zone[0]) & (x <= spec.marking_zone[1])
        speck = np.where(in_zone, speck, 0.0)
    elif modality != "camera":
        raise ValueError(f"unknown modality {modality!r}")
    return np.clip(base + speck, 0.0, 255.0)


# ---------------------------------------------------------------------------
# ray casting


def _scene_boxes(spec: SceneSpec) -> list[Box]:
    boxes = list(spec.boxes)
    half_road = spec.road_width / 2.0
    x_lo = -20.0
    x_hi = spec.trajectory_length + 30.0
    length = x_hi - x_lo
    for side in (1.0, -1.0):
        cy = side * (half_road + spec.curb_width / 2.0)
        boxes.append(Box(((x_lo + x_hi) / 2.0, cy, spec.curb_height / 2.0),
                         (length, spec.curb_width, spec.curb_height),
                         intensity=spec.curb_intensity))
    return boxes


def trace(spec: SceneSpec, origins: np.ndarray, dirs: np.ndarray,
          modality: str = "camera"):
    """Cast rays against the ground plane and all boxes.

    Returns (t, intensity, hit): ray parameters (inf for misses), surface
    intensity including speckle, and a hit mask.  ``modality`` picks the
    ground response (see ``ground_intensity``).
    """
    n = len(dirs)
    t_best = np.full(n, np.inf)
    kind = np.full(n, -1, dtype=np.int64)  # -2 ground, >= 0 box index

    dz = dirs[:, 2]
    oz = origins[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = np.where(dz < -1e-12, -oz / dz, np.inf)
    hit_plane = (t_plane > 1e-6) & (t_plane < t_best)
    t_best[hit_plane] = t_plane[hit_plane]
    kind[hit_plane] = -2

    boxes = _scene_boxes(spec)
    for b_idx, box in enumerate(boxes):
        lo, hi = box.bounds()
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / np.where(np.abs(dirs) < 1e-15, 1e-15, dirs)
        t1 = (lo[None, :] - origins) * inv
        t2 = (hi[None, :] - origins) * inv
        t_near = np.minimum(t1, t2).max(axis=1)
        t_far = np.maximum(t1, t2).min(axis=1)
        ok = (t_far >= t_near) & (t_far > 1e-6)
        t_hit = np.where(t_near > 1e-6, t_near, t_far)
        better = ok & (t_hit < t_best)
        t_best[better] = t_hit[better]
        kind[better] = b_idx

    hit = np.isfinite(t_best)
    points = origins + dirs * np.where(hit, t_best, 0.0)[:, None]
    intensity = np.full(n, spec.sky_intensity)
    ground = kind == -2
    if ground.any():
        intensity[ground] = ground_intensity(spec, points[ground, 0], points[ground, 1],
                                             modality=modality)
    for b_idx, box in enumerate(boxes):
        sel = kind == b_idx
        if sel.any():
            speck = _speckle(points[sel, 0] + points[sel, 2],
                             points[sel, 1] + points[sel, 2],
                             spec.texture_cell, spec.texture_amp)
            if modality == "lidar":
                # uniform reflectance outside the marked stretch (see
                # ground_intensity); curbs span the whole road
                in_zone = ((points[sel, 0] >= spec.marking_zone[0])
                           & (points[sel, 0] <= spec.marking_zone[1]))
                speck = np.where(in_zone, speck, 0.0)
            intensity[sel] = np.clip(box.intensity + speck, 0.0, 255.0)
    return t_best, intensity, hit


# ---------------------------------------------------------------------------
# sensors


def vehicle_pose(spec: SceneSpec, t: float) -> Pose6:
    return Pose6(spec.speed * t, 0.0, 0.0, 0.0, 0.0, 0.0)


def _lidar_dirs(model: LidarModel) -> np.ndarray:
    a0, a1, step = model.azimuth_deg
    az = np.arange(a0, a1 + step / 2.0, step) * DEG
    if model.kind == "2d":
        return np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], axis=1)
    dirs = []
    for el_deg in model.elevation_deg:
        el = el_deg * DEG
        dirs.append(np.stack([
            np.cos(el) * np.cos(az), np.cos(el) * np.sin(az),
            np.full_like(az, np.sin(el)),
        ], axis=1))
    return np.concatenate(dirs)


def render_scan(spec: SceneSpec, sensor_id: int, t: float,
                rng: np.random.Generator) -> IntensityCloud:
    """One LiDAR scan at time t, in the sensor frame."""
    model = spec.lidars[sensor_id]
    sensor_in_global = compose(pose_to_transform(vehicle_pose(spec, t)),
                               pose_to_transform(model.pose))
    dirs_local = _lidar_dirs(model)
    dirs = dirs_local @ sensor_in_global.R.T
    origins = np.broadcast_to(sensor_in_global.t, dirs.shape).copy()

    t_hit, intensity, hit = trace(spec, origins, dirs, modality="lidar")
    keep = hit & (t_hit <= spec.lidar_range)
    ranges = t_hit[keep]
    if spec.range_sigma > 0:
        ranges = ranges + rng.normal(0.0, spec.range_sigma, len(ranges))
    inten = intensity[keep]
    if spec.intensity_sigma > 0:
        inten = inten + rng.normal(0.0, spec.intensity_sigma, len(inten))
    # points in the sensor frame: range along the local ray direction
    pts = dirs_local[keep] * ranges[:, None]
    return IntensityCloud(f"lidar{sensor_id}", pts, np.clip(inten, 0.0, 255.0))


def camera_pose_in_vehicle(spec: SceneSpec, camera: str = "left") -> Pose6:
    """Ground-truth camera pose; right cameras shift along the camera x axis."""
    shifts = {"left": 0.0, "right": spec.intrinsics.b, "right2": 2.0 * spec.intrinsics.b}
    try:
        shift = shifts[camera]
    except KeyError:
        raise ValueError(f"unknown camera {camera!r}") from None
    base = pose_to_transform(spec.camera_pose)
    shifted = compose(base, RigidTransform(np.eye(3), np.array([shift, 0.0, 0.0])))
    from .geometry import transform_to_pose

    return transform_to_pose(shifted)


def truth(spec: SceneSpec, camera: str = "left") -> Pose6:
    """Camera-in-vehicle ground truth used for error scoring."""
    return camera_pose_in_vehicle(spec, camera)


def render_image(spec: SceneSpec, t: float, camera: str,
                 rng: np.random.Generator) -> np.ndarray:
    """Rasterize the scene into one camera; returns an 8-bit gray image."""
    k = spec.intrinsics
    cam_in_global = compose(pose_to_transform(vehicle_pose(spec, t)),
                            pose_to_transform(camera_pose_in_vehicle(spec, camera)))
    us, vs = np.meshgrid(np.arange(k.width, dtype=np.float64),
                         np.arange(k.height, dtype=np.float64))
    rays_cam = np.stack([
        (us.ravel() - k.cu) / k.f,
        (vs.ravel() - k.cv) / k.f,
        np.ones(us.size),
    ], axis=1)
    rays_cam /= np.linalg.norm(rays_cam, axis=1, keepdims=True)
    dirs = rays_cam @ cam_in_global.R.T
    origins = np.broadcast_to(cam_in_global.t, dirs.shape).copy()
    _, intensity, _ = trace(spec, origins, dirs)
    img = intensity.reshape(k.height, k.width)
    if spec.image_sigma > 0:
        img = img + rng.normal(0.0, spec.image_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# dataset emission


def render_dataset(spec: SceneSpec, out_dir, seed: int = 0) -> Path:
    """Write a complete dataset tree; deterministic for fixed (spec, seed)."""
    out = Path(out_dir)
    (out / "scans").mkdir(parents=True, exist_ok=True)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    duration = spec.duration()

    traj_times = np.arange(0.0, duration + 1e-9, 1.0 / spec.traj_rate)
    samples = [(float(t), vehicle_pose(spec, t)) for t in traj_times]
    dataio.write_trajectory(out / "trajectory.csv", samples)
    dataio.write_lidar_extrinsics(out / "lidar_extrinsics.txt",
                                  {sid: m.pose for sid, m in spec.lidars.items()})
    dataio.write_intrinsics(out / "intrinsics.txt", spec.intrinsics)
    dataio.write_result(out / "truth.txt", truth(spec, "left"))
    dataio.write_result(out / "truth_right.txt", truth(spec, "right"))

    # sanity: the camera must actually observe the road
    probe = render_image(spec, traj_times[0], "left", np.random.default_rng(0))
    road_like = (probe != int(spec.sky_intensity)).mean()
    if road_like < 0.01:
        raise ValueError("degenerate scene: the camera never sees the road")

    scan_times = np.arange(0.0, duration + 1e-9, 1.0 / spec.lidar_rate)
    for t in scan_times:
        for sensor_id in sorted(spec.lidars):
            cloud = render_scan(spec, sensor_id, float(t), rng)
            dataio.write_ply(out / "scans" / dataio.scan_filename(sensor_id, float(t)), cloud)

    image_times = np.arange(0.0, duration + 1e-9, 1.0 / spec.image_rate)
    for t in image_times:
        for camera in ("left", "right", "right2"):
            img = render_image(spec, float(t), camera, rng)
            dataio.write_pgm(out / "images" / dataio.image_filename(camera, float(t)), img)

    log.info("dataset written to %s (%d scans, %d stereo frames)",
             out, len(scan_times) * len(spec.lidars), len(image_times))
    return out
