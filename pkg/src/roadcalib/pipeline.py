"""Dataset loading and the stereo-side preprocessing feeding the optimizer.

Splits the end-to-end run into reusable stages: load -> accumulate map ->
analyze images (road + vanishing point + utility) -> select -> prepare
FrameData for cost evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .config import Config
from .costs import FrameData, segment_road_points
from .edges import canny_edges, distance_transform
from .errors import DatasetError, NoRoadPointsError, RoadCalibError
from .geometry import CameraIntrinsics, Pose6, inverse, pose_to_transform
from .localmap import GlobalMap, LidarScan, accumulate, pose_at, to_camera_frame
from .selection import (
    ImageUtility,
    detect_segments,
    estimate_vanishing_point,
    image_utility,
    select_informative,
)
from .stereo import (
    DisparityImage,
    PlaneModel,
    RoadLine,
    compute_disparity,
    extract_road_mask,
    fit_road_line,
    fit_road_plane,
    horizon_row,
    build_v_disparity,
)

log = logging.getLogger(__name__)

# which image file prefixes form the stereo pair for each calibrated camera
CAMERA_PAIRS = {"left": ("left", "right"), "right": ("right", "right2")}


@dataclass
class Dataset:
    root: Path
    trajectory: list
    lidar_extrinsics: dict[int, Pose6]
    intrinsics: CameraIntrinsics
    scans: list[LidarScan]
    images: dict[str, list[tuple[float, np.ndarray]]]


def load_dataset(root) -> Dataset:
    root = Path(root)
    traj_path = root / "trajectory.csv"
    if not traj_path.exists():
        raise DatasetError(f"missing {traj_path}")
    trajectory = dataio.read_trajectory(traj_path)
    lidar_extrinsics = dataio.read_lidar_extrinsics(root / "lidar_extrinsics.txt")
    intrinsics = dataio.read_intrinsics(root / "intrinsics.txt")

    scans = []
    for sensor_id, ts, path in dataio.list_scans(root / "scans"):
        scans.append(LidarScan(ts, sensor_id, dataio.read_ply(path, frame=f"lidar{sensor_id}")))
    if not scans:
        raise DatasetError(f"no scans found under {root / 'scans'}")

    images: dict[str, list[tuple[float, np.ndarray]]] = {}
    for camera in ("left", "right", "right2"):
        entries = dataio.list_images(root / "images", camera)
        images[camera] = [(ts, dataio.read_pgm(path)) for ts, path in entries]
    if not images["left"]:
        raise DatasetError(f"no images found under {root / 'images'}")
    return Dataset(root, trajectory, lidar_extrinsics, intrinsics, scans, images)


def build_map(dataset: Dataset, cfg: Config) -> GlobalMap:
    return accumulate(dataset.scans, dataset.trajectory, dataset.lidar_extrinsics,
                      window_m=cfg["map.window_m"])


@dataclass
class FrameAnalysis:
    frame_id: str
    timestamp: float
    gray: np.ndarray
    disparity: DisparityImage
    line: RoadLine
    horizon: int
    road_mask: np.ndarray
    plane: PlaneModel
    segments: list
    utility: ImageUtility
    p_van: tuple[float, float]


def analyze_image(frame_id: str, timestamp: float, gray: np.ndarray,
                  partner: np.ndarray, k: CameraIntrinsics, cfg: Config,
                  rng: np.random.Generator,
                  disparity: DisparityImage | None = None) -> FrameAnalysis:
    """Road detection, segment extraction and utility scoring for one image.

    Raises NoRoadError / NoPlaneError when the image has no usable road.
    A precomputed disparity map may be injected instead of block matching.
    """
    if disparity is None:
        disparity = compute_disparity(gray, partner, max_disp=cfg["stereo.max_disp"],
                                      window=cfg["stereo.window"], lr_tol=cfg["stereo.lr_tol"])
    vd = build_v_disparity(disparity, max_disp=cfg["stereo.max_disp"])
    line = fit_road_line(vd, iters=cfg["vline.iters"], thresh=cfg["vline.thresh"],
                         min_inliers=int(cfg["vline.min_inlier_frac"] * gray.shape[0]),
                         rng=rng)
    horizon = horizon_row(line, gray.shape[0])
    road_mask = extract_road_mask(disparity, line, tau=cfg["road.tau"])
    plane = fit_road_plane(disparity, road_mask, k, tau=cfg["plane.tau"],
                           min_points=cfg["plane.min_points"], rng=rng)

    segments = detect_segments(gray, road_mask,
                               min_seg_len=cfg["select.min_seg_len"],
                               max_gap=cfg["select.max_gap"],
                               canny_sigma=cfg["canny.sigma"],
                               canny_low=cfg["canny.low"],
                               canny_high=cfg["canny.high"])
    region_w = max(2, gray.shape[1] // 4)
    region_h = max(2, gray.shape[0] // 8)
    van, _ = estimate_vanishing_point(segments, (gray.shape[1] / 2.0, float(horizon)),
                                      region_w, region_h,
                                      rho1_deg=cfg["vote.rho1_deg"], cap=cfg["vote.cap"])
    utility = image_utility(segments, van, frame_id=frame_id, timestamp=timestamp)
    return FrameAnalysis(frame_id, timestamp, gray, disparity, line, horizon,
                         road_mask, plane, segments, utility, van.p_van)


def analyze_images(dataset: Dataset, cfg: Config, camera: str = "left"):
    """Analyze every image of one camera; road-less frames are skipped."""
    ref_name, partner_name = CAMERA_PAIRS[camera]
    refs = dataset.images[ref_name]
    partners = dict(dataset.images[partner_name])
    rng = np.random.default_rng([cfg["seed"], 101])
    analyses = []
    for ts, gray in refs:
        if ts not in partners:
            log.warning("no %s image at t=%.6f; skipped", partner_name, ts)
            continue
        frame_id = f"{ref_name}_{int(round(ts * 1e9))}"
        try:
            analyses.append(analyze_image(frame_id, ts, gray, partners[ts],
                                          dataset.intrinsics, cfg, rng))
        except RoadCalibError as exc:
            log.warning("frame %s skipped: %s", frame_id, exc)
    return analyses


def select_frames(analyses, cfg: Config):
    """Top-K frame ids by utility (most informative first)."""
    selected = select_informative([a.utility for a in analyses], cfg["select.k"])
    return selected


def prepare_frames(dataset: Dataset, gmap: GlobalMap, analyses, selected_ids,
                   init_pose: Pose6, cfg: Config) -> list[FrameData]:
    """Freeze the stereo-side products and crop the map per selected frame.

    Road points for the plane cost are segmented once, at the initial
    candidate, and tracked by index afterwards.
    """
    by_id = {a.frame_id: a for a in analyses}
    frames = []
    for frame_id in selected_ids:
        a = by_id[frame_id]
        vehicle_pose = pose_at(dataset.trajectory, a.timestamp)
        t_vg = inverse(pose_to_transform(vehicle_pose))
        pts_vehicle = t_vg.apply_points(gmap.cloud.points)
        keep = (
            (pts_vehicle[:, 0] >= -cfg["crop.behind_m"])
            & (pts_vehicle[:, 0] <= cfg["crop.ahead_m"])
            & (np.abs(pts_vehicle[:, 1]) <= cfg["crop.lateral_m"])
            & (pts_vehicle[:, 2] <= cfg["crop.height_m"])
        )
        pts_vehicle = np.ascontiguousarray(pts_vehicle[keep])
        intens = gmap.cloud.intensity[keep]

        stereo_edges = canny_edges(a.gray, sigma=cfg["canny.sigma"],
                                   low=cfg["canny.low"], high=cfg["canny.high"],
                                   mask=a.road_mask)
        dt = distance_transform(stereo_edges)

        t_cv = inverse(pose_to_transform(init_pose))
        pts_cam0 = t_cv.apply_points(pts_vehicle)
        try:
            road_idx = segment_road_points(pts_cam0, a.plane, k=cfg["region.k"],
                                           theta_smooth_deg=cfg["region.theta_smooth_deg"],
                                           tau_seed=cfg["region.tau_seed"],
                                           max_points=cfg["region.max_points"])
        except NoRoadPointsError as exc:
            log.warning("frame %s: %s; plane cost disabled for this frame", frame_id, exc)
            road_idx = np.zeros(0, dtype=int)

        frames.append(FrameData(frame_id, a.timestamp, a.gray, a.road_mask, dt,
                                a.plane, pts_vehicle, intens, road_idx,
                                dataset.intrinsics))
    return frames


def cost_kwargs(cfg: Config) -> dict:
    """Per-frame cost options derived from the config."""
    return dict(
        splat=cfg["render.splat"],
        canny_sigma=cfg["canny.sigma"],
        canny_low=cfg["canny.low"],
        canny_high=cfg["canny.high"],
        nid_bins=cfg["nid.bins"],
        nid_min_covalid=cfg["nid.min_covalid"],
        edge_normalize=cfg["edge.normalize"],
        plane_residual=cfg["plane.residual"],
    )


def write_utility_csv(path, analyses, selected_ids) -> None:
    chosen = set(selected_ids)
    with open(path, "w") as fh:
        fh.write("frame_id,timestamp_s,n_segments,u_van,u_i,selected\n")
        for a in analyses:
            u = a.utility
            fh.write(f"{u.frame_id},{u.timestamp:.9f},{u.n_segments},"
                     f"{u.u_van:.6f},{u.u_i:.6f},{int(u.frame_id in chosen)}\n")
