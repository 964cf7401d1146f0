"""Calibration costs: edge alignment, NID and plane fitting, plus the
weighted per-frame total minimized by the optimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .edges import canny_edges, saturation_distance
from .errors import NoRoadPointsError
from .geometry import CameraIntrinsics, IntensityCloud, Pose6, inverse, pose_to_transform
from .localmap import render_intensity_image
from .stereo import PlaneModel


@dataclass(frozen=True)
class CostWeights:
    k1: float = 2.0
    k2: float = 500.0
    k3: float = 0.1

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) < 0:
            raise ValueError("cost weights must be non-negative")


def edge_cost(lidar_edges: np.ndarray, dt: np.ndarray, valid: np.ndarray,
              normalize: str = "count", d_sat: float | None = None) -> float:
    """Chamfer-style alignment of LiDAR edges against the stereo edge
    distance transform.

    Sum of distance-transform values at LiDAR edge pixels inside ``valid``,
    divided by the LiDAR edge pixel count (``normalize='count'``, default) so
    candidates projecting different point counts stay comparable; the raw sum
    is available with ``normalize='raw'``.  With no LiDAR edge pixels the
    cost saturates at ``d_sat``.
    """
    if lidar_edges.shape != dt.shape:
        raise ValueError("edge image and distance transform dimensions differ")
    if d_sat is None:
        d_sat = saturation_distance(dt.shape)
    sel = lidar_edges.astype(bool) & valid.astype(bool)
    count = int(sel.sum())
    if count == 0:
        return float(d_sat)
    total = float(dt[sel].sum())
    if normalize == "count":
        return total / count
    if normalize == "raw":
        return total
    raise ValueError(f"unknown edge normalization {normalize!r}")


def joint_histogram(x: np.ndarray, y: np.ndarray, bins: int = 32):
    """Joint counts of two 0..255 signals plus marginals."""
    ix = np.clip((x.astype(np.int64) * bins) // 256, 0, bins - 1)
    iy = np.clip((y.astype(np.int64) * bins) // 256, 0, bins - 1)
    joint = np.bincount(ix * bins + iy, minlength=bins * bins).reshape(bins, bins)
    return joint, joint.sum(axis=1), joint.sum(axis=0)


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def nid_cost(stereo: np.ndarray, lidar_image, mask: np.ndarray,
             bins: int = 32, min_covalid: int = 1000) -> float:
    """Normalized information distance between road-masked stereo gray and
    LiDAR intensity, in [0, 1].

    2 - (H(X) + H(Y)) / H(X, Y) over the joint histogram of co-valid pixels
    (road mask intersected with the LiDAR validity mask), entropies in nats.
    Too few co-valid pixels returns the uninformative maximum 1; two constant
    images (H(X, Y) = 0) return 0 by convention.
    """
    covalid = mask.astype(bool) & lidar_image.valid
    if int(covalid.sum()) < min_covalid:
        return 1.0
    x = np.asarray(stereo)[covalid]
    y = lidar_image.image[covalid]
    joint, mx, my = joint_histogram(x, y, bins)
    hxy = _entropy(joint.ravel())
    if hxy == 0.0:
        return 0.0
    nid = 2.0 - (_entropy(mx) + _entropy(my)) / hxy
    return float(np.clip(nid, 0.0, 1.0))


def segment_road_points(points: np.ndarray, plane: PlaneModel, k: int = 12,
                        theta_smooth_deg: float = 10.0, tau_seed: float = 0.1,
                        max_points: int = 20000, band: float = 0.5) -> np.ndarray:
    """Region-growing road segmentation; returns indices into ``points``.

    Points within ``band`` of the plane get PCA normals from their k nearest
    neighbors; growth spreads from seed points (within ``tau_seed`` of the
    plane) through neighbors whose normals stay within ``theta_smooth_deg``
    of the plane normal.  The largest grown region wins.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise NoRoadPointsError("empty input cloud")
    res = plane.residuals(points)
    band_idx = np.nonzero(np.abs(res) <= band)[0]
    if len(band_idx) == 0:
        raise NoRoadPointsError("no points near the road plane")
    if len(band_idx) > max_points:
        # deterministic thinning, no RNG needed
        band_idx = band_idx[np.linspace(0, len(band_idx) - 1, max_points).astype(int)]
    pts = points[band_idx]
    n = len(pts)
    k_eff = min(k, n - 1)
    if k_eff < 2:
        # too few points for normals; fall back to the seed criterion alone
        seeds = np.abs(plane.residuals(pts)) <= tau_seed
        if not seeds.any():
            raise NoRoadPointsError("no seed points on the plane")
        return band_idx[seeds]

    tree = cKDTree(pts)
    _, nbrs = tree.query(pts, k=k_eff + 1)
    nbrs = nbrs[:, 1:]

    neighborhood = pts[nbrs]  # (n, k, 3)
    centered = neighborhood - neighborhood.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k_eff
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]  # smallest-eigenvalue direction

    cos_thresh = np.cos(np.radians(theta_smooth_deg))
    compatible = np.abs(normals @ plane.n) >= cos_thresh
    seeds = compatible & (np.abs(plane.residuals(pts)) <= tau_seed)
    if not seeds.any():
        raise NoRoadPointsError("no seed points on the plane")

    # connected components of the kNN graph restricted to compatible points
    rows = np.repeat(np.arange(n), k_eff)
    cols = nbrs.ravel()
    keep = compatible[rows] & compatible[cols]
    rows, cols = rows[keep], cols[keep]
    graph = sparse.coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)

    seed_labels = np.unique(labels[seeds])
    sizes = np.bincount(labels[compatible], minlength=n_comp)
    best = seed_labels[np.argmax(sizes[seed_labels])]
    region = compatible & (labels == best)
    if not region.any():
        raise NoRoadPointsError("region growing produced an empty region")
    return band_idx[region]


def plane_cost(points: np.ndarray, plane: PlaneModel, residual: str = "abs") -> float:
    """Distance of road points to the stereo road plane.

    ``abs`` (default) is the mean absolute residual; ``signed`` is the
    literal signed residual sum, which cancels for symmetric errors and is
    kept only as a fidelity switch.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise NoRoadPointsError("plane cost needs a nonempty road cloud")
    res = plane.residuals(points)
    if residual == "abs":
        return float(np.abs(res).mean())
    if residual == "signed":
        return float(res.sum())
    raise ValueError(f"unknown residual mode {residual!r}")


@dataclass
class FrameData:
    """Everything needed to evaluate the cost of one selected frame.

    Stereo-side products are fixed; only the LiDAR side depends on the
    candidate extrinsic.  Map points are pre-expressed in the vehicle frame
    at the image timestamp and cropped to the camera's plausible view.
    """

    frame_id: str
    timestamp: float
    gray: np.ndarray  # (H, W) uint8 left image
    road_mask: np.ndarray  # (H, W) bool
    stereo_dt: np.ndarray  # (H, W) float, distance transform of stereo edges
    plane: PlaneModel
    points_vehicle: np.ndarray  # (N, 3)
    intensities: np.ndarray  # (N,)
    road_idx: np.ndarray  # indices into points_vehicle used by the plane cost
    intrinsics: CameraIntrinsics


@dataclass(frozen=True)
class CostBreakdown:
    frame_id: str
    f_edge: float
    f_nid: float
    f_plane: float

    def weighted(self, w: CostWeights) -> float:
        return w.k1 * self.f_edge + w.k2 * self.f_nid + w.k3 * self.f_plane


def frame_cost(frame: FrameData, candidate: Pose6, *, splat: int = 1,
               canny_sigma: float = 1.4, canny_low: float = 40.0,
               canny_high: float = 100.0, nid_bins: int = 32,
               nid_min_covalid: int = 1000, edge_normalize: str = "count",
               plane_residual: str = "abs") -> CostBreakdown:
    """Evaluate the three costs of one frame under a candidate extrinsic."""
    t_cv = inverse(pose_to_transform(candidate))
    pts_cam = t_cv.apply_points(frame.points_vehicle)
    cloud = IntensityCloud("camera", pts_cam, frame.intensities)
    lidar_img = render_intensity_image(cloud, frame.intrinsics, splat=splat)

    d_sat = saturation_distance(frame.gray.shape)
    lidar_edges = canny_edges(lidar_img.image, sigma=canny_sigma, low=canny_low,
                              high=canny_high, mask=frame.road_mask, valid=lidar_img.valid)
    f_edge = edge_cost(lidar_edges, frame.stereo_dt,
                       frame.road_mask & lidar_img.valid,
                       normalize=edge_normalize, d_sat=d_sat)
    f_nid = nid_cost(frame.gray, lidar_img, frame.road_mask,
                     bins=nid_bins, min_covalid=nid_min_covalid)
    if len(frame.road_idx):
        f_plane = plane_cost(pts_cam[frame.road_idx], frame.plane, residual=plane_residual)
    else:
        f_plane = 0.0
    return CostBreakdown(frame.frame_id, f_edge, f_nid, f_plane)


def total_cost(frames, candidate: Pose6, weights: CostWeights, **kwargs):
    """Weighted cost summed over frames; returns (f_sum, breakdowns).

    Uninformative frames contribute their saturated costs instead of raising,
    so the optimizer always sees a finite value.
    """
    if not frames:
        raise ValueError("total_cost needs at least one frame")
    breakdowns = [frame_cost(f, candidate, **kwargs) for f in frames]
    f_sum = float(sum(b.weighted(weights) for b in breakdowns))
    return f_sum, breakdowns
