"""Stereo disparity, v-disparity road line, road mask and road plane.

Disparity is stored in 1/16-px fixed point with 0 as the invalid sentinel,
matching the on-disk 16-bit PGM format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NoPlaneError, NoRoadError
from .geometry import CameraIntrinsics, disparity_to_points

DISP_SCALE = 16


@dataclass
class DisparityImage:
    fixed: np.ndarray  # (H, W) uint16, disparity * 16, 0 = invalid

    @property
    def valid(self) -> np.ndarray:
        return self.fixed > 0

    def disparity(self) -> np.ndarray:
        """Disparity in pixels (float); 0 where invalid."""
        return self.fixed.astype(np.float64) / DISP_SCALE

    @property
    def shape(self):
        return self.fixed.shape


@dataclass(frozen=True)
class RoadLine:
    """Road line in (disparity, v) space: v = slope * d + intercept."""

    slope: float
    intercept: float
    inlier_count: int

    def expected_disparity(self, v):
        return (np.asarray(v, dtype=np.float64) - self.intercept) / self.slope


@dataclass(frozen=True)
class PlaneModel:
    """Plane n . p + d = 0 with unit normal, camera coordinates."""

    n: np.ndarray
    d: float

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "n", n)

    def residuals(self, points: np.ndarray) -> np.ndarray:
        return points @ self.n + self.d


def compute_disparity(left: np.ndarray, right: np.ndarray, max_disp: int = 128,
                      window: int = 9, lr_tol: float = 1.0) -> DisparityImage:
    """SAD block matching with a left-right consistency check.

    Sub-pixel refinement by parabola fit over the SAD valley.  Pixels failing
    the consistency check, lacking texture, or closer to the left border than
    their disparity are invalid.
    """
    if left.shape != right.shape:
        raise ValueError("stereo pair dimensions differ")
    h, w = left.shape
    left_f = left.astype(np.float32)
    right_f = right.astype(np.float32)
    half = window // 2

    # SAD volume as uint16 (max 81 * 255 fits); box filter per disparity slice
    volume = np.full((max_disp, h, w), np.uint16(65535), dtype=np.uint16)
    for d in range(max_disp):
        diff = np.abs(left_f[:, d:] - right_f[:, : w - d if d else w])
        sad = ndimage.uniform_filter(diff, size=window, mode="nearest") * (window * window)
        volume[d, :, d:] = np.minimum(np.rint(sad), 65535).astype(np.uint16)

    best_l = np.argmin(volume, axis=0)

    # right-image disparities reuse the same volume: C_R(v, u, d) = C_L(v, u+d, d)
    vol_r = np.full_like(volume, np.uint16(65535))
    for d in range(max_disp):
        vol_r[d, :, : w - d if d else w] = volume[d, :, d:]
    best_r = np.argmin(vol_r, axis=0)

    cols = np.arange(w)[None, :].repeat(h, axis=0)
    match_u = cols - best_l
    consistent = np.zeros((h, w), dtype=bool)
    ok = match_u >= 0
    rows = np.arange(h)[:, None].repeat(w, axis=1)
    consistent[ok] = np.abs(best_r[rows[ok], match_u[ok]] - best_l[ok]) <= lr_tol

    # reject borders and texture-free pixels (flat SAD valley)
    cost_best = np.take_along_axis(volume, best_l[None], axis=0)[0]
    valid = consistent
    valid &= cols >= best_l + half
    valid &= (cols >= half) & (cols < w - half) & (rows >= half) & (rows < h - half)
    valid &= best_l > 0

    # parabola sub-pixel refinement where both neighbors exist
    d0 = np.clip(best_l, 1, max_disp - 2)
    c_prev = np.take_along_axis(volume, (d0 - 1)[None], axis=0)[0].astype(np.float64)
    c_next = np.take_along_axis(volume, (d0 + 1)[None], axis=0)[0].astype(np.float64)
    c_mid = np.take_along_axis(volume, d0[None], axis=0)[0].astype(np.float64)
    denom = c_prev + c_next - 2.0 * c_mid
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = np.where(denom > 0, 0.5 * (c_prev - c_next) / np.maximum(denom, 1e-12), 0.0)
    offset = np.clip(offset, -0.5, 0.5)
    offset = np.where(best_l == d0, offset, 0.0)

    # flat valley with no contrast at all: reject
    valid &= ~((denom == 0) & (c_mid == cost_best) & (c_prev == c_mid) & (c_next == c_mid))

    disp = best_l.astype(np.float64) + offset
    fixed = np.rint(disp * DISP_SCALE).astype(np.int64)
    fixed = np.where(valid & (fixed > 0), fixed, 0)
    return DisparityImage(fixed.astype(np.uint16))


def build_v_disparity(d: DisparityImage, max_disp: int | None = None) -> np.ndarray:
    """Histogram of rounded disparity per image row; shape (H, max_disp+1)."""
    h, _ = d.shape
    disp = np.rint(d.disparity()).astype(np.int64)
    if max_disp is None:
        max_disp = int(disp.max()) if disp.size else 0
    nbins = max_disp + 1
    vd = np.zeros((h, nbins), dtype=np.int64)
    valid = d.valid & (disp <= max_disp)
    rows = np.nonzero(valid)[0]
    bins = disp[valid]
    np.add.at(vd, (rows, bins), 1)
    return vd


def fit_road_line(vd: np.ndarray, iters: int = 500, thresh: float = 1.0,
                  min_inliers: int | None = None, rng: np.random.Generator | None = None) -> RoadLine:
    """RANSAC line fit in (disparity, v) with count-weighted inlier scoring.

    The line must have positive slope (disparity grows downward for a forward
    road); a vertical wall collapses to a single disparity column and is
    rejected.  Inliers are refined by count-weighted least squares.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if min_inliers is None:
        min_inliers = int(0.3 * vd.shape[0])

    rows, cols = np.nonzero(vd)
    if len(rows) < max(min_inliers, 2):
        raise NoRoadError(f"only {len(rows)} populated v-disparity cells")
    weights = vd[rows, cols].astype(np.float64)
    d_cells = cols.astype(np.float64)
    v_cells = rows.astype(np.float64)

    best_score = -1.0
    best_inliers = None
    n = len(rows)
    for _ in range(iters):
        i, j = rng.integers(0, n, size=2)
        if d_cells[i] == d_cells[j]:
            continue
        slope = (v_cells[j] - v_cells[i]) / (d_cells[j] - d_cells[i])
        if slope <= 0:
            continue
        intercept = v_cells[i] - slope * d_cells[i]
        d_expected = (v_cells - intercept) / slope
        inliers = np.abs(d_cells - d_expected) <= thresh
        score = float(weights[inliers].sum())
        if score > best_score:
            best_score = score
            best_inliers = inliers

    if best_inliers is None or int(best_inliers.sum()) < min_inliers:
        found = 0 if best_inliers is None else int(best_inliers.sum())
        raise NoRoadError(f"road line support too small ({found} < {min_inliers})")

    # weighted LSQ of d on v (the inlier metric lives on the disparity axis)
    wsel = weights[best_inliers]
    vs = v_cells[best_inliers]
    ds = d_cells[best_inliers]
    A = np.stack([vs, np.ones_like(vs)], axis=1)
    W = np.sqrt(wsel)
    p, q = np.linalg.lstsq(A * W[:, None], ds * W, rcond=None)[0]
    if p <= 0:
        raise NoRoadError("refined road line has non-positive slope")
    return RoadLine(slope=1.0 / p, intercept=-q / p, inlier_count=int(best_inliers.sum()))


def horizon_row(line: RoadLine, height: int) -> int:
    """Row where the road line reaches disparity zero, clamped to the image."""
    return int(np.clip(round(line.intercept), 0, height - 1))


def extract_road_mask(d: DisparityImage, line: RoadLine, tau: float = 2.0) -> np.ndarray:
    """Pixels whose disparity matches the road line, strictly below horizon."""
    h, w = d.shape
    horizon = horizon_row(line, h)
    expected = line.expected_disparity(np.arange(h))[:, None]
    mask = d.valid & (np.abs(d.disparity() - expected) <= tau)
    mask[: horizon + 1, :] = False
    return mask


def fit_road_plane(d: DisparityImage, mask: np.ndarray, k: CameraIntrinsics,
                   tau: float = 0.05, min_points: int = 500, iters: int = 200,
                   max_samples: int = 20000,
                   rng: np.random.Generator | None = None) -> PlaneModel:
    """RANSAC plane through back-projected road pixels, least-squares refit.

    The normal is oriented with n_y < 0 (up in camera coordinates), so |d|
    approximates the camera mounting height.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    vs, us = np.nonzero(mask & d.valid)
    if len(vs) < min_points:
        raise NoPlaneError(f"only {len(vs)} road pixels with valid disparity")
    if len(vs) > max_samples:
        sel = rng.choice(len(vs), size=max_samples, replace=False)
        vs, us = vs[sel], us[sel]
    disp = d.disparity()[vs, us]
    pts = disparity_to_points(k, us.astype(np.float64), vs.astype(np.float64), disp)

    n_pts = len(pts)
    best_count = -1
    best_inliers = None
    for _ in range(iters):
        idx = rng.choice(n_pts, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        offset = -normal @ p0
        dist = np.abs(pts @ normal + offset)
        inliers = dist <= tau
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers

    if best_inliers is None or best_count < 3:
        raise NoPlaneError("RANSAC found no plane support")

    sel = pts[best_inliers]
    centroid = sel.mean(axis=0)
    _, _, vt = np.linalg.svd(sel - centroid, full_matrices=False)
    normal = vt[-1]
    normal = normal / np.linalg.norm(normal)
    offset = -normal @ centroid
    if normal[1] > 0:
        normal, offset = -normal, -offset
    return PlaneModel(normal, float(offset))
