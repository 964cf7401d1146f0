"""Road line segments, vanishing-point voting and informative-image choice.

A deterministic Hough-based segment extractor stands in for LSD: the voting
and utility math only need segment endpoints and centers, and a seeded,
reproducible detector is worth more here than detector fidelity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .edges import canny_edges

log = logging.getLogger(__name__)

VOTE_CAP = 10.0
RHO1_DEG = 3.0


@dataclass(frozen=True)
class LineSegment:
    s: np.ndarray  # (u, v) start
    e: np.ndarray  # (u, v) end
    c: np.ndarray  # (u, v) center
    length: float

    @classmethod
    def from_endpoints(cls, s, e) -> "LineSegment":
        s = np.asarray(s, dtype=np.float64)
        e = np.asarray(e, dtype=np.float64)
        return cls(s, e, (s + e) / 2.0, float(np.linalg.norm(e - s)))

    def direction(self) -> np.ndarray:
        d = self.e - self.s
        norm = np.linalg.norm(d)
        return d / norm if norm > 0 else np.array([1.0, 0.0])


@dataclass
class VotingRegion:
    u0: float  # top-left pixel of the region
    v0: float
    width: int
    height: int
    accumulator: np.ndarray  # (height, width)


@dataclass(frozen=True)
class VanishingEstimate:
    p_van: tuple[float, float]
    u_van: float


@dataclass(frozen=True)
class ImageUtility:
    frame_id: str
    timestamp: float
    n_segments: int
    u_van: float
    u_i: float


def detect_segments(road_image: np.ndarray, mask: np.ndarray,
                    min_seg_len: float = 20.0, max_gap: float = 3.0,
                    canny_sigma: float = 1.4, canny_low: float = 40.0,
                    canny_high: float = 100.0, max_lines: int = 50) -> list[LineSegment]:
    """Line segments on the road region.

    Canny edges restricted to the mask feed an iterative Hough peak search;
    collinear edge pixels are split into runs at gaps wider than ``max_gap``
    and runs shorter than ``min_seg_len`` are dropped.  Fully deterministic.
    """
    edges = canny_edges(road_image, sigma=canny_sigma, low=canny_low,
                        high=canny_high, mask=mask)
    vs, us = np.nonzero(edges)
    if len(vs) == 0:
        return []
    pts_u = us.astype(np.float64)
    pts_v = vs.astype(np.float64)

    thetas = np.radians(np.arange(0.0, 180.0, 1.0))
    cos_t = np.cos(thetas)
    sin_t = np.sin(thetas)
    diag = int(np.ceil(np.hypot(*road_image.shape)))

    segments: list[LineSegment] = []
    alive = np.ones(len(pts_u), dtype=bool)
    for _ in range(max_lines):
        idx = np.nonzero(alive)[0]
        if len(idx) < min_seg_len:
            break
        rho = pts_u[idx, None] * cos_t[None, :] + pts_v[idx, None] * sin_t[None, :]
        rho_bin = np.rint(rho).astype(np.int64) + diag
        acc = np.zeros((2 * diag + 1, len(thetas)), dtype=np.int64)
        np.add.at(acc, (rho_bin.ravel(), np.tile(np.arange(len(thetas)), len(idx))), 1)
        peak = int(acc.max())
        if peak < min_seg_len:
            break
        r_bin, t_bin = np.unravel_index(int(acc.argmax()), acc.shape)
        ct, st = cos_t[t_bin], sin_t[t_bin]
        rho_star = float(r_bin - diag)

        on_line = np.abs(pts_u[idx] * ct + pts_v[idx] * st - rho_star) <= 1.5
        line_idx = idx[on_line]
        if len(line_idx) == 0:
            break
        # coordinate along the line
        t_coord = -pts_u[line_idx] * st + pts_v[line_idx] * ct
        order = np.argsort(t_coord, kind="stable")
        line_idx = line_idx[order]
        t_sorted = t_coord[order]
        gaps = np.nonzero(np.diff(t_sorted) > max_gap)[0]
        starts = np.concatenate([[0], gaps + 1])
        ends = np.concatenate([gaps, [len(t_sorted) - 1]])
        for a, b in zip(starts, ends):
            if t_sorted[b] - t_sorted[a] < min_seg_len:
                continue
            p_start = np.array([pts_u[line_idx[a]], pts_v[line_idx[a]]])
            p_end = np.array([pts_u[line_idx[b]], pts_v[line_idx[b]]])
            seg = LineSegment.from_endpoints(p_start, p_end)
            if _mask_fraction(seg, mask) >= 0.9:
                segments.append(seg)
        alive[line_idx] = False

    return segments


def _mask_fraction(seg: LineSegment, mask: np.ndarray) -> float:
    n = max(int(seg.length), 2)
    us = np.rint(np.linspace(seg.s[0], seg.e[0], n)).astype(int)
    vs = np.rint(np.linspace(seg.s[1], seg.e[1], n)).astype(int)
    h, w = mask.shape
    inb = (us >= 0) & (us < w) & (vs >= 0) & (vs < h)
    if not inb.any():
        return 0.0
    return float(mask[vs[inb], us[inb]].sum()) / n


def vote_weight(alpha_deg: float, rho1_deg: float = RHO1_DEG, cap: float = VOTE_CAP) -> float:
    """Vanishing-point vote weight: min(1/alpha, cap) up to rho1, else 0."""
    if alpha_deg < 0:
        raise ValueError("angle must be non-negative")
    if alpha_deg > rho1_deg:
        return 0.0
    if alpha_deg <= 1.0 / cap:
        return cap
    return 1.0 / alpha_deg


def estimate_vanishing_point(segments, horizon_center, region_w: int, region_h: int,
                             rho1_deg: float = RHO1_DEG, cap: float = VOTE_CAP,
                             backend: str | None = None):
    """Weighted voting over a region centered on the horizon midpoint.

    Returns (VanishingEstimate, VotingRegion).  Ties in the accumulator break
    toward the smallest row, then smallest column.  An empty segment list
    yields a zero-score estimate at the region center.
    """
    u0 = float(horizon_center[0]) - region_w / 2.0
    v0 = float(horizon_center[1]) - region_h / 2.0
    if not segments:
        acc = np.zeros((region_h, region_w))
        center = (u0 + region_w / 2.0, v0 + region_h / 2.0)
        return VanishingEstimate(center, 0.0), VotingRegion(u0, v0, region_w, region_h, acc)

    centers = np.array([seg.c for seg in segments])
    directions = np.array([seg.direction() for seg in segments])
    acc = kernels.accumulate_votes(centers, directions, u0, v0, region_w, region_h,
                                   rho1_deg, cap, backend=backend)
    flat = int(np.argmax(acc))
    row, col = np.unravel_index(flat, acc.shape)
    p_van = (u0 + col, v0 + row)
    return VanishingEstimate(p_van, float(acc[row, col])), VotingRegion(u0, v0, region_w, region_h, acc)


def image_utility(segments, van: VanishingEstimate, frame_id: str = "",
                  timestamp: float = 0.0) -> ImageUtility:
    """Per-image utility: capped inverse angles to the vanishing point, scaled
    by the vote confidence."""
    total = 0.0
    p = np.asarray(van.p_van, dtype=np.float64)
    for seg in segments:
        to_vp = p - seg.c
        norm = np.linalg.norm(to_vp)
        if norm == 0:
            angle = 0.0
        else:
            cosang = min(1.0, abs(float(to_vp @ seg.direction())) / norm)
            angle = float(np.degrees(np.arccos(cosang)))
        total += 1.0 if angle <= 1.0 else 1.0 / angle
    return ImageUtility(frame_id, timestamp, len(segments), van.u_van, total * van.u_van)


def select_informative(utilities, k: int) -> list[str]:
    """Frame ids of the k largest utilities; ties go to earlier timestamps."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(utilities, key=lambda u: (-u.u_i, u.timestamp))
    if len(ranked) < k:
        log.warning("only %d images available, %d requested", len(ranked), k)
    return [u.frame_id for u in ranked[:k]]
