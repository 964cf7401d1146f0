"""Canny edge extraction and the exact Euclidean distance transform."""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def canny_edges(img: np.ndarray, sigma: float = 1.4, low: float = 40.0,
                high: float = 100.0, mask: np.ndarray | None = None,
                valid: np.ndarray | None = None) -> np.ndarray:
    """Binary edge raster from a grayscale image.

    Gaussian smoothing, Sobel gradients, non-maximum suppression along the
    gradient, then hysteresis: weak pixels (>= low) survive only in
    8-connected components touching a strong pixel (>= high).  Magnitudes are
    clamped to 8 bits before thresholding.

    ``mask`` zeroes edges outside it; ``valid`` marks trustworthy source
    pixels (e.g. hit pixels of a LiDAR intensity image) and is shrunk before
    use so gaps do not masquerade as edges.
    """
    img = np.asarray(img, dtype=np.float64)
    smoothed = ndimage.gaussian_filter(img, sigma, mode="nearest")
    gx = ndimage.sobel(smoothed, axis=1, mode="nearest")
    gy = ndimage.sobel(smoothed, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)

    nms = _non_maximum_suppression(mag, gx, gy)
    mag8 = np.minimum(mag, 255.0)
    weak = nms & (mag8 >= low)
    strong = nms & (mag8 >= high)

    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    keep = np.unique(labels[strong])
    keep = keep[keep > 0]
    edges = np.isin(labels, keep)

    if valid is not None:
        safe = ndimage.binary_erosion(valid, structure=np.ones((5, 5), dtype=bool))
        edges &= safe
    if mask is not None:
        edges &= mask.astype(bool)
    return edges


def _non_maximum_suppression(mag, gx, gy):
    """Keep pixels that are local maxima along their gradient direction."""
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant")

    def shifted(dy, dx):
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    out = np.zeros_like(mag, dtype=bool)
    sectors = [
        ((angle < 22.5) | (angle >= 157.5), (0, 1), (0, -1)),
        ((angle >= 22.5) & (angle < 67.5), (1, 1), (-1, -1)),
        ((angle >= 67.5) & (angle < 112.5), (1, 0), (-1, 0)),
        ((angle >= 112.5) & (angle < 157.5), (1, -1), (-1, 1)),
    ]
    for sel, (dy1, dx1), (dy2, dx2) in sectors:
        keep = (mag >= shifted(dy1, dx1)) & (mag >= shifted(dy2, dx2))
        out |= sel & keep
    out &= mag > 0
    return out


def distance_transform(edges: np.ndarray, d_sat: float | None = None) -> np.ndarray:
    """Per-pixel exact Euclidean distance to the nearest edge pixel.

    With no edge pixels at all the result saturates at ``d_sat`` (defaults to
    the image diagonal) so downstream costs stay finite.
    """
    edges = np.asarray(edges, dtype=bool)
    if d_sat is None:
        d_sat = float(np.hypot(*edges.shape))
    if not edges.any():
        return np.full(edges.shape, d_sat, dtype=np.float64)
    return ndimage.distance_transform_edt(~edges)


def saturation_distance(shape) -> float:
    """Image diagonal in pixels, used as the uninformative cost level."""
    return float(np.hypot(shape[0], shape[1]))
