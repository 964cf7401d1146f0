"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable; must produce bitwise
identical results to ``_core``.
"""

from __future__ import annotations

import numpy as np

RAD2DEG = 57.29577951308232


def render_zbuffer(us, vs, depth, intens, height, width, splat, z_band):
    """Z-buffered point splatting; see the compiled twin for semantics."""
    img = np.zeros((height, width), dtype=np.uint8)
    zbuf = np.full((height, width), np.inf, dtype=np.float64)
    valid = np.zeros((height, width), dtype=bool)
    n = len(us)
    if n == 0:
        return img, zbuf, valid

    gray = (intens + 0.5).astype(np.uint8).astype(np.float64)
    factor = 1.0 + z_band

    def _blend(u, v, z, g):
        """Per-pixel mean of candidates within the near-depth band."""
        pix = v * width + u
        zmin = np.full(height * width, np.inf)
        np.minimum.at(zmin, pix, z)
        band = z <= zmin[pix] * factor
        sums = np.zeros(height * width)
        cnts = np.zeros(height * width)
        np.add.at(sums, pix[band], g[band])
        np.add.at(cnts, pix[band], 1.0)
        hit = cnts > 0
        values = np.zeros(height * width, dtype=np.uint8)
        values[hit] = (sums[hit] / cnts[hit] + 0.5).astype(np.uint8)
        return hit.reshape(height, width), values.reshape(height, width), zmin.reshape(height, width)

    # stage 1: every point competes only for its own pixel; candidates whose
    # depth sits within the band above the pixel's minimum are averaged, which
    # keeps the sampled texture centered on the pixel footprint
    inb = (us >= 0) & (us < width) & (vs >= 0) & (vs < height)
    hit, values, zmin = _blend(us[inb], vs[inb], depth[inb], gray[inb])
    img[hit] = values[hit]
    zbuf[hit] = zmin[hit]
    valid[hit] = True
    center = hit

    if splat > 0:
        # stage 2: splat footprints fill only pixels without a center hit
        offs = np.arange(-splat, splat + 1)
        du, dv = np.meshgrid(offs, offs)
        u_all = (us[:, None] + du.ravel()[None, :]).ravel()
        v_all = (vs[:, None] + dv.ravel()[None, :]).ravel()
        k = du.size
        z_all = np.repeat(depth, k)
        gray_all = np.repeat(gray, k)

        keep = ((u_all >= 0) & (u_all < width) & (v_all >= 0) & (v_all < height))
        u_all, v_all, z_all, gray_all = (
            u_all[keep], v_all[keep], z_all[keep], gray_all[keep]
        )
        free = ~center[v_all, u_all]
        hit, values, zmin = _blend(u_all[free], v_all[free], z_all[free], gray_all[free])
        img[hit] = values[hit]
        zbuf[hit] = zmin[hit]
        valid[hit] = True
    return img, zbuf, valid


def accumulate_votes(centers, directions, u0, v0, w, h, rho1_deg, cap):
    """Vanishing-point vote accumulation; see the compiled twin."""
    acc = np.zeros((h, w), dtype=np.float64)
    if len(centers) == 0:
        return acc
    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pu = u0 + cols
    pv = v0 + rows
    for (cx, cy), (dx, dy) in zip(centers, directions):
        px = pu - cx
        py = pv - cy
        norm = np.sqrt(px * px + py * py)
        with np.errstate(invalid="ignore", divide="ignore"):
            cosang = np.abs(px * dx + py * dy) / np.where(norm == 0.0, 1.0, norm)
        cosang = np.minimum(cosang, 1.0)
        alpha = np.arccos(cosang) * RAD2DEG
        alpha = np.where(norm == 0.0, 0.0, alpha)
        wgt = np.where(alpha > 1.0 / cap, np.minimum(1.0 / np.maximum(alpha, 1e-300), cap), cap)
        acc += np.where(alpha <= rho1_deg, wgt, 0.0)
    return acc
