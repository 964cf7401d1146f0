# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: z-buffered point splatting and vanishing-point voting.

Semantics must match ``numpy_backend`` exactly; ``tests/test_kernels.py``
asserts bitwise-equal outputs between the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, acos, fabs, sqrt

cnp.import_array()

cdef double RAD2DEG = 57.29577951308232


def render_zbuffer(cnp.int64_t[::1] us not None,
                   cnp.int64_t[::1] vs not None,
                   cnp.float64_t[::1] depth not None,
                   cnp.float64_t[::1] intens not None,
                   int height, int width, int splat, double z_band):
    """Splat points into an image with band-averaged z-buffering.

    Two stages keep the gap-closing splat from biasing well-sampled pixels:
    first every point competes only for its own pixel, then pixels left empty
    are filled from the splat footprints of nearby points.  In both stages a
    pixel's value is the mean of all candidates whose depth lies within
    ``z_band`` (relative) of the nearest candidate — averaging keeps the
    sampled texture centered on the pixel footprint, where nearest-depth-wins
    would systematically favor the near edge.
    Returns (image uint8, depth float64, valid bool).
    """
    img = np.zeros((height, width), dtype=np.uint8)
    zbuf = np.full((height, width), np.inf, dtype=np.float64)
    valid = np.zeros((height, width), dtype=np.uint8)
    center = np.zeros((height, width), dtype=np.uint8)
    zmin = np.full((height, width), np.inf, dtype=np.float64)
    sums = np.zeros((height, width), dtype=np.float64)
    cnts = np.zeros((height, width), dtype=np.float64)

    cdef cnp.uint8_t[:, ::1] img_v = img
    cdef cnp.float64_t[:, ::1] z_v = zbuf
    cdef cnp.uint8_t[:, ::1] val_v = valid
    cdef cnp.uint8_t[:, ::1] cen_v = center
    cdef cnp.float64_t[:, ::1] zmin_v = zmin
    cdef cnp.float64_t[:, ::1] sum_v = sums
    cdef cnp.float64_t[:, ::1] cnt_v = cnts

    cdef Py_ssize_t i, n = us.shape[0]
    cdef long u0, v0, u, v
    cdef int du, dv, r, c
    cdef double z, gray
    cdef double factor = 1.0 + z_band

    # stage 1, pass A: per-pixel nearest depth among center hits
    for i in range(n):
        u0 = us[i]
        v0 = vs[i]
        if u0 < 0 or u0 >= width or v0 < 0 or v0 >= height:
            continue
        z = depth[i]
        if z < zmin_v[v0, u0]:
            zmin_v[v0, u0] = z

    # stage 1, pass B: average candidates within the band
    for i in range(n):
        u0 = us[i]
        v0 = vs[i]
        if u0 < 0 or u0 >= width or v0 < 0 or v0 >= height:
            continue
        z = depth[i]
        if z <= zmin_v[v0, u0] * factor:
            sum_v[v0, u0] += <double><cnp.uint8_t>(intens[i] + 0.5)
            cnt_v[v0, u0] += 1.0

    for r in range(height):
        for c in range(width):
            if cnt_v[r, c] > 0.0:
                img_v[r, c] = <cnp.uint8_t>(sum_v[r, c] / cnt_v[r, c] + 0.5)
                z_v[r, c] = zmin_v[r, c]
                val_v[r, c] = 1
                cen_v[r, c] = 1

    if splat > 0:
        # stage 2: fill pixels without a center hit from splat footprints
        for r in range(height):
            for c in range(width):
                zmin_v[r, c] = INFINITY
                sum_v[r, c] = 0.0
                cnt_v[r, c] = 0.0
        for i in range(n):
            z = depth[i]
            u0 = us[i]
            v0 = vs[i]
            for dv in range(-splat, splat + 1):
                v = v0 + dv
                if v < 0 or v >= height:
                    continue
                for du in range(-splat, splat + 1):
                    u = u0 + du
                    if u < 0 or u >= width:
                        continue
                    if cen_v[v, u]:
                        continue
                    if z < zmin_v[v, u]:
                        zmin_v[v, u] = z
        for i in range(n):
            z = depth[i]
            u0 = us[i]
            v0 = vs[i]
            gray = <double><cnp.uint8_t>(intens[i] + 0.5)
            for dv in range(-splat, splat + 1):
                v = v0 + dv
                if v < 0 or v >= height:
                    continue
                for du in range(-splat, splat + 1):
                    u = u0 + du
                    if u < 0 or u >= width:
                        continue
                    if cen_v[v, u]:
                        continue
                    if z <= zmin_v[v, u] * factor:
                        sum_v[v, u] += gray
                        cnt_v[v, u] += 1.0
        for r in range(height):
            for c in range(width):
                if cnt_v[r, c] > 0.0 and not cen_v[r, c]:
                    img_v[r, c] = <cnp.uint8_t>(sum_v[r, c] / cnt_v[r, c] + 0.5)
                    z_v[r, c] = zmin_v[r, c]
                    val_v[r, c] = 1

    return img, zbuf, valid.view(bool)


def accumulate_votes(cnp.float64_t[:, ::1] centers not None,
                     cnp.float64_t[:, ::1] directions not None,
                     double u0, double v0, int w, int h,
                     double rho1_deg, double cap):
    """Sum per-segment vanishing-point votes over a w x h cell grid.

    Cell (r, c) sits at pixel (u0 + c, v0 + r).  Each segment votes
    min(1/alpha, cap) when the angle alpha (degrees) between its direction
    and the center-to-cell line is at most rho1_deg, else 0.
    """
    acc = np.zeros((h, w), dtype=np.float64)
    cos_grid = np.empty((h, w), dtype=np.float64)
    alpha_grid = np.empty((h, w), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] acc_v = acc
    cdef cnp.float64_t[:, ::1] cos_v = cos_grid
    cdef cnp.float64_t[:, ::1] alpha_v = alpha_grid
    cdef Py_ssize_t i, n = centers.shape[0]
    cdef int r, c
    cdef double px, py, dx, dy, norm, cosang, alpha, wgt

    for i in range(n):
        dx = directions[i, 0]
        dy = directions[i, 1]
        for r in range(h):
            for c in range(w):
                px = u0 + c - centers[i, 0]
                py = v0 + r - centers[i, 1]
                norm = sqrt(px * px + py * py)
                if norm == 0.0:
                    cos_v[r, c] = 1.0
                    continue
                cosang = fabs((px * dx + py * dy) / norm)
                if cosang > 1.0:
                    cosang = 1.0
                cos_v[r, c] = cosang
        # the arccos ufunc keeps results bitwise identical to the fallback
        np.arccos(cos_grid, out=alpha_grid)
        for r in range(h):
            for c in range(w):
                alpha = alpha_v[r, c] * RAD2DEG
                if alpha <= rho1_deg:
                    wgt = 1.0 / alpha if alpha > 1.0 / cap else cap
                    if wgt > cap:
                        wgt = cap
                    acc_v[r, c] += wgt

    return acc
