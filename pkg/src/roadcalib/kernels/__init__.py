"""Hot-kernel dispatch: compiled Cython core when built, numpy otherwise."""

from __future__ import annotations

import numpy as np

from . import numpy_backend

try:
    from . import _core  # type: ignore[attr-defined]

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    _core = None
    BACKEND = "numpy"


def get_backend(name: str):
    """Return a backend module by name ('compiled' or 'numpy')."""
    if name == "numpy":
        return numpy_backend
    if name == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernel extension is not built")
        return _core
    raise ValueError(f"unknown backend {name!r}")


def render_zbuffer(us, vs, depth, intens, height, width, splat, z_band=0.05, backend=None):
    """Splat points (pixel-center integer coords) with band-averaged z-buffering."""
    mod = get_backend(backend) if backend else (_core or numpy_backend)
    us = np.ascontiguousarray(us, dtype=np.int64)
    vs = np.ascontiguousarray(vs, dtype=np.int64)
    depth = np.ascontiguousarray(depth, dtype=np.float64)
    intens = np.ascontiguousarray(intens, dtype=np.float64)
    return mod.render_zbuffer(us, vs, depth, intens, int(height), int(width),
                              int(splat), float(z_band))


def accumulate_votes(centers, directions, u0, v0, w, h, rho1_deg, cap, backend=None):
    """Accumulate vanishing-point votes over a cell grid."""
    mod = get_backend(backend) if backend else (_core or numpy_backend)
    centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2)
    directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 2)
    return mod.accumulate_votes(
        centers, directions, float(u0), float(v0), int(w), int(h), float(rho1_deg), float(cap)
    )
