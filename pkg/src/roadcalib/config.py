"""Flat key=value configuration with documented defaults.

Unknown keys are rejected so a typo in a config file fails loudly instead of
silently running with defaults.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict[str, object] = {
    # global
    "seed": 0,
    # cost weights (Eq.-style weighted sum)
    "weights.k1": 2.0,
    "weights.k2": 500.0,
    "weights.k3": 0.1,
    # NID
    "nid.bins": 32,
    "nid.min_covalid": 1000,
    # Canny
    "canny.sigma": 1.4,
    "canny.low": 40.0,
    "canny.high": 100.0,
    # edge cost: normalize by LiDAR edge pixel count or keep the raw sum
    "edge.normalize": "count",
    # plane cost: "abs" = mean absolute residual, "signed" = literal signed sum
    "plane.residual": "abs",
    "plane.tau": 0.05,
    "plane.min_points": 500,
    # region growing road segmentation
    "region.k": 12,
    "region.theta_smooth_deg": 10.0,
    "region.tau_seed": 0.1,
    "region.max_points": 20000,
    # stereo block matching
    "stereo.window": 9,
    "stereo.max_disp": 128,
    "stereo.lr_tol": 1.0,
    # v-disparity road line RANSAC
    "vline.iters": 500,
    "vline.thresh": 1.0,
    "vline.min_inlier_frac": 0.3,
    # road mask membership tolerance (disparity bins)
    "road.tau": 2.0,
    # image selection
    "select.k": 5,
    "select.min_seg_len": 20,
    "select.max_gap": 3,
    "vote.rho1_deg": 3.0,
    "vote.cap": 10.0,
    # local map
    "map.window_m": 80.0,
    "render.splat": 1,
    # per-frame map crop (vehicle frame, meters)
    "crop.ahead_m": 45.0,
    "crop.behind_m": 2.0,
    "crop.lateral_m": 12.0,
    "crop.height_m": 3.0,
    # optimizer
    "opt.f_tol": 1e-6,
    "opt.x_tol_t": 1e-4,
    "opt.x_tol_r_deg": 0.01,
    "opt.max_iter": 2000,
    "opt.restart": True,
    "opt.step_t": 0.1,
    "opt.step_r_deg": 1.0,
    # repeatability harness
    "repeat.runs": 40,
    "repeat.perturb_t": 0.3,
    "repeat.perturb_r_deg": 3.0,
}


def _cast(key: str, raw: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


class Config:
    """Immutable-ish view over DEFAULTS with overrides."""

    def __init__(self, overrides: dict[str, object] | None = None):
        self._values = dict(DEFAULTS)
        if overrides:
            for key, value in overrides.items():
                if key not in DEFAULTS:
                    raise ConfigError(f"unknown config key {key!r}")
                self._values[key] = value

    @classmethod
    def from_file(cls, path) -> "Config":
        overrides: dict[str, object] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = _cast(key, raw)
        return cls(overrides)

    def __getitem__(self, key: str):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key {key!r}") from None

    def with_overrides(self, **pairs) -> "Config":
        merged = {k: v for k, v in self._values.items() if DEFAULTS[k] != v}
        merged.update({k.replace("__", "."): v for k, v in pairs.items()})
        return Config(merged)

    def as_dict(self) -> dict[str, object]:
        return dict(self._values)
