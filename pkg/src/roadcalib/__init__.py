"""roadcalib: camera-to-vehicle extrinsic calibration from road markings.

Estimates the 6-DoF pose of a stereo camera on a vehicle whose LiDARs share
no field of view with it, by aligning an intensity point-cloud map accumulated
from odometry against road markings seen in informative stereo frames.
"""

from .config import Config
from .costs import CostBreakdown, CostWeights, frame_cost, total_cost
from .errors import (
    ConfigError,
    DatasetError,
    NoPlaneError,
    NoRoadError,
    NoRoadPointsError,
    RoadCalibError,
)
from .geometry import CameraIntrinsics, IntensityCloud, Pose6, RigidTransform
from .optimizer import (
    CalibrationResult,
    calibrate,
    optimize_extrinsic,
    pose_error,
    repeatability,
    sweep,
)
from .pipeline import Dataset, analyze_images, build_map, load_dataset, prepare_frames, select_frames

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CalibrationResult",
    "Config",
    "ConfigError",
    "CostBreakdown",
    "CostWeights",
    "Dataset",
    "DatasetError",
    "IntensityCloud",
    "NoPlaneError",
    "NoRoadError",
    "NoRoadPointsError",
    "Pose6",
    "RigidTransform",
    "RoadCalibError",
    "analyze_images",
    "build_map",
    "calibrate",
    "frame_cost",
    "load_dataset",
    "optimize_extrinsic",
    "pose_error",
    "prepare_frames",
    "repeatability",
    "select_frames",
    "sweep",
    "total_cost",
    "__version__",
]
