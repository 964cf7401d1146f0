"""Exception types shared across the calibration pipeline."""


class RoadCalibError(Exception):
    """Base class for all pipeline errors."""


class NoRoadError(RoadCalibError):
    """Road line / road mask could not be extracted from an image."""


class NoPlaneError(RoadCalibError):
    """Too few points to fit the road plane."""


class NoRoadPointsError(RoadCalibError):
    """Region growing produced no road points."""


class DatasetError(RoadCalibError):
    """Dataset directory is missing files or they are inconsistent."""


class ConfigError(RoadCalibError):
    """Unknown or malformed configuration key."""
