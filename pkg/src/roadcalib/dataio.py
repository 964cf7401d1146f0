"""Dataset file formats: ASCII PLY scans, PGM/PPM rasters, CSV, key=value.

Layout of a dataset directory:

* ``trajectory.csv`` -- ``timestamp_s,tx,ty,tz,rx,ry,rz`` (radians)
* ``lidar_extrinsics.txt`` -- ``lidar<id>.tx=...`` .. ``lidar<id>.rz=...``
* ``intrinsics.txt`` -- ``f= cu= cv= b= width= height=``
* ``scans/scan_<sensorid>_<timestamp_ns>.ply`` -- x y z intensity vertices
* ``images/left_<timestamp_ns>.pgm`` (+ right_, right2_) -- 8-bit P5
* ``truth.txt`` / ``truth_right.txt`` -- calibration result format
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .geometry import CameraIntrinsics, IntensityCloud, Pose6

# ---------------------------------------------------------------------------
# PLY


def write_ply(path, cloud: IntensityCloud) -> None:
    n = len(cloud)
    with open(path, "w") as fh:
        fh.write(
            "ply\nformat ascii 1.0\n"
            f"element vertex {n}\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar intensity\nend_header\n"
        )
        inten = np.clip(np.rint(cloud.intensity), 0, 255).astype(int)
        for (x, y, z), i in zip(cloud.points, inten):
            fh.write(f"{x:.6f} {y:.6f} {z:.6f} {i}\n")


def read_ply(path, frame: str = "") -> IntensityCloud:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise DatasetError(f"{path}: not a PLY file")
    n = None
    body_start = None
    for i, line in enumerate(lines):
        m = re.match(r"element vertex (\d+)", line.strip())
        if m:
            n = int(m.group(1))
        if line.strip() == "end_header":
            body_start = i + 1
            break
    if n is None or body_start is None:
        raise DatasetError(f"{path}: malformed PLY header")
    data = np.loadtxt(lines[body_start : body_start + n], dtype=np.float64, ndmin=2)
    if data.shape != (n, 4):
        raise DatasetError(f"{path}: expected {n} x-y-z-intensity rows")
    return IntensityCloud(frame, data[:, :3], data[:, 3])


# ---------------------------------------------------------------------------
# PGM / PPM


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit P5, or 16-bit big-endian P5 for uint16 input."""
    image = np.asarray(image)
    h, w = image.shape
    if image.dtype == np.uint16:
        header = f"P5\n{w} {h}\n65535\n".encode()
        payload = image.astype(">u2").tobytes()
    else:
        header = f"P5\n{w} {h}\n255\n".encode()
        payload = image.astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if not m:
        raise DatasetError(f"{path}: not a binary PGM")
    w, h, maxval = (int(x) for x in m.groups())
    body = raw[m.end() :]
    if maxval > 255:
        img = np.frombuffer(body, dtype=">u2", count=w * h).reshape(h, w)
        return img.astype(np.uint16)
    return np.frombuffer(body, dtype=np.uint8, count=w * h).reshape(h, w).copy()


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + rgb.astype(np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if not m:
        raise DatasetError(f"{path}: not a binary PPM")
    w, h, _ = (int(x) for x in m.groups())
    return np.frombuffer(raw[m.end() :], dtype=np.uint8, count=w * h * 3).reshape(h, w, 3).copy()


def write_disparity_pgm(path, disp_fixed: np.ndarray) -> None:
    """Disparity raster as 16-bit PGM; values are disparity*16, 0 invalid."""
    write_pgm(path, disp_fixed.astype(np.uint16))


def read_disparity_pgm(path) -> np.ndarray:
    img = read_pgm(path)
    if img.dtype != np.uint16:
        raise DatasetError(f"{path}: disparity PGM must be 16-bit")
    return img


# ---------------------------------------------------------------------------
# trajectory CSV

TRAJECTORY_FIELDS = ["timestamp_s", "tx", "ty", "tz", "rx", "ry", "rz"]


def write_trajectory(path, samples) -> None:
    """samples: iterable of (timestamp_s, Pose6)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_FIELDS)
        for ts, pose in samples:
            writer.writerow(
                [f"{ts:.9f}"] + [f"{v:.9f}" for v in pose.as_vector()]
            )


def read_trajectory(path):
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_FIELDS:
            raise DatasetError(f"{path}: bad trajectory header {header}")
        for row in reader:
            ts = float(row[0])
            samples.append((ts, Pose6.from_vector([float(v) for v in row[1:7]])))
    if not samples:
        raise DatasetError(f"{path}: empty trajectory")
    times = [ts for ts, _ in samples]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DatasetError(f"{path}: timestamps not strictly increasing")
    return samples


# ---------------------------------------------------------------------------
# key=value files


def write_keyvalues(path, pairs: dict) -> None:
    with open(path, "w") as fh:
        for key, value in pairs.items():
            fh.write(f"{key}={value}\n")


def read_keyvalues(path) -> dict[str, str]:
    pairs = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetError(f"{path}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def write_lidar_extrinsics(path, extrinsics: dict[int, Pose6]) -> None:
    pairs = {}
    for sensor_id, pose in sorted(extrinsics.items()):
        for name, value in zip(("tx", "ty", "tz", "rx", "ry", "rz"), pose.as_vector()):
            pairs[f"lidar{sensor_id}.{name}"] = f"{value:.9f}"
    write_keyvalues(path, pairs)


def read_lidar_extrinsics(path) -> dict[int, Pose6]:
    pairs = read_keyvalues(path)
    by_id: dict[int, dict[str, float]] = {}
    for key, value in pairs.items():
        m = re.match(r"lidar(\d+)\.(tx|ty|tz|rx|ry|rz)$", key)
        if not m:
            raise DatasetError(f"{path}: unexpected key {key!r}")
        by_id.setdefault(int(m.group(1)), {})[m.group(2)] = float(value)
    out = {}
    for sensor_id, fields in by_id.items():
        if len(fields) != 6:
            raise DatasetError(f"{path}: incomplete extrinsic for lidar{sensor_id}")
        out[sensor_id] = Pose6(**fields)
    return out


def write_intrinsics(path, k: CameraIntrinsics) -> None:
    write_keyvalues(
        path,
        {
            "f": f"{k.f:.9f}",
            "cu": f"{k.cu:.9f}",
            "cv": f"{k.cv:.9f}",
            "b": f"{k.b:.9f}",
            "width": k.width,
            "height": k.height,
        },
    )


def read_intrinsics(path) -> CameraIntrinsics:
    pairs = read_keyvalues(path)
    try:
        return CameraIntrinsics(
            f=float(pairs["f"]),
            cu=float(pairs["cu"]),
            cv=float(pairs["cv"]),
            b=float(pairs["b"]),
            width=int(pairs["width"]),
            height=int(pairs["height"]),
        )
    except KeyError as exc:
        raise DatasetError(f"{path}: missing intrinsics key {exc}") from None


# ---------------------------------------------------------------------------
# calibration result format (also used for truth files)


def write_result(path, pose: Pose6, cost: float = 0.0, iters: int = 0, converged: bool = True) -> None:
    write_keyvalues(
        path,
        {
            "tx": f"{pose.tx:.9f}",
            "ty": f"{pose.ty:.9f}",
            "tz": f"{pose.tz:.9f}",
            "rx_deg": f"{np.degrees(pose.rx):.9f}",
            "ry_deg": f"{np.degrees(pose.ry):.9f}",
            "rz_deg": f"{np.degrees(pose.rz):.9f}",
            "cost": f"{cost:.9f}",
            "iters": iters,
            "converged": str(converged).lower(),
        },
    )


def read_result(path):
    pairs = read_keyvalues(path)
    pose = Pose6(
        float(pairs["tx"]),
        float(pairs["ty"]),
        float(pairs["tz"]),
        np.radians(float(pairs["rx_deg"])),
        np.radians(float(pairs["ry_deg"])),
        np.radians(float(pairs["rz_deg"])),
    )
    return pose, float(pairs.get("cost", "nan")), pairs.get("converged", "true") == "true"


# ---------------------------------------------------------------------------
# scan / image file naming

SCAN_RE = re.compile(r"scan_(\d+)_(\d+)\.ply$")
IMAGE_RE = re.compile(r"(left|right|right2)_(\d+)\.pgm$")


def scan_filename(sensor_id: int, timestamp_s: float) -> str:
    return f"scan_{sensor_id}_{int(round(timestamp_s * 1e9))}.ply"


def image_filename(camera: str, timestamp_s: float) -> str:
    return f"{camera}_{int(round(timestamp_s * 1e9))}.pgm"


def list_scans(scan_dir):
    """Yield (sensor_id, timestamp_s, path), ordered by (timestamp, sensor)."""
    entries = []
    for path in sorted(Path(scan_dir).glob("scan_*.ply")):
        m = SCAN_RE.search(path.name)
        if m:
            entries.append((int(m.group(1)), int(m.group(2)) * 1e-9, path))
    entries.sort(key=lambda e: (e[1], e[0]))
    return entries


def list_images(image_dir, camera: str = "left"):
    """Yield (timestamp_s, path) for one camera, ordered by timestamp."""
    entries = []
    for path in sorted(Path(image_dir).glob(f"{camera}_*.pgm")):
        m = IMAGE_RE.search(path.name)
        if m and m.group(1) == camera:
            entries.append((int(m.group(2)) * 1e-9, path))
    entries.sort(key=lambda e: e[0])
    return entries
