import numpy as np
import pytest

from roadcalib import dataio
from roadcalib.errors import DatasetError
from roadcalib.geometry import CameraIntrinsics, IntensityCloud, Pose6, normalize_angle


def test_ply_round_trip(tmp_path, rng):
    pts = rng.uniform(-10, 10, (50, 3))
    inten = rng.integers(0, 256, 50).astype(float)
    cloud = IntensityCloud("lidar0", pts, inten)
    path = tmp_path / "scan.ply"
    dataio.write_ply(path, cloud)
    back = dataio.read_ply(path, frame="lidar0")
    assert back.frame == "lidar0"
    assert np.abs(back.points - pts).max() < 1e-5
    assert np.array_equal(back.intensity, inten)


def test_ply_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("not a ply\n")
    with pytest.raises(DatasetError):
        dataio.read_ply(path)


def test_pgm_8bit_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (30, 40)).astype(np.uint8)
    path = tmp_path / "img.pgm"
    dataio.write_pgm(path, img)
    assert np.array_equal(dataio.read_pgm(path), img)


def test_pgm_16bit_round_trip(tmp_path, rng):
    img = rng.integers(0, 65536, (12, 9)).astype(np.uint16)
    path = tmp_path / "disp.pgm"
    dataio.write_pgm(path, img)
    back = dataio.read_pgm(path)
    assert back.dtype == np.uint16
    assert np.array_equal(back, img)


def test_ppm_round_trip(tmp_path, rng):
    rgb = rng.integers(0, 256, (8, 10, 3)).astype(np.uint8)
    path = tmp_path / "overlay.ppm"
    dataio.write_ppm(path, rgb)
    assert np.array_equal(dataio.read_ppm(path), rgb)


def test_disparity_pgm_requires_16bit(tmp_path):
    path = tmp_path / "disp8.pgm"
    dataio.write_pgm(path, np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(DatasetError):
        dataio.read_disparity_pgm(path)


def test_trajectory_round_trip(tmp_path):
    samples = [(0.0, Pose6(0, 0, 0)), (0.5, Pose6(1, 0, 0, 0.1, 0, 0.2)),
               (1.0, Pose6(2, 0.1, 0, 0, 0, 0.3))]
    path = tmp_path / "trajectory.csv"
    dataio.write_trajectory(path, samples)
    back = dataio.read_trajectory(path)
    assert len(back) == 3
    for (t0, p0), (t1, p1) in zip(samples, back):
        assert t0 == pytest.approx(t1)
        assert np.allclose(p0.as_vector(), p1.as_vector())


def test_trajectory_requires_increasing_timestamps(tmp_path):
    path = tmp_path / "trajectory.csv"
    dataio.write_trajectory(path, [(1.0, Pose6()), (1.0, Pose6())])
    with pytest.raises(DatasetError):
        dataio.read_trajectory(path)


def test_lidar_extrinsics_round_trip(tmp_path):
    poses = {0: Pose6(0, 0.8, 1.8, 0, 0, np.pi / 2), 3: Pose6(-1.5, 0, 1.7, 0, 0.9, np.pi)}
    path = tmp_path / "lidar_extrinsics.txt"
    dataio.write_lidar_extrinsics(path, poses)
    back = dataio.read_lidar_extrinsics(path)
    assert set(back) == {0, 3}
    for sid in poses:
        diff = back[sid].as_vector() - poses[sid].as_vector()
        diff[3:] = normalize_angle(diff[3:])  # pi can round-trip to -pi
        assert np.abs(diff).max() < 1e-8


def test_intrinsics_round_trip(tmp_path):
    k = CameraIntrinsics(320.0, 160.0, 120.0, 0.475, 320, 240)
    path = tmp_path / "intrinsics.txt"
    dataio.write_intrinsics(path, k)
    assert dataio.read_intrinsics(path) == k


def test_result_round_trip(tmp_path):
    pose = Pose6(1.2, 0.24, 1.25, -np.pi / 2, 0.0, -np.pi / 2)
    path = tmp_path / "result.txt"
    dataio.write_result(path, pose, cost=12.5, iters=101, converged=True)
    back, cost, converged = dataio.read_result(path)
    assert np.allclose(back.as_vector(), pose.as_vector())
    assert cost == pytest.approx(12.5)
    assert converged


def test_scan_and_image_listing(tmp_path):
    scans = tmp_path / "scans"
    scans.mkdir()
    cloud = IntensityCloud("x", np.zeros((1, 3)), [1.0])
    dataio.write_ply(scans / dataio.scan_filename(1, 0.2), cloud)
    dataio.write_ply(scans / dataio.scan_filename(0, 0.2), cloud)
    dataio.write_ply(scans / dataio.scan_filename(0, 0.1), cloud)
    entries = dataio.list_scans(scans)
    assert [(sid, round(ts, 6)) for sid, ts, _ in entries] == [(0, 0.1), (0, 0.2), (1, 0.2)]

    images = tmp_path / "images"
    images.mkdir()
    img = np.zeros((2, 2), dtype=np.uint8)
    dataio.write_pgm(images / dataio.image_filename("left", 1.0), img)
    dataio.write_pgm(images / dataio.image_filename("right", 1.0), img)
    dataio.write_pgm(images / dataio.image_filename("left", 0.5), img)
    lefts = dataio.list_images(images, "left")
    assert [round(t, 6) for t, _ in lefts] == [0.5, 1.0]
    # "right" must not match "right2" files
    dataio.write_pgm(images / dataio.image_filename("right2", 1.0), img)
    rights = dataio.list_images(images, "right")
    assert len(rights) == 1
