import dataclasses

import numpy as np
import pytest

from roadcalib import synthetic
from roadcalib.geometry import Pose6, inverse, pose_to_transform
from roadcalib.synthetic import (
    SceneSpec,
    compact_scene,
    default_scene,
    ground_intensity,
    render_image,
    render_scan,
    spec_with_overrides,
    trace,
    truth,
    vehicle_pose,
)


def test_truth_right_is_baseline_shifted():
    spec = default_scene()
    left = truth(spec, "left")
    right = truth(spec, "right")
    # the camera x axis points along vehicle -y for the standard mounting
    assert left.ty - right.ty == pytest.approx(spec.intrinsics.b, abs=1e-9)
    assert left.tx == pytest.approx(right.tx, abs=1e-9)
    assert left.tz == pytest.approx(right.tz, abs=1e-9)
    assert np.allclose(left.angles, right.angles, atol=1e-9)
    with pytest.raises(ValueError):
        truth(spec, "bogus")


def test_vehicle_pose_straight_line():
    spec = default_scene()
    p = vehicle_pose(spec, 3.0)
    assert np.allclose(p.as_vector(), [3.0 * spec.speed, 0, 0, 0, 0, 0])


def test_ground_intensity_classifies_regions():
    spec = default_scene()
    # lane line at y = 3, asphalt in a dash-off stretch, off-road far out
    lane = ground_intensity(spec, np.array([10.0]), np.array([3.0]))[0]
    # center dash: on for x mod 6 < 3
    dash_on = ground_intensity(spec, np.array([1.0]), np.array([0.0]))[0]
    dash_off = ground_intensity(spec, np.array([4.0]), np.array([0.0]))[0]
    offroad = ground_intensity(spec, np.array([10.0]), np.array([10.0]))[0]
    amp = spec.texture_amp
    assert abs(lane - spec.marking_intensity) <= amp
    assert abs(dash_on - spec.marking_intensity) <= amp
    assert abs(dash_off - spec.asphalt_intensity) <= amp
    assert abs(offroad - spec.offroad_intensity) <= amp


def test_ground_intensity_crosswalk_bars():
    spec = default_scene()
    x0 = spec.crosswalk_x[0]
    xs = np.full(50, x0 + 1.0)
    ys = np.linspace(-3.5, 3.5, 50)
    vals = ground_intensity(spec, xs, ys)
    bright = vals > 150
    assert bright.any() and (~bright).any()  # alternating bars


def test_trace_ground_distance():
    spec = default_scene()
    origins = np.array([[0.0, 0.0, 2.0]])
    dirs = np.array([[0.0, 0.0, -1.0]])
    t, intensity, hit = trace(spec, origins, dirs)
    assert hit[0] and t[0] == pytest.approx(2.0)


def test_trace_box_occludes_ground():
    spec = default_scene()
    box = spec.boxes[0]
    # horizontal ray at box mid-height from before the box
    origins = np.array([[box.center[0] - 10.0, box.center[1], box.center[2]]])
    dirs = np.array([[1.0, 0.0, 0.0]])
    t, intensity, hit = trace(spec, origins, dirs)
    assert hit[0]
    assert t[0] == pytest.approx(10.0 - box.size[0] / 2.0)
    assert abs(intensity[0] - box.intensity) <= spec.texture_amp


def test_trace_sky_miss():
    spec = default_scene()
    t, intensity, hit = trace(spec, np.array([[0.0, 0.0, 2.0]]),
                              np.array([[0.0, 0.0, 1.0]]))
    assert not hit[0]
    assert intensity[0] == spec.sky_intensity


def test_render_scan_deterministic_and_ranged():
    spec = compact_scene(noise=1.0)
    a = render_scan(spec, 0, 3.0, np.random.default_rng(7))
    b = render_scan(spec, 0, 3.0, np.random.default_rng(7))
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.intensity, b.intensity)
    assert len(a) > 0
    ranges = np.linalg.norm(a.points, axis=1)
    assert ranges.max() <= spec.lidar_range + 5 * spec.range_sigma
    assert a.intensity.min() >= 0.0 and a.intensity.max() <= 255.0


def test_render_image_deterministic():
    spec = compact_scene()
    a = render_image(spec, 2.0, "left", np.random.default_rng(0))
    b = render_image(spec, 2.0, "left", np.random.default_rng(1))  # no noise: rng unused
    assert a.dtype == np.uint8
    assert np.array_equal(a, b)
    # sky above, road below
    assert (a[:20] == int(spec.sky_intensity)).mean() > 0.9
    assert a[-20:].mean() > spec.sky_intensity


def test_lidars_share_no_fov_with_camera():
    spec = default_scene()
    k = spec.intrinsics
    cam = pose_to_transform(truth(spec, "left"))
    rng = np.random.default_rng(0)
    for t in (0.0, 10.0, 35.0):
        vehicle = pose_to_transform(vehicle_pose(spec, t))
        for sensor_id, model in spec.lidars.items():
            cloud = render_scan(spec, sensor_id, t, rng)
            sensor = pose_to_transform(model.pose)
            # sensor frame -> vehicle frame -> camera frame
            pts_v = sensor.apply_points(cloud.points)
            pts_c = inverse(cam).apply_points(pts_v)
            z = pts_c[:, 2]
            front = z > 0.1
            u = k.f * pts_c[front, 0] / z[front] + k.cu
            v = k.f * pts_c[front, 1] / z[front] + k.cv
            visible = (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
            assert visible.sum() == 0, f"lidar {sensor_id} visible at t={t}"


def test_spec_with_overrides_types():
    spec = default_scene()
    out = spec_with_overrides(spec, {
        "speed": "3.5",
        "crosswalk_x": "10,20,30",
        "trajectory_length": "60",
    })
    assert out.speed == 3.5
    assert out.crosswalk_x == (10.0, 20.0, 30.0)
    assert out.trajectory_length == 60.0
    with pytest.raises(ValueError):
        spec_with_overrides(spec, {"warp_drive": "1"})
    with pytest.raises(ValueError):
        spec_with_overrides(spec, {"camera_pose": "nope"})


def test_scaled_noise():
    spec = compact_scene(noise=1.0)
    quiet = spec.scaled_noise(0.0)
    assert quiet.range_sigma == 0.0
    assert quiet.intensity_sigma == 0.0
    assert quiet.image_sigma == 0.0
    doubled = spec.scaled_noise(2.0)
    assert doubled.range_sigma == pytest.approx(2 * spec.range_sigma)


def test_degenerate_scene_rejected(tmp_path):
    # identity mounting points the camera straight up: sky only
    spec = dataclasses.replace(compact_scene(), camera_pose=Pose6(1.2, 0.0, 1.25))
    with pytest.raises(ValueError, match="degenerate"):
        synthetic.render_dataset(spec, tmp_path / "bad", seed=0)


def test_duration():
    spec = SceneSpec(trajectory_length=40.0, speed=2.0)
    assert spec.duration() == 20.0
