import numpy as np
import pytest
from click.testing import CliRunner

from roadcalib import dataio
from roadcalib.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="session")
def fast_config(tmp_path_factory):
    """Config that makes the optimizer nearly free for CLI smoke tests."""
    path = tmp_path_factory.mktemp("cfg") / "fast.txt"
    path.write_text("opt.max_iter=3\nopt.restart=false\nselect.k=2\n")
    return path


def test_generate_tiny_dataset(runner, tmp_path):
    spec = tmp_path / "scene.txt"
    spec.write_text("trajectory_length=10\nlidar_rate=2\ntraj_rate=10\n")
    out = tmp_path / "data"
    result = runner.invoke(main, ["generate", "--out", str(out), "--preset", "compact",
                                  "--spec", str(spec), "--noise", "0", "--seed", "1"])
    assert result.exit_code == 0, result.output
    assert (out / "trajectory.csv").exists()
    assert (out / "truth.txt").exists()
    assert (out / "truth_right.txt").exists()
    assert len(list((out / "scans").glob("*.ply"))) == 11 * 4
    assert len(list((out / "images").glob("left_*.pgm"))) == 3


def test_select_ranks_frames(runner, compact_dataset_dir, tmp_path):
    csv = tmp_path / "utility.csv"
    result = runner.invoke(main, ["select", "--data", str(compact_dataset_dir),
                                  "-k", "3", "--out", str(csv)])
    assert result.exit_code == 0, result.output
    assert len(result.output.strip().splitlines()) == 3
    assert csv.exists()
    assert "u_i" in result.output


def test_calibrate_smoke(runner, compact_dataset_dir, fast_config, tmp_path):
    out = tmp_path / "result.txt"
    result = runner.invoke(main, [
        "calibrate", "--data", str(compact_dataset_dir),
        "--config", str(fast_config),
        "--init", "1.2,0.24,1.25,-90,0,-90",
        "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    pose, cost, _ = dataio.read_result(out)
    assert np.isfinite(cost)
    assert "estimate:" in result.output
    # a 3-iteration budget cannot wander far from the initial pose
    assert abs(pose.tx - 1.2) < 0.5


def test_calibrate_without_init_uses_dataset_nominal(runner, compact_dataset_dir, fast_config):
    result = runner.invoke(main, ["calibrate", "--data", str(compact_dataset_dir),
                                  "--config", str(fast_config)])
    assert result.exit_code == 0, result.output


def test_sweep_writes_csv(runner, compact_dataset_dir, fast_config, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(main, [
        "sweep", "--data", str(compact_dataset_dir), "--config", str(fast_config),
        "--param", "tz", "--lo", "-0.1", "--hi", "0.1", "--steps", "3",
        "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == "param,offset,f_edge,f_nid,f_plane,f_sum"
    assert len(lines) == 4
    offsets = [float(l.split(",")[1]) for l in lines[1:]]
    assert offsets == pytest.approx([-0.1, 0.0, 0.1])
    # the exact dataset has its minimum at the true pose
    sums = [float(l.split(",")[5]) for l in lines[1:]]
    assert np.argmin(sums) == 1


def test_sweep_unknown_frame_id(runner, compact_dataset_dir, tmp_path):
    result = runner.invoke(main, [
        "sweep", "--data", str(compact_dataset_dir), "--param", "tx",
        "--lo", "-0.1", "--hi", "0.1", "--steps", "3",
        "--frame-id", "nope", "--out", str(tmp_path / "s.csv"),
    ])
    assert result.exit_code != 0
    assert "unknown frame ids" in result.output


def test_repeat_smoke(runner, compact_dataset_dir, fast_config, tmp_path):
    out = tmp_path / "repeat.csv"
    result = runner.invoke(main, [
        "repeat", "--data", str(compact_dataset_dir), "--config", str(fast_config),
        "--runs", "1", "--image-counts", "1", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert out.exists()
    assert (tmp_path / "repeat_summary.csv").exists()
    assert "K=1 median" in result.output


def test_project_overlay(runner, compact_dataset_dir, tmp_path):
    out = tmp_path / "overlay.ppm"
    result = runner.invoke(main, ["project", "--data", str(compact_dataset_dir),
                                  "--frame", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rgb = dataio.read_ppm(out)
    assert rgb.ndim == 3 and rgb.shape[2] == 3
    assert "projected pixels" in result.output


def test_project_frame_out_of_range(runner, compact_dataset_dir, tmp_path):
    result = runner.invoke(main, ["project", "--data", str(compact_dataset_dir),
                                  "--frame", "999", "--out", str(tmp_path / "o.ppm")])
    assert result.exit_code != 0
    assert "out of range" in result.output


def test_bad_init_string(runner, compact_dataset_dir):
    result = runner.invoke(main, ["calibrate", "--data", str(compact_dataset_dir),
                                  "--init", "1,2,3"])
    assert result.exit_code != 0
