"""Command line interface: dataset generation, frame selection, calibration,
cost sweeps, repeatability experiments and projection overlays."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import dataio, synthetic
from .config import Config
from .errors import RoadCalibError
from .geometry import IntensityCloud, Pose6, inverse, pose_to_transform
from .localmap import pose_at, render_intensity_image
from .optimizer import (
    PARAM_NAMES,
    calibrate,
    repeatability,
    sweep,
    write_repeatability_csv,
    write_repeatability_summary,
    write_sweep_csv,
)
from .pipeline import (
    analyze_images,
    build_map,
    load_dataset,
    prepare_frames,
    select_frames,
    write_utility_csv,
)

log = logging.getLogger(__name__)

PRESETS = {"default": synthetic.default_scene, "compact": synthetic.compact_scene}


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _load_config(config_path, seed) -> Config:
    cfg = Config.from_file(config_path) if config_path else Config()
    if seed is not None:
        cfg = cfg.with_overrides(seed=seed)
    return cfg


def _parse_init(init: str | None, data_dir: Path) -> Pose6:
    """Initial pose from 'tx,ty,tz,rx_deg,ry_deg,rz_deg' or the dataset's
    nominal mounting file."""
    if init is not None:
        vals = [float(v) for v in init.split(",")]
        if len(vals) != 6:
            raise click.BadParameter("expected 6 comma-separated values")
        return Pose6(vals[0], vals[1], vals[2], *np.radians(vals[3:]))
    truth_path = data_dir / "truth.txt"
    if truth_path.exists():
        pose, _, _ = dataio.read_result(truth_path)
        return pose
    raise click.UsageError("no --init given and no nominal pose file in the dataset")


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Stereo-camera-to-vehicle extrinsic calibration via road markings."""
    _setup_logging(verbose)


@main.command()
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default="default")
@click.option("--spec", "spec_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="key=value scene overrides.")
@click.option("--noise", type=float, default=1.0,
              help="Noise scale; 0 zeroes all sigmas.")
@click.option("--seed", type=int, default=0)
def generate(out: Path, preset: str, spec_path, noise: float, seed: int) -> None:
    """Render a synthetic dataset with known ground truth."""
    scene = PRESETS[preset]()
    if spec_path is not None:
        scene = synthetic.spec_with_overrides(scene, dataio.read_keyvalues(spec_path))
    scene = scene.scaled_noise(noise)
    synthetic.render_dataset(scene, out, seed=seed)
    click.echo(f"dataset written to {out}")


@main.command()
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--camera", type=click.Choice(["left", "right"]), default="left")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Utility CSV output path.")
@click.option("-k", type=int, default=None, help="Number of frames to select.")
def select(data: Path, config_path, seed, camera: str, out, k) -> None:
    """Rank images by road-marking utility and report the top-K."""
    cfg = _load_config(config_path, seed)
    if k is not None:
        cfg = cfg.with_overrides(select__k=k)
    dataset = load_dataset(data)
    analyses = analyze_images(dataset, cfg, camera=camera)
    if not analyses:
        raise click.ClickException("no image passed road detection")
    selected = select_frames(analyses, cfg)
    if out is not None:
        write_utility_csv(out, analyses, selected)
    by_id = {a.frame_id: a for a in analyses}
    for frame_id in selected:
        u = by_id[frame_id].utility
        click.echo(f"{frame_id} t={u.timestamp:.3f}s segments={u.n_segments} "
                   f"u_van={u.u_van:.3f} u_i={u.u_i:.3f}")


@main.command("calibrate")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--camera", type=click.Choice(["left", "right"]), default="left")
@click.option("--init", default=None,
              help="Initial pose tx,ty,tz,rx_deg,ry_deg,rz_deg.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--utility-csv", type=click.Path(path_type=Path), default=None)
def calibrate_cmd(data: Path, config_path, seed, camera: str, init, out, utility_csv) -> None:
    """Estimate the camera extrinsic from a dataset."""
    cfg = _load_config(config_path, seed)
    dataset = load_dataset(data)
    init_pose = _parse_init(init, data)
    try:
        result, analyses, selected, _ = calibrate(dataset, cfg, init_pose, camera=camera)
    except RoadCalibError as exc:
        raise click.ClickException(str(exc))
    if utility_csv is not None:
        write_utility_csv(utility_csv, analyses, selected)
    if out is not None:
        dataio.write_result(out, result.estimate, cost=result.cost,
                            iters=result.iterations, converged=result.converged)
    e = result.estimate
    click.echo(f"estimate: tx={e.tx:.4f} ty={e.ty:.4f} tz={e.tz:.4f} "
               f"rx={np.degrees(e.rx):.3f} ry={np.degrees(e.ry):.3f} "
               f"rz={np.degrees(e.rz):.3f} deg")
    click.echo(f"cost {result.initial_cost:.6f} -> {result.cost:.6f} "
               f"in {result.iterations} iterations "
               f"({'converged' if result.converged else 'not converged'})")


@main.command("sweep")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--camera", type=click.Choice(["left", "right"]), default="left")
@click.option("--reference", default=None,
              help="Reference pose tx,ty,tz,rx_deg,ry_deg,rz_deg.")
@click.option("--param", type=click.Choice(PARAM_NAMES), required=True)
@click.option("--lo", type=float, required=True, help="Offset range start.")
@click.option("--hi", type=float, required=True, help="Offset range end.")
@click.option("--steps", type=int, default=21)
@click.option("--frame-id", "frame_ids", multiple=True,
              help="Sweep these frames instead of the selected ones.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def sweep_cmd(data: Path, config_path, seed, camera: str, reference, param: str,
              lo: float, hi: float, steps: int, frame_ids, out: Path) -> None:
    """Evaluate each cost along one pose parameter (angles in radians)."""
    cfg = _load_config(config_path, seed)
    dataset = load_dataset(data)
    ref_pose = _parse_init(reference, data)
    gmap = build_map(dataset, cfg)
    analyses = analyze_images(dataset, cfg, camera=camera)
    if not analyses:
        raise click.ClickException("no image passed road detection")
    ids = list(frame_ids) if frame_ids else select_frames(analyses, cfg)
    known = {a.frame_id for a in analyses}
    missing = [fid for fid in ids if fid not in known]
    if missing:
        raise click.ClickException(f"unknown frame ids: {', '.join(missing)}")
    frames = prepare_frames(dataset, gmap, analyses, ids, ref_pose, cfg)
    rows = sweep(frames, ref_pose, param, lo, hi, steps, cfg)
    write_sweep_csv(out, rows)
    best = min(rows, key=lambda r: r[5])
    click.echo(f"minimum f_sum={best[5]:.6f} at {param} offset {best[1]:+.6f}")


@main.command("repeat")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--camera", type=click.Choice(["left", "right"]), default="left")
@click.option("--reference", default=None,
              help="Reference pose tx,ty,tz,rx_deg,ry_deg,rz_deg.")
@click.option("--runs", type=int, default=None)
@click.option("--image-counts", default="1,2,5", help="Comma-separated K values.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Per-run CSV; a _summary.csv sibling is written too.")
def repeat_cmd(data: Path, config_path, seed, camera: str, reference, runs,
               image_counts: str, out: Path) -> None:
    """Repeatability experiment from perturbed initial poses."""
    cfg = _load_config(config_path, seed)
    dataset = load_dataset(data)
    ref_pose = _parse_init(reference, data)
    counts = tuple(int(v) for v in image_counts.split(","))
    gmap = build_map(dataset, cfg)
    analyses = analyze_images(dataset, cfg, camera=camera)
    if not analyses:
        raise click.ClickException("no image passed road detection")
    selected = select_frames(analyses, cfg)
    frames = prepare_frames(dataset, gmap, analyses, selected, ref_pose, cfg)
    report = repeatability(frames, ref_pose, cfg, runs=runs, image_counts=counts)
    write_repeatability_csv(out, report)
    summary = out.with_name(out.stem + "_summary.csv")
    write_repeatability_summary(summary, report)
    for n in sorted({r.n_images for r in report.runs}):
        med = report.quartiles(n)[1]
        click.echo(
            f"K={n} median |error|: "
            + " ".join(f"{name}={v:.4f}" for name, v in zip(PARAM_NAMES, med))
        )


@main.command("project")
@click.option("--data", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--pose", default=None, help="Camera pose tx,ty,tz,rx_deg,ry_deg,rz_deg.")
@click.option("--camera", type=click.Choice(["left", "right"]), default="left")
@click.option("--frame", "frame_index", type=int, default=0,
              help="Image index of the chosen camera.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def project_cmd(data: Path, config_path, pose, camera: str, frame_index: int,
                out: Path) -> None:
    """Overlay the projected map intensities on one image (PPM output)."""
    cfg = _load_config(config_path, None)
    dataset = load_dataset(data)
    cam_pose = _parse_init(pose, data)
    images = dataset.images[camera]
    if not 0 <= frame_index < len(images):
        raise click.ClickException(f"frame index out of range (0..{len(images) - 1})")
    ts, gray = images[frame_index]
    gmap = build_map(dataset, cfg)

    t_vg = inverse(pose_to_transform(pose_at(dataset.trajectory, ts)))
    t_cv = inverse(pose_to_transform(cam_pose))
    pts_cam = t_cv.apply_points(t_vg.apply_points(gmap.cloud.points))
    cloud = IntensityCloud("camera", pts_cam, gmap.cloud.intensity)
    lidar_img = render_intensity_image(cloud, dataset.intrinsics,
                                       splat=cfg["render.splat"])

    rgb = np.stack([gray, gray, gray], axis=-1).astype(np.float64)
    valid = lidar_img.valid
    # projected intensities in orange over the gray image
    rgb[valid, 0] = 0.3 * rgb[valid, 0] + 0.7 * 255.0
    rgb[valid, 1] = 0.3 * rgb[valid, 1] + 0.7 * lidar_img.image[valid]
    rgb[valid, 2] = 0.3 * rgb[valid, 2]
    dataio.write_ppm(out, np.clip(np.rint(rgb), 0, 255).astype(np.uint8))
    click.echo(f"overlay for t={ts:.3f}s written to {out} "
               f"({int(valid.sum())} projected pixels)")


if __name__ == "__main__":
    main()
