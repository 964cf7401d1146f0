"""Downhill-simplex minimization of the total cost, plus the sweep and
repeatability experiment harnesses."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .costs import CostWeights, total_cost
from .errors import RoadCalibError
from .geometry import Pose6, normalize_angle
from .pipeline import (
    Dataset,
    analyze_images,
    build_map,
    cost_kwargs,
    prepare_frames,
    select_frames,
)

log = logging.getLogger(__name__)

PARAM_NAMES = ("tx", "ty", "tz", "rx", "ry", "rz")

# standard Nelder-Mead coefficients: reflection, expansion, contraction, shrink
ALPHA, GAMMA, RHO_C, SIGMA = 1.0, 2.0, 0.5, 0.5


@dataclass
class SimplexOptions:
    f_tol: float = 1e-6
    x_tol_t: float = 1e-4  # meters
    x_tol_r: float = np.radians(0.01)  # radians
    max_iter: int = 2000
    step_t: float = 0.1
    step_r: float = np.radians(1.0)
    restart: bool = True

    @classmethod
    def from_config(cls, cfg: Config) -> "SimplexOptions":
        return cls(
            f_tol=cfg["opt.f_tol"],
            x_tol_t=cfg["opt.x_tol_t"],
            x_tol_r=np.radians(cfg["opt.x_tol_r_deg"]),
            max_iter=cfg["opt.max_iter"],
            step_t=cfg["opt.step_t"],
            step_r=np.radians(cfg["opt.step_r_deg"]),
            restart=cfg["opt.restart"],
        )


@dataclass
class SimplexResult:
    x: np.ndarray
    fx: float
    iterations: int
    n_eval: int
    converged: bool
    best_history: list[float] = field(default_factory=list)


def _safe_eval(f, x) -> float:
    value = f(x)
    return float(value) if np.isfinite(value) else np.inf


def nelder_mead(f, x0: np.ndarray, opts: SimplexOptions | None = None) -> SimplexResult:
    """Minimize a 6-D function with reflection/expansion/contraction/shrink.

    The initial simplex is x0 plus one axis step per parameter (``step_t``
    for the translations, ``step_r`` for the rotations).  Non-finite costs
    are treated as +inf and contracted away; the best vertex cost never
    increases between iterations.
    """
    if opts is None:
        opts = SimplexOptions()
    x0 = np.asarray(x0, dtype=np.float64).reshape(6)
    steps = np.array([opts.step_t] * 3 + [opts.step_r] * 3)

    verts = np.tile(x0, (7, 1))
    for i in range(6):
        verts[i + 1, i] += steps[i]
    costs = np.array([_safe_eval(f, v) for v in verts])
    n_eval = 7
    if not np.isfinite(costs).any():
        return SimplexResult(x0, np.inf, 0, n_eval, False, [np.inf])

    history: list[float] = []
    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        order = np.argsort(costs, kind="stable")
        verts, costs = verts[order], costs[order]
        history.append(float(costs[0]))

        finite = np.isfinite(costs)
        if not finite.any():
            return SimplexResult(verts[0], costs[0], iterations, n_eval, False, history)

        spread = costs[-1] - costs[0]
        rel = spread / max(abs(costs[0]), 1e-30)
        dev = np.abs(verts - verts[0]).max(axis=0)
        small = dev[:3].max() < opts.x_tol_t and dev[3:].max() < opts.x_tol_r
        if (np.isfinite(spread) and rel < opts.f_tol) or small:
            return SimplexResult(verts[0], float(costs[0]), iterations, n_eval, True, history)

        centroid = verts[:-1].mean(axis=0)
        xr = centroid + ALPHA * (centroid - verts[-1])
        fr = _safe_eval(f, xr)
        n_eval += 1
        if fr < costs[0]:
            xe = centroid + GAMMA * (centroid - verts[-1])
            fe = _safe_eval(f, xe)
            n_eval += 1
            if fe < fr:
                verts[-1], costs[-1] = xe, fe
            else:
                verts[-1], costs[-1] = xr, fr
        elif fr < costs[-2]:
            verts[-1], costs[-1] = xr, fr
        else:
            if fr < costs[-1]:
                xc = centroid + RHO_C * (xr - centroid)
            else:
                xc = centroid + RHO_C * (verts[-1] - centroid)
            fc = _safe_eval(f, xc)
            n_eval += 1
            if fc < min(fr, costs[-1]):
                verts[-1], costs[-1] = xc, fc
            else:
                for i in range(1, 7):
                    verts[i] = verts[0] + SIGMA * (verts[i] - verts[0])
                    costs[i] = _safe_eval(f, verts[i])
                n_eval += 6

    order = np.argsort(costs, kind="stable")
    verts, costs = verts[order], costs[order]
    history.append(float(costs[0]))
    return SimplexResult(verts[0], float(costs[0]), iterations, n_eval, False, history)


def minimize_pose(f, x0: np.ndarray, opts: SimplexOptions) -> SimplexResult:
    """Nelder-Mead with one optional restart from the found minimum."""
    result = nelder_mead(f, x0, opts)
    if opts.restart and np.isfinite(result.fx):
        again = nelder_mead(f, result.x, opts)
        if again.fx < result.fx:
            again.best_history = result.best_history + again.best_history
            again.iterations += result.iterations
            again.n_eval += result.n_eval
            return again
        result.n_eval += again.n_eval
    return result


@dataclass
class CalibrationResult:
    estimate: Pose6
    cost: float
    iterations: int
    converged: bool
    breakdown: list
    initial_cost: float
    n_frames: int
    best_history: list[float] = field(default_factory=list)


def optimize_extrinsic(frames, init_pose: Pose6, cfg: Config,
                       opts: SimplexOptions | None = None) -> CalibrationResult:
    """Run the simplex on the summed frame costs from an initial extrinsic."""
    if opts is None:
        opts = SimplexOptions.from_config(cfg)
    weights = CostWeights(cfg["weights.k1"], cfg["weights.k2"], cfg["weights.k3"])
    kwargs = cost_kwargs(cfg)

    def objective(x):
        value, _ = total_cost(frames, Pose6.from_vector(x), weights, **kwargs)
        return value

    x0 = init_pose.as_vector()
    initial_cost = objective(x0)
    result = minimize_pose(objective, x0, opts)
    estimate = Pose6.from_vector(result.x)
    _, breakdown = total_cost(frames, estimate, weights, **kwargs)
    return CalibrationResult(estimate, result.fx, result.iterations, result.converged,
                             breakdown, initial_cost, len(frames), result.best_history)


def calibrate(dataset: Dataset, cfg: Config, init_pose: Pose6,
              camera: str = "left"):
    """Full pipeline: map -> road detection -> selection -> optimization.

    Returns (CalibrationResult, analyses, selected_ids, frames).
    """
    gmap = build_map(dataset, cfg)
    analyses = analyze_images(dataset, cfg, camera=camera)
    if not analyses:
        raise RoadCalibError("no informative frames: no image passed road detection")
    selected = select_frames(analyses, cfg)
    frames = prepare_frames(dataset, gmap, analyses, selected, init_pose, cfg)
    result = optimize_extrinsic(frames, init_pose, cfg)
    return result, analyses, selected, frames


def sweep(frames, reference: Pose6, param: str, lo: float, hi: float,
          steps: int, cfg: Config):
    """Evaluate each cost along one parameter axis around a reference pose.

    Returns rows (param, offset, f_edge, f_nid, f_plane, f_sum); the
    per-component columns are sums over frames of the raw (unweighted) costs.
    """
    if param not in PARAM_NAMES:
        raise ValueError(f"unknown parameter {param!r}")
    index = PARAM_NAMES.index(param)
    weights = CostWeights(cfg["weights.k1"], cfg["weights.k2"], cfg["weights.k3"])
    kwargs = cost_kwargs(cfg)
    offsets = np.linspace(lo, hi, steps) if steps > 1 else np.array([(lo + hi) / 2.0])

    rows = []
    base = reference.as_vector()
    for offset in offsets:
        x = base.copy()
        x[index] += offset
        f_sum, breakdown = total_cost(frames, Pose6.from_vector(x), weights, **kwargs)
        rows.append((
            param,
            float(offset),
            float(sum(b.f_edge for b in breakdown)),
            float(sum(b.f_nid for b in breakdown)),
            float(sum(b.f_plane for b in breakdown)),
            f_sum,
        ))
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("param,offset,f_edge,f_nid,f_plane,f_sum\n")
        for param, offset, fe, fn, fp, fs in rows:
            fh.write(f"{param},{offset:.9f},{fe:.9f},{fn:.9f},{fp:.9f},{fs:.9f}\n")


@dataclass
class RepeatRun:
    run: int
    n_images: int
    init: np.ndarray
    estimate: np.ndarray
    error: np.ndarray  # signed, radians for the angle entries
    cost: float
    converged: bool


@dataclass
class RepeatabilityReport:
    runs: list[RepeatRun]

    def errors(self, n_images: int) -> np.ndarray:
        sel = [r.error for r in self.runs if r.n_images == n_images]
        return np.array(sel).reshape(-1, 6)

    def quartiles(self, n_images: int) -> np.ndarray:
        """(3, 6) array of 25/50/75th percentiles of |error| per parameter."""
        errs = np.abs(self.errors(n_images))
        return np.percentile(errs, [25, 50, 75], axis=0)


def pose_error(estimate: Pose6, reference: Pose6) -> np.ndarray:
    """Signed per-parameter error; angles wrapped through the short way."""
    diff = estimate.as_vector() - reference.as_vector()
    diff[3:] = [normalize_angle(a) for a in diff[3:]]
    return diff


def repeatability(frames, reference: Pose6, cfg: Config, runs: int | None = None,
                  perturb_t: float | None = None, perturb_r: float | None = None,
                  image_counts=(1, 2, 5), seed: int | None = None) -> RepeatabilityReport:
    """Re-run the optimization stage from randomly perturbed initial poses.

    Each run perturbs the reference uniformly within +-perturb_t meters and
    +-perturb_r radians per axis and optimizes with the first n most
    informative frames, for each n in ``image_counts``.  Per-run RNG streams
    derive from the root seed, so the report is reproducible.
    """
    if runs is None:
        runs = cfg["repeat.runs"]
    if perturb_t is None:
        perturb_t = cfg["repeat.perturb_t"]
    if perturb_r is None:
        perturb_r = np.radians(cfg["repeat.perturb_r_deg"])
    if seed is None:
        seed = cfg["seed"]
    opts = SimplexOptions.from_config(cfg)

    counts = sorted({min(n, len(frames)) for n in image_counts})
    report = RepeatabilityReport([])
    for run in range(runs):
        rng = np.random.default_rng([seed, 7, run])
        delta = np.concatenate([
            rng.uniform(-perturb_t, perturb_t, 3),
            rng.uniform(-perturb_r, perturb_r, 3),
        ])
        init = Pose6.from_vector(reference.as_vector() + delta)
        for n in counts:
            result = optimize_extrinsic(frames[:n], init, cfg, opts)
            report.runs.append(RepeatRun(
                run, n, init.as_vector(), result.estimate.as_vector(),
                pose_error(result.estimate, reference), result.cost, result.converged,
            ))
            if not result.converged:
                log.warning("repeatability run %d (n=%d) did not converge", run, n)
    return report


def write_repeatability_csv(path, report: RepeatabilityReport) -> None:
    cols_init = [f"init_{n}" for n in PARAM_NAMES]
    cols_err = [f"err_{n}" for n in PARAM_NAMES]
    with open(path, "w") as fh:
        fh.write("run,n_images," + ",".join(cols_init + cols_err) + ",cost,converged\n")
        for r in report.runs:
            vals = [f"{v:.9f}" for v in np.concatenate([r.init, r.error])]
            fh.write(f"{r.run},{r.n_images}," + ",".join(vals)
                     + f",{r.cost:.9f},{int(r.converged)}\n")


def write_repeatability_summary(path, report: RepeatabilityReport) -> None:
    with open(path, "w") as fh:
        fh.write("n_images,percentile," + ",".join(PARAM_NAMES) + "\n")
        for n in sorted({r.n_images for r in report.runs}):
            q = report.quartiles(n)
            for pct, row in zip((25, 50, 75), q):
                fh.write(f"{n},{pct}," + ",".join(f"{v:.9f}" for v in row) + "\n")
