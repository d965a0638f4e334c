"""Monte-Carlo evaluation of reconstruction quality.

A trial generates a scene, observes noisy directions, runs the pipeline,
fits each chessboard plane to the triangulated points by PCA (planes are
fitted independently; their known orthogonality is ignored), and scores the
per-corner normals against the fitted plane normal by angular error. Box
statistics use linearly interpolated quartiles and whiskers at the extreme
data points.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .affine import EstimatorKind
from .exceptions import CollinearPoints, EmptyGroup, GeometryError
from .geometry import rotation_angle
from .pipeline import PipelineConfig, Reconstruction, apply_metric_scale, run_pipeline
from .scene import PoseKind, SceneConfig, correspondence_set, generate_scene, observe_directions

Array = np.ndarray

CSV_SCHEMA = 1
RESULT_COLUMNS = [
    "schema_version", "pose", "estimator", "sigma_deg", "trial", "seed",
    "plane_id", "mean_err_deg", "median_err_deg", "drop_rate",
    "rot_err_deg", "trans_dir_err_deg", "baseline_rel_err",
    "ortho_12_deg", "ortho_13_deg", "ortho_23_deg", "failure",
]
SUMMARY_COLUMNS = [
    "schema_version", "group", "median", "q25", "q75",
    "whisker_lo", "whisker_hi", "n",
]


def angular_error(n_est, n_ref) -> float:
    """Unsigned angle between two unit vectors, folded to [0, 90] degrees."""
    d = abs(float(np.dot(np.asarray(n_est, float), np.asarray(n_ref, float))))
    return float(np.degrees(np.arccos(np.clip(d, 0.0, 1.0))))


def fit_plane_pca(points) -> tuple[Array, Array, float]:
    """Least-squares plane through a point cloud.

    Returns (unit normal, centroid, rms distance). The normal is the
    eigenvector of the centered covariance with the smallest eigenvalue.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise CollinearPoints("need at least 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 1e-10 * max(evals[2], 1e-300):
        raise CollinearPoints("points are collinear; plane normal undefined")
    normal = evecs[:, 0]
    rms = float(np.sqrt(max(evals[0], 0.0)))
    return normal, centroid, rms


@dataclass(frozen=True)
class BoxStats:
    """The five boxplot numbers plus the sample count."""

    median: float
    q25: float
    q75: float
    whisker_lo: float
    whisker_hi: float
    n: int

    @classmethod
    def from_values(cls, values) -> "BoxStats":
        v = np.asarray(values, dtype=float)
        v = v[np.isfinite(v)]
        if len(v) == 0:
            raise EmptyGroup("no finite values in group")
        return cls(
            median=float(np.median(v)),
            q25=float(np.percentile(v, 25)),
            q75=float(np.percentile(v, 75)),
            whisker_lo=float(v.min()),
            whisker_hi=float(v.max()),
            n=int(len(v)),
        )


@dataclass(frozen=True)
class TrialResult:
    """Errors of one reconstruction trial."""

    pose: str
    estimator: str
    sigma_deg: float
    trial: int
    seed: int
    plane_mean_deg: dict[int, float] = field(default_factory=dict)
    plane_median_deg: dict[int, float] = field(default_factory=dict)
    plane_drop_rate: dict[int, float] = field(default_factory=dict)
    ortho_deg: dict[tuple[int, int], float] = field(default_factory=dict)
    overall_mean_deg: float = float("nan")
    rot_err_deg: float = float("nan")
    trans_dir_err_deg: float = float("nan")
    baseline_rel_err: float = float("nan")
    baseline_est: float = float("nan")
    failure: str | None = None


def score_reconstruction(rec: Reconstruction, cfg: SceneConfig) -> dict:
    """Plane fits, per-plane normal errors, and pose errors for one run."""
    plane_normals = {}
    plane_mean = {}
    plane_median = {}
    plane_drop = {}
    all_errs = []
    for plane in (1, 2, 3):
        mask = rec.plane_id == plane
        normal, _, _ = fit_plane_pca(rec.points[mask])
        plane_normals[plane] = normal
        okm = mask & rec.normal_ok
        errs = [angular_error(rec.normals[i], normal) for i in np.flatnonzero(okm)]
        total = int(np.count_nonzero(mask))
        plane_drop[plane] = 1.0 - len(errs) / total
        plane_mean[plane] = float(np.mean(errs)) if errs else float("nan")
        plane_median[plane] = float(np.median(errs)) if errs else float("nan")
        all_errs.extend(errs)
    ortho = {
        (a, b): abs(angular_error(plane_normals[a], plane_normals[b]) - 90.0)
        for a, b in ((1, 2), (1, 3), (2, 3))
    }
    return {
        "plane_mean_deg": plane_mean,
        "plane_median_deg": plane_median,
        "plane_drop_rate": plane_drop,
        "ortho_deg": ortho,
        "overall_mean_deg": float(np.mean(all_errs)) if all_errs else float("nan"),
    }


def _trial_seeds(base_seed: int, cell_index: int, trial: int) -> tuple[int, int]:
    state = np.random.SeedSequence([base_seed, cell_index, trial]).generate_state(2)
    return int(state[0]), int(state[1])


def run_trial(
    pose: PoseKind,
    estimator: EstimatorKind,
    sigma_deg: float,
    trial: int,
    scene_seed: int,
    noise_seed: int,
    scene_overrides: dict | None = None,
    det_hint_policy: str = "from_scales",
) -> TrialResult:
    base = dict(pose_kind=pose, rng_seed=scene_seed)
    if scene_overrides:
        base.update(scene_overrides)
    cfg = SceneConfig(**base)
    head = dict(
        pose=PoseKind(pose).value,
        estimator=EstimatorKind(estimator).value,
        sigma_deg=float(sigma_deg),
        trial=trial,
        seed=scene_seed,
    )
    try:
        gt = generate_scene(cfg)
        obs = observe_directions(gt, sigma_deg, noise_seed)
        pconf = PipelineConfig(
            estimator=estimator, K1=gt.K, K2=gt.K, det_hint_policy=det_hint_policy
        )
        rec = run_pipeline(correspondence_set(gt, obs), pconf)
        rec = apply_metric_scale(rec, cfg.square_size)
        scores = score_reconstruction(rec, cfg)
        rot_err = float(np.degrees(rotation_angle(rec.pose.R @ gt.pose.R.T)))
        t_est = rec.pose.t / np.linalg.norm(rec.pose.t)
        t_gt = gt.pose.t / np.linalg.norm(gt.pose.t)
        trans_err = float(np.degrees(np.arccos(np.clip(t_est @ t_gt, -1.0, 1.0))))
        baseline_est = rec.baseline_length
        return TrialResult(
            **head,
            **scores,
            rot_err_deg=rot_err,
            trans_dir_err_deg=trans_err,
            baseline_rel_err=abs(baseline_est - cfg.baseline) / cfg.baseline,
            baseline_est=baseline_est,
        )
    except (GeometryError, np.linalg.LinAlgError) as exc:
        return TrialResult(**head, failure=f"{type(exc).__name__}: {exc}")


def run_experiment(
    poses,
    estimators,
    sigmas,
    trials: int,
    base_seed: int,
    scene_overrides: dict | None = None,
    det_hint_policy: str = "from_scales",
) -> list[TrialResult]:
    """Full grid of (pose, estimator, sigma) cells, ``trials`` runs each.

    Deterministic for a fixed base seed: every trial derives its own scene
    and noise seeds from (base_seed, cell index, trial index). Failed trials
    are recorded with their reason, never dropped.
    """
    if trials < 1:
        raise ValueError("need at least one trial per cell")
    cells = [
        (PoseKind(p), EstimatorKind(e), float(s))
        for p in poses for e in estimators for s in sigmas
    ]
    results = []
    for cell_index, (pose, est, sigma) in enumerate(cells):
        for t in range(trials):
            scene_seed, noise_seed = _trial_seeds(base_seed, cell_index, t)
            results.append(run_trial(
                pose, est, sigma, t, scene_seed, noise_seed,
                scene_overrides, det_hint_policy,
            ))
    return results


def expand_rows(results: list[TrialResult]) -> list[dict]:
    """One CSV-able row per (trial, plane)."""
    rows = []
    for r in results:
        for plane in (1, 2, 3):
            rows.append({
                "schema_version": CSV_SCHEMA,
                "pose": r.pose,
                "estimator": r.estimator,
                "sigma_deg": r.sigma_deg,
                "trial": r.trial,
                "seed": r.seed,
                "plane_id": plane,
                "mean_err_deg": r.plane_mean_deg.get(plane, float("nan")),
                "median_err_deg": r.plane_median_deg.get(plane, float("nan")),
                "drop_rate": r.plane_drop_rate.get(plane, float("nan")),
                "rot_err_deg": r.rot_err_deg,
                "trans_dir_err_deg": r.trans_dir_err_deg,
                "baseline_rel_err": r.baseline_rel_err,
                "ortho_12_deg": r.ortho_deg.get((1, 2), float("nan")),
                "ortho_13_deg": r.ortho_deg.get((1, 3), float("nan")),
                "ortho_23_deg": r.ortho_deg.get((2, 3), float("nan")),
                "failure": r.failure or "",
            })
    return rows


def summarize(
    rows: list[dict], keys: tuple[str, ...], value: str = "mean_err_deg"
) -> dict[tuple, BoxStats]:
    """Box statistics of ``value`` grouped by the given row keys."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row[value])
    if not groups:
        raise EmptyGroup("nothing to summarize")
    return {k: BoxStats.from_values(v) for k, v in sorted(groups.items(), key=repr)}


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def results_to_csv(rows: list[dict]) -> str:
    """Render result rows with a fixed column order and 17-digit floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def summary_to_csv(stats: dict[tuple, BoxStats]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for key, s in stats.items():
        writer.writerow([
            CSV_SCHEMA, "|".join(_fmt(k) for k in key),
            _fmt(s.median), _fmt(s.q25), _fmt(s.q75),
            _fmt(s.whisker_lo), _fmt(s.whisker_hi), s.n,
        ])
    return buf.getvalue()


# --- figure-level checks -------------------------------------------------------

FIG5_SIGMAS = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0)
ALL_ESTIMATORS = (
    EstimatorKind.TWO_SDIR,
    EstimatorKind.THREE_SDIR,
    EstimatorKind.F2UDIR,
    EstimatorKind.F3UDIR,
    EstimatorKind.DET3UDIR,
)


def _median_overall(results, **match) -> float:
    vals = [
        r.overall_mean_deg
        for r in results
        if r.failure is None and all(getattr(r, k) == v for k, v in match.items())
    ]
    vals = [v for v in vals if np.isfinite(v)]
    if not vals:
        raise EmptyGroup(f"no successful trials for {match}")
    return float(np.median(vals))


def _median_plane(results, plane: int, **match) -> float:
    vals = [
        r.plane_mean_deg.get(plane, float("nan"))
        for r in results
        if r.failure is None and all(getattr(r, k) == v for k, v in match.items())
    ]
    vals = [v for v in vals if np.isfinite(v)]
    if not vals:
        raise EmptyGroup(f"no successful trials for plane {plane} {match}")
    return float(np.median(vals))


def check_fig5(trials: int = 200, base_seed: int = 0) -> tuple[bool, list[str]]:
    """Noise sweep, general pose, F-matrix + two unscaled directions.

    Median of the per-trial all-plane average error must be non-decreasing
    in sigma (up to one adjacent tie) and at most 20 degrees at the largest
    noise level.
    """
    results = run_experiment(
        [PoseKind.GENERAL], [EstimatorKind.F2UDIR], FIG5_SIGMAS, trials, base_seed
    )
    medians = [_median_overall(results, sigma_deg=s) for s in FIG5_SIGMAS]
    lines = [
        f"  sigma={s:>4}: median overall error {m:.4f} deg"
        for s, m in zip(FIG5_SIGMAS, medians)
    ]
    ties = 0
    ok = True
    for lo, hi in zip(medians, medians[1:]):
        tol = 0.05 * max(lo, hi, 1e-12)
        if hi < lo - tol:
            ok = False
        elif abs(hi - lo) <= tol:
            ties += 1
    if ties > 1:
        ok = False
    ceiling = medians[-1] <= 20.0
    lines.append(f"  monotone up to {ties} tie(s): {'PASS' if ok else 'FAIL'}")
    lines.append(f"  ceiling at sigma=5 ({medians[-1]:.3f} <= 20 deg): "
                 f"{'PASS' if ceiling else 'FAIL'}")
    return ok and ceiling, lines


def _ranking_check(med: dict[str, float], a: str, b: str) -> tuple[bool, str]:
    """a should beat b by >= 10% relative margin, else it is a flagged tie."""
    margin = (med[b] - med[a]) / max(med[b], 1e-12)
    if margin >= 0.10:
        return True, f"  {a} ({med[a]:.3f}) <= {b} ({med[b]:.3f}): PASS ({margin:.0%} margin)"
    if margin > -0.10:
        return True, f"  {a} ({med[a]:.3f}) ~= {b} ({med[b]:.3f}): TIE (|margin| < 10%)"
    return False, f"  {a} ({med[a]:.3f}) > {b} ({med[b]:.3f}): FAIL"


def check_fig6(trials: int = 200, base_seed: int = 0, sigma: float = 3.0):
    """Estimator ranking at 3-degree direction noise, general pose.

    Scaled-direction estimators must beat the F-matrix ones, which in turn
    must beat the determinant-constrained unscaled estimator.
    """
    results = run_experiment(
        [PoseKind.GENERAL], ALL_ESTIMATORS, [sigma], trials, base_seed
    )
    med = {
        e.value: _median_overall(results, estimator=e.value) for e in ALL_ESTIMATORS
    }
    lines = [f"  median overall error: " +
             ", ".join(f"{k}={v:.3f}" for k, v in med.items())]
    ok = True
    for a, b in (("2SDIR", "F2UDIR"), ("F2UDIR", "DET3UDIR"),
                 ("3SDIR", "F3UDIR"), ("F3UDIR", "DET3UDIR")):
        good, line = _ranking_check(med, a, b)
        ok = ok and good
        lines.append(line)
    return ok, lines


def check_fig7(trials: int = 200, base_seed: int = 0, sigma: float = 1.0):
    """Special-motion sensitivity at 1-degree noise.

    (a) forward motion: plane #1 at least twice as bad as plane #3,
    (b) forward motion worse than standard stereo overall,
    (c) standard stereo and planar motion keep planes #2/#3 under 5 degrees.
    """
    poses = [PoseKind.FORWARD, PoseKind.STANDARD_STEREO, PoseKind.PLANAR]
    results = run_experiment(poses, [EstimatorKind.F2UDIR], [sigma], trials, base_seed)
    lines = []
    fwd1 = _median_plane(results, 1, pose="forward")
    fwd3 = _median_plane(results, 3, pose="forward")
    a_ok = fwd1 >= 2.0 * fwd3
    lines.append(f"  forward plane1 {fwd1:.3f} vs plane3 {fwd3:.3f} "
                 f"(need >= 2x): {'PASS' if a_ok else 'FAIL'}")
    fwd_all = _median_overall(results, pose="forward")
    std_all = _median_overall(results, pose="standard_stereo")
    b_ok = fwd_all > std_all
    lines.append(f"  forward overall {fwd_all:.3f} > standard stereo {std_all:.3f}: "
                 f"{'PASS' if b_ok else 'FAIL'}")
    c_ok = True
    for pose in ("standard_stereo", "planar"):
        for plane in (2, 3):
            m = _median_plane(results, plane, pose=pose)
            good = m < 5.0
            c_ok = c_ok and good
            lines.append(f"  {pose} plane{plane} median {m:.3f} < 5 deg: "
                         f"{'PASS' if good else 'FAIL'}")
    return a_ok and b_ok and c_ok, lines


def check_metric_baseline(trials: int = 50, base_seed: int = 0,
                          baseline: float = 300.0, sigma: float = 1.0):
    """Recovered baseline within 3% of truth, standard stereo, every estimator."""
    results = run_experiment(
        [PoseKind.STANDARD_STEREO], ALL_ESTIMATORS, [sigma], trials, base_seed,
        scene_overrides={"baseline": baseline},
    )
    ok = True
    lines = []
    for e in ALL_ESTIMATORS:
        vals = [
            r.baseline_est for r in results
            if r.failure is None and r.estimator == e.value and np.isfinite(r.baseline_est)
        ]
        med = float(np.median(vals))
        rel = abs(med - baseline) / baseline
        good = rel <= 0.03
        ok = ok and good
        lines.append(f"  {e.value}: median baseline {med:.2f} "
                     f"({rel:.2%} off): {'PASS' if good else 'FAIL'}")
    return ok, lines


def check_zero_noise(base_seed: int = 0, tol_rad: float = 1e-6):
    """Every pose family and estimator reconstructs a noiseless scene exactly."""
    poses = [PoseKind.GENERAL, PoseKind.PLANAR, PoseKind.STANDARD_STEREO, PoseKind.FORWARD]
    results = run_experiment(poses, ALL_ESTIMATORS, [0.0], 1, base_seed)
    tol_deg = float(np.degrees(tol_rad))
    ok = True
    lines = []
    for r in results:
        if r.failure is not None:
            ok = False
            lines.append(f"  {r.pose}/{r.estimator}: FAIL ({r.failure})")
            continue
        worst_plane = max(r.plane_mean_deg.values())
        good = (worst_plane <= tol_deg and r.rot_err_deg <= tol_deg
                and r.trans_dir_err_deg <= tol_deg
                and all(v == 0.0 for v in r.plane_drop_rate.values()))
        ok = ok and good
        lines.append(
            f"  {r.pose}/{r.estimator}: normals {worst_plane:.2e} deg, "
            f"rot {r.rot_err_deg:.2e} deg, trans {r.trans_dir_err_deg:.2e} deg: "
            f"{'PASS' if good else 'FAIL'}"
        )
    return ok, lines
