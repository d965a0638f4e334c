"""End-to-end reconstruction: corners and directions in, oriented point
cloud and relative pose out.

Stage order: fundamental matrix from point matches, per-corner affinity
estimation, fundamental refinement from points + affinities (one pass),
essential matrix, pose decomposition, triangulation, normal estimation.
Per-corner failures are flagged and skipped, never fatal; stage-level
failures propagate with a stage label.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .affine import (
    EstimatorKind,
    det_hint_from_scaled_directions,
    estimate_2sdir,
    estimate_3sdir,
    estimate_det3udir,
    estimate_f2udir,
    estimate_f3udir,
    mean_square_scale,
)
from .epipolar import (
    decompose_essential,
    essential_from_f,
    estimate_f_8point,
    refine_f_with_acs,
    triangulate_batch,
)
from .exceptions import GeometryError, InsufficientStructure, InvalidConfig
from .geometry import AffineCorrespondence, CameraP, Pose, compose_camera
from .normals import estimate_normal
from .scene import CorrespondenceSet, DirectionObservation

Array = np.ndarray

DET_HINT_POLICIES = ("from_scales", "mean_square", "unit")


@dataclass(frozen=True)
class PipelineConfig:
    """Estimator choice, intrinsics, and the small policy knobs."""

    estimator: EstimatorKind
    K1: Array
    K2: Array
    det_hint_policy: str = "from_scales"
    reestimate_with_refined_f: bool = False
    allow_triangulation_fallback: bool = True

    def __post_init__(self):
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        object.__setattr__(self, "K1", np.asarray(self.K1, dtype=float).reshape(3, 3))
        object.__setattr__(self, "K2", np.asarray(self.K2, dtype=float).reshape(3, 3))
        if self.det_hint_policy not in DET_HINT_POLICIES:
            raise InvalidConfig(f"unknown determinant policy {self.det_hint_policy!r}")
        if np.linalg.det(self.K1) == 0 or np.linalg.det(self.K2) == 0:
            raise InvalidConfig("intrinsic matrices must be nonsingular")


@dataclass(frozen=True)
class Reconstruction:
    """Oriented point cloud plus pose and per-stage diagnostics.

    ``points`` covers every corner; ``normals`` rows are NaN where the
    corner was flagged (see ``normal_ok`` and ``skip_reasons``). The
    translation is unit length until ``apply_metric_scale``.
    """

    points: Array
    normals: Array
    residuals: Array
    normal_ok: Array
    skip_reasons: list[str | None]
    plane_id: Array
    row: Array
    col: Array
    pose: Pose
    F_initial: Array
    F_refined: Array
    metric_scale: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def baseline_length(self) -> float:
        return float(np.linalg.norm(self.pose.t))


def _estimate_affinity(
    kind: EstimatorKind,
    F: Array,
    p1: Array,
    p2: Array,
    obs: DirectionObservation,
    det_hint_policy: str,
) -> Array:
    if kind is EstimatorKind.TWO_SDIR:
        return estimate_2sdir(obs.pairs(2))
    if kind is EstimatorKind.THREE_SDIR:
        return estimate_3sdir(obs.pairs(3))
    if kind is EstimatorKind.DET3UDIR:
        dirs = obs.pairs(3)
        if det_hint_policy == "from_scales":
            hint = det_hint_from_scaled_directions(dirs)
        elif det_hint_policy == "mean_square":
            hint = mean_square_scale(dirs)
        else:
            hint = 1.0
        return estimate_det3udir(dirs, hint)
    if kind is EstimatorKind.F2UDIR:
        return estimate_f2udir(F, p1, p2, obs.pairs(2))
    if kind is EstimatorKind.F3UDIR:
        return estimate_f3udir(F, p1, p2, obs.pairs(3))
    raise InvalidConfig(f"unknown estimator {kind!r}")


def _affinity_pass(data, cfg, F):
    n = len(data.p1)
    affinities: list[Array | None] = [None] * n
    reasons: list[str | None] = [None] * n
    for i in range(n):
        try:
            affinities[i] = _estimate_affinity(
                cfg.estimator, F, data.p1[i], data.p2[i],
                data.observations[i], cfg.det_hint_policy,
            )
        except GeometryError as exc:
            reasons[i] = f"affine: {type(exc).__name__}"
    return affinities, reasons


def run_pipeline(data: CorrespondenceSet, cfg: PipelineConfig) -> Reconstruction:
    """Reconstruct an oriented point cloud from matched corners + directions."""
    n = len(data.p1)
    if n < 8:
        raise InvalidConfig("need at least 8 corner matches")
    if len(data.observations) != n:
        raise InvalidConfig("one direction observation per corner is required")

    try:
        F_init = estimate_f_8point(data.p1, data.p2)
    except GeometryError as exc:
        raise type(exc)(f"fundamental estimation: {exc}") from exc

    affinities, reasons = _affinity_pass(data, cfg, F_init)

    acs = [
        AffineCorrespondence(data.p1[i], data.p2[i], affinities[i])
        for i in range(n)
        if affinities[i] is not None
    ]
    if acs:
        try:
            F_ref = refine_f_with_acs(data.p1, data.p2, acs, F_init)
        except GeometryError as exc:
            raise type(exc)(f"fundamental refinement: {exc}") from exc
    else:
        F_ref = F_init

    if cfg.reestimate_with_refined_f and cfg.estimator in (
        EstimatorKind.F2UDIR, EstimatorKind.F3UDIR,
    ):
        affinities, reasons = _affinity_pass(data, cfg, F_ref)

    E = essential_from_f(F_ref, cfg.K1, cfg.K2)
    try:
        pose = decompose_essential(E, data.p1, data.p2, cfg.K1, cfg.K2)
    except GeometryError as exc:
        raise type(exc)(f"pose decomposition: {exc}") from exc

    cam1 = compose_camera(cfg.K1, Pose(np.eye(3), np.zeros(3)))
    cam2 = compose_camera(cfg.K2, pose)
    try:
        points, fallback = triangulate_batch(cam1, cam2, data.p1, data.p2)
    except GeometryError as exc:
        raise type(exc)(f"triangulation: {exc}") from exc
    if np.any(fallback) and not cfg.allow_triangulation_fallback:
        raise InvalidConfig("triangulation fallback occurred but is disallowed")

    normals = np.full((n, 3), np.nan)
    residuals = np.full(n, np.nan)
    ok = np.zeros(n, dtype=bool)
    for i in range(n):
        if affinities[i] is None:
            continue
        ac = AffineCorrespondence(data.p1[i], data.p2[i], affinities[i])
        try:
            op = estimate_normal(ac, cam1, cam2, points[i])
        except GeometryError as exc:
            reasons[i] = f"normal: {type(exc).__name__}"
            continue
        normals[i] = op.normal
        residuals[i] = op.residual
        ok[i] = True

    diagnostics = {
        "estimator": cfg.estimator.value,
        "det_hint_policy": cfg.det_hint_policy,
        "n_corners": n,
        "affine_failures": sum(r is not None and r.startswith("affine") for r in reasons),
        "normal_skips": sum(r is not None and r.startswith("normal") for r in reasons),
        "triangulation_fallbacks": int(np.count_nonzero(fallback)),
    }
    return Reconstruction(
        points=points,
        normals=normals,
        residuals=residuals,
        normal_ok=ok,
        skip_reasons=reasons,
        plane_id=np.asarray(data.plane_id, dtype=int),
        row=np.asarray(data.row, dtype=int),
        col=np.asarray(data.col, dtype=int),
        pose=pose,
        F_initial=F_init,
        F_refined=F_ref,
        diagnostics=diagnostics,
    )


def adjacent_pair_distances(rec: Reconstruction) -> Array:
    """Distances between reconstructions of grid-adjacent same-plane corners."""
    index = {
        (int(rec.plane_id[i]), int(rec.row[i]), int(rec.col[i])): i
        for i in range(len(rec.plane_id))
    }
    dists = []
    for (plane, r, c), i in index.items():
        for dr, dc in ((0, 1), (1, 0)):
            j = index.get((plane, r + dr, c + dc))
            if j is not None:
                dists.append(np.linalg.norm(rec.points[i] - rec.points[j]))
    return np.asarray(dists)


def apply_metric_scale(rec: Reconstruction, square_size: float) -> Reconstruction:
    """Scale the reconstruction so adjacent corners sit one square apart.

    The median of all adjacent same-plane corner distances is mapped onto
    ``square_size``; point positions and the pose translation scale
    together, so image projections are unchanged.
    """
    if square_size <= 0:
        raise InvalidConfig("square size must be positive")
    dists = adjacent_pair_distances(rec)
    if len(dists) == 0:
        raise InsufficientStructure("no adjacent same-plane corner pairs")
    med = float(np.median(dists))
    if med <= 0:
        raise InsufficientStructure("degenerate reconstruction: zero corner spacing")
    s = square_size / med
    return replace(
        rec,
        points=rec.points * s,
        pose=Pose(rec.pose.R, rec.pose.t * s),
        metric_scale=rec.metric_scale * s,
    )


# --- serialization ------------------------------------------------------------

def reconstruction_to_dict(rec: Reconstruction) -> dict:
    return {
        "schema": 1,
        "pose": {"R": rec.pose.R.ravel().tolist(), "t": rec.pose.t.tolist()},
        "F_initial": rec.F_initial.ravel().tolist(),
        "F_refined": rec.F_refined.ravel().tolist(),
        "metric_scale": rec.metric_scale,
        "diagnostics": rec.diagnostics,
        "points": [
            {
                "plane": int(rec.plane_id[i]),
                "row": int(rec.row[i]),
                "col": int(rec.col[i]),
                "position": rec.points[i].tolist(),
                "normal": rec.normals[i].tolist() if rec.normal_ok[i] else None,
                "residual": float(rec.residuals[i]) if rec.normal_ok[i] else None,
                "skip_reason": rec.skip_reasons[i],
            }
            for i in range(len(rec.plane_id))
        ],
    }


def save_reconstruction(path, rec: Reconstruction):
    with open(path, "w") as f:
        json.dump(reconstruction_to_dict(rec), f, indent=1, sort_keys=True)
        f.write("\n")


def write_ply(path, rec: Reconstruction):
    """ASCII point cloud with normals (oriented points only)."""
    idx = np.flatnonzero(rec.normal_ok)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(idx)}",
        "property float x",
        "property float y",
        "property float z",
        "property float nx",
        "property float ny",
        "property float nz",
        "end_header",
    ]
    for i in idx:
        x, y, z = rec.points[i]
        nx, ny, nz = rec.normals[i]
        lines.append(f"{x} {y} {z} {nx} {ny} {nz}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
