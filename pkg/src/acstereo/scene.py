"""Synthetic evaluation world: three mutually perpendicular chessboard
planes seen by a stereo pair under one of four pose families.

Plane #1 faces the first camera (perpendicular to Z), plane #2 is the
horizontal one (perpendicular to Y, image Y points down), plane #3 is the
vertical side wall (perpendicular to X). The camera-1 frame is the world
frame. Direction observations connect adjacent chessboard corners in
image 1; their image-2 counterparts and scales are generated from the
ground-truth local affinity so that a noiseless scene is exactly consistent
with every estimator. Angular noise rotates each direction independently in
each image and never changes lengths, so scales stay noise-free.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .epipolar import affine_from_homography, fundamental_from_cameras, homography_from_plane
from .exceptions import CornersBehindCamera, InvalidConfig
from .geometry import (
    CameraP,
    DirectionPair,
    Pose,
    compose_camera,
    euler_rotation,
    intrinsics,
    project,
    skew,
)

Array = np.ndarray

SCHEMA_VERSION = 1


class PoseKind(str, Enum):
    GENERAL = "general"
    PLANAR = "planar"
    STANDARD_STEREO = "standard_stereo"
    FORWARD = "forward"


@dataclass(frozen=True)
class SceneConfig:
    """Scene layout, camera intrinsics, and pose-family parameters.

    ``baseline`` is the translation magnitude for every pose family. The
    planar angles are sampled from the seed when left as None.
    ``position_noise_px`` optionally jitters the stored corner pixels; it is
    an extension beyond the angular direction-noise model and defaults off.
    """

    pose_kind: PoseKind = PoseKind.GENERAL
    board_rows: int = 6
    board_cols: int = 8
    square_size: float = 30.0
    baseline: float = 300.0
    distance: float = 1000.0
    focal: float = 800.0
    principal: tuple[float, float] = (640.0, 480.0)
    general_euler_limit_deg: float = 15.0
    planar_rotation_deg: float | None = None
    planar_direction_deg: float | None = None
    # in-plane rotation of each chessboard grid; boards are never mounted
    # pixel-aligned, and axis-aligned grids would put directions exactly
    # parallel to epipolar lines for the special pose families
    grid_rotations_deg: tuple[float, float, float] = (12.0, 18.0, 24.0)
    # distance of the horizontal and vertical planes from the camera-1 axis,
    # in squares; must exceed the translation magnitude so camera 2 stays on
    # the front side of every plane
    clearance_squares: float = 12.0
    position_noise_px: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pose_kind", PoseKind(self.pose_kind))
        object.__setattr__(self, "grid_rotations_deg", tuple(self.grid_rotations_deg))
        if self.board_rows < 2 or self.board_cols < 2:
            raise InvalidConfig("board needs at least 2x2 corners")
        if self.square_size <= 0 or self.baseline <= 0 or self.distance <= 0:
            raise InvalidConfig("square_size, baseline and distance must be positive")
        if self.focal <= 0:
            raise InvalidConfig("focal length must be positive")
        if self.clearance_squares <= 0:
            raise InvalidConfig("plane clearance must be positive")
        if self.position_noise_px < 0:
            raise InvalidConfig("position noise must be non-negative")


@dataclass(frozen=True)
class DirectionObservation:
    """Three direction pairs at one corner: along the row, the column, and
    the (single, consistently chosen) diagonal."""

    corner_id: int
    horizontal: DirectionPair
    vertical: DirectionPair
    diagonal: DirectionPair
    noise_applied: bool = False

    def pairs(self, count: int) -> list[DirectionPair]:
        """First ``count`` of (horizontal, vertical, diagonal)."""
        return [self.horizontal, self.vertical, self.diagonal][:count]


@dataclass(frozen=True)
class GroundTruth:
    """Everything known about a generated scene."""

    config: SceneConfig
    K: Array
    cam1: CameraP
    cam2: CameraP
    pose: Pose
    F: Array
    E: Array
    plane_normals: Array        # (3, 3), oriented toward camera 1
    plane_offsets: Array        # (3,), plane is {X : n.X + d = 0}
    homographies: Array         # (3, 3, 3), plane-induced view1 -> view2
    plane_id: Array             # (N,) in {1, 2, 3}
    row: Array                  # (N,)
    col: Array                  # (N,)
    world: Array                # (N, 3)
    p1: Array                   # (N, 2)
    p2: Array                   # (N, 2)
    affinity: Array             # (N, 2, 2)
    normal: Array               # (N, 3) per-corner plane normal
    _index: dict = field(repr=False, default_factory=dict)

    @property
    def n_corners(self) -> int:
        return len(self.plane_id)

    def corner_index(self, plane: int, row: int, col: int) -> int:
        return self._index[(plane, row, col)]

    def true_affinity(self, corner_id: int) -> Array:
        """Ground-truth 2x2 affinity at a corner (homography derivative)."""
        return self.affinity[corner_id]


@dataclass(frozen=True)
class CorrespondenceSet:
    """Pipeline input: pixel pairs, their grid identity, and directions."""

    p1: Array
    p2: Array
    plane_id: Array
    row: Array
    col: Array
    observations: list[DirectionObservation]


def _sample_pose(cfg: SceneConfig, rng: np.random.Generator) -> tuple[Array, Array]:
    """Rotation and camera-2 center for the configured pose family."""
    kind = cfg.pose_kind
    if kind is PoseKind.GENERAL:
        lim = np.radians(cfg.general_euler_limit_deg)
        angles = rng.uniform(-lim, lim, size=3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        return euler_rotation(*angles), cfg.baseline * direction
    if kind is PoseKind.PLANAR:
        rot = cfg.planar_rotation_deg
        if rot is None:
            rot = rng.uniform(-10.0, 10.0)
        phi = cfg.planar_direction_deg
        if phi is None:
            phi = rng.uniform(-45.0, 45.0)
        R = euler_rotation(0.0, np.radians(rot), 0.0)
        C2 = cfg.baseline * np.array([np.cos(np.radians(phi)), 0.0, np.sin(np.radians(phi))])
        return R, C2
    if kind is PoseKind.STANDARD_STEREO:
        return np.eye(3), np.array([cfg.baseline, 0.0, 0.0])
    if kind is PoseKind.FORWARD:
        return np.eye(3), np.array([0.0, 0.0, cfg.baseline])
    raise InvalidConfig(f"unknown pose kind {kind!r}")


def _board_grids(cfg: SceneConfig):
    """World corners, per-plane normals and offsets for the 3-plane target.

    Plane #1 faces the camera at Z = distance; plane #2 is the horizontal
    plane below the axis (image Y points down); plane #3 is the vertical
    wall to the left. Grid axes are rotated in-plane by the configured
    angles; normals point toward camera 1 and the planes satisfy
    n . X + offset = 0.
    """
    s = cfg.square_size
    rows, cols = cfg.board_rows, cfg.board_cols
    hx = (cols - 1) / 2.0
    hy = (rows - 1) / 2.0
    D = cfg.distance
    clear = cfg.clearance_squares * s
    mid_z = D - 5.0 * s

    normals = np.array([[0.0, 0.0, -1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
    offsets = np.array([D, clear, clear])
    centers = np.array([
        [0.0, 0.0, D],
        [0.0, clear, mid_z],
        [-clear, 0.0, mid_z],
    ])
    axes0 = np.array([
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0]],
        [[0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
    ])

    ii, jj = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    boards = []
    for k in range(3):
        theta = np.radians(cfg.grid_rotations_deg[k])
        eh = np.cos(theta) * axes0[k, 0] + np.sin(theta) * axes0[k, 1]
        ev = -np.sin(theta) * axes0[k, 0] + np.cos(theta) * axes0[k, 1]
        boards.append(
            centers[k]
            + (jj - hx)[:, None] * s * eh
            + (ii - hy)[:, None] * s * ev
        )
    world = np.vstack(boards)
    plane_id = np.repeat([1, 2, 3], rows * cols)
    row = np.tile(ii, 3)
    col = np.tile(jj, 3)
    return world, plane_id, row, col, normals, offsets


def generate_scene(cfg: SceneConfig) -> GroundTruth:
    """Deterministically build the scene for a config and its seed."""
    rng = np.random.default_rng(cfg.rng_seed)
    K = intrinsics(cfg.focal, cfg.principal[0], cfg.principal[1])
    R, C2 = _sample_pose(cfg, rng)
    pose = Pose(R, -R @ C2)
    cam1 = compose_camera(K, Pose(np.eye(3), np.zeros(3)))
    cam2 = compose_camera(K, pose)

    world, plane_id, row, col, plane_normals, plane_offsets = _board_grids(cfg)
    depth1 = world[:, 2]
    depth2 = world @ pose.R[2] + pose.t[2]
    if np.any(depth1 <= 0) or np.any(depth2 <= 0):
        raise CornersBehindCamera("pose places chessboard corners behind a camera")
    if np.any(plane_normals @ C2 + plane_offsets <= 0):
        raise InvalidConfig(
            "camera 2 crosses a chessboard plane; increase clearance_squares "
            "or reduce the translation magnitude"
        )
    p1 = project(cam1, world)
    p2 = project(cam2, world)

    homographies = np.stack([
        homography_from_plane(cam1, cam2, plane_normals[k], plane_offsets[k])
        for k in range(3)
    ])
    affinity = np.empty((len(world), 2, 2))
    for i in range(len(world)):
        affinity[i] = affine_from_homography(homographies[plane_id[i] - 1], p1[i]).A

    if cfg.position_noise_px > 0:
        p1 = p1 + rng.normal(scale=cfg.position_noise_px, size=p1.shape)
        p2 = p2 + rng.normal(scale=cfg.position_noise_px, size=p2.shape)

    F = fundamental_from_cameras(cam1, cam2)
    E = skew(pose.t) @ pose.R

    index = {
        (int(plane_id[i]), int(row[i]), int(col[i])): i for i in range(len(world))
    }
    return GroundTruth(
        config=cfg,
        K=K,
        cam1=cam1,
        cam2=cam2,
        pose=pose,
        F=F,
        E=E,
        plane_normals=plane_normals,
        plane_offsets=plane_offsets,
        homographies=homographies,
        plane_id=plane_id,
        row=row,
        col=col,
        world=world,
        p1=p1,
        p2=p2,
        affinity=affinity,
        normal=plane_normals[plane_id - 1],
        _index=index,
    )


def _rotate(d: Array, angle: float) -> Array:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])


def _neighbor_steps(cfg: SceneConfig, row: int, col: int) -> tuple[int, int]:
    """Grid steps toward the neighbors used for directions at this corner.

    Interior corners step +1 in row and col (the diagonal is the
    top-left-to-bottom-right one); edge corners step backwards, which only
    flips direction signs and changes nothing for the estimators.
    """
    sh = 1 if col + 1 < cfg.board_cols else -1
    sv = 1 if row + 1 < cfg.board_rows else -1
    return sv, sh


def observe_directions(
    gt: GroundTruth, sigma_deg: float, rng_seed: int
) -> list[DirectionObservation]:
    """Per-corner direction observations with angular noise.

    Image-1 directions are exact corner-to-corner segments; image-2
    directions carry the direction of the affinity-mapped segment and the
    scale is the implied length ratio, so alpha * d2 = A d1 holds exactly at
    zero noise. Noise rotates every direction in every image independently
    by N(0, sigma^2) degrees; lengths (and therefore scales) are untouched.
    """
    if sigma_deg < 0:
        raise InvalidConfig("noise spread must be non-negative")
    rng = np.random.default_rng(rng_seed)
    sigma = np.radians(sigma_deg)
    cfg = gt.config
    out = []
    for i in range(gt.n_corners):
        plane = int(gt.plane_id[i])
        r, c = int(gt.row[i]), int(gt.col[i])
        sv, sh = _neighbor_steps(cfg, r, c)
        steps = {"h": (0, sh), "v": (sv, 0), "d": (sv, sh)}
        pairs = {}
        for key in ("h", "v", "d"):
            dr, dc = steps[key]
            j = gt.corner_index(plane, r + dr, c + dc)
            d1 = gt.p1[j] - gt.p1[i]
            mapped = gt.affinity[i] @ d1
            alpha = np.linalg.norm(mapped) / np.linalg.norm(d1)
            d2 = mapped / alpha
            if sigma > 0:
                d1 = _rotate(d1, rng.normal(0.0, sigma))
                d2 = _rotate(d2, rng.normal(0.0, sigma))
            pairs[key] = DirectionPair(d1, d2, float(alpha))
        out.append(DirectionObservation(
            corner_id=i,
            horizontal=pairs["h"],
            vertical=pairs["v"],
            diagonal=pairs["d"],
            noise_applied=sigma_deg > 0,
        ))
    return out


def correspondence_set(
    gt: GroundTruth, observations: list[DirectionObservation]
) -> CorrespondenceSet:
    """Bundle the measured quantities a reconstruction is allowed to see."""
    if len(observations) != gt.n_corners:
        raise ValueError("observation list does not cover every corner")
    return CorrespondenceSet(
        p1=gt.p1,
        p2=gt.p2,
        plane_id=gt.plane_id,
        row=gt.row,
        col=gt.col,
        observations=observations,
    )


# --- serialization (schema 1) -------------------------------------------------

def _pair_to_dict(dp: DirectionPair) -> dict:
    return {
        "d1": [float(v) for v in dp.d1],
        "d2": [float(v) for v in dp.d2],
        "scale": None if dp.scale is None else float(dp.scale),
    }


def _pair_from_dict(d: dict) -> DirectionPair:
    return DirectionPair(np.array(d["d1"]), np.array(d["d2"]), d["scale"])


def scene_to_dict(
    gt: GroundTruth,
    observations: list[DirectionObservation] | None = None,
    sigma_deg: float = 0.0,
    noise_seed: int = 0,
) -> dict:
    cfg = gt.config
    doc = {
        "schema": SCHEMA_VERSION,
        "config": {
            "pose_kind": cfg.pose_kind.value,
            "board_rows": cfg.board_rows,
            "board_cols": cfg.board_cols,
            "square_size": cfg.square_size,
            "baseline": cfg.baseline,
            "distance": cfg.distance,
            "focal": cfg.focal,
            "principal": list(cfg.principal),
            "general_euler_limit_deg": cfg.general_euler_limit_deg,
            "planar_rotation_deg": cfg.planar_rotation_deg,
            "planar_direction_deg": cfg.planar_direction_deg,
            "grid_rotations_deg": list(cfg.grid_rotations_deg),
            "clearance_squares": cfg.clearance_squares,
            "position_noise_px": cfg.position_noise_px,
            "rng_seed": cfg.rng_seed,
        },
        "intrinsics": {"K1": gt.K.ravel().tolist(), "K2": gt.K.ravel().tolist()},
        "cameras": {"cam1": gt.cam1.flat(), "cam2": gt.cam2.flat()},
        "pose": {"R": gt.pose.R.ravel().tolist(), "t": gt.pose.t.tolist()},
        "fundamental": gt.F.ravel().tolist(),
        "essential": gt.E.ravel().tolist(),
        "planes": [
            {
                "id": k + 1,
                "normal": gt.plane_normals[k].tolist(),
                "offset": float(gt.plane_offsets[k]),
                "homography": gt.homographies[k].ravel().tolist(),
            }
            for k in range(3)
        ],
        "corners": [
            {
                "id": i,
                "plane": int(gt.plane_id[i]),
                "row": int(gt.row[i]),
                "col": int(gt.col[i]),
                "world": gt.world[i].tolist(),
                "p1": gt.p1[i].tolist(),
                "p2": gt.p2[i].tolist(),
                "affinity": gt.affinity[i].ravel().tolist(),
                "normal": gt.normal[i].tolist(),
            }
            for i in range(gt.n_corners)
        ],
        "observations": None,
    }
    if observations is not None:
        doc["observations"] = {
            "sigma_deg": float(sigma_deg),
            "rng_seed": int(noise_seed),
            "corners": [
                {
                    "corner": o.corner_id,
                    "noise_applied": o.noise_applied,
                    "horizontal": _pair_to_dict(o.horizontal),
                    "vertical": _pair_to_dict(o.vertical),
                    "diagonal": _pair_to_dict(o.diagonal),
                }
                for o in observations
            ],
        }
    return doc


def scene_from_dict(doc: dict) -> tuple[GroundTruth, list[DirectionObservation] | None]:
    if doc.get("schema") != SCHEMA_VERSION:
        raise InvalidConfig(f"unsupported scene schema {doc.get('schema')!r}")
    c = doc["config"]
    cfg = SceneConfig(
        pose_kind=PoseKind(c["pose_kind"]),
        board_rows=c["board_rows"],
        board_cols=c["board_cols"],
        square_size=c["square_size"],
        baseline=c["baseline"],
        distance=c["distance"],
        focal=c["focal"],
        principal=tuple(c["principal"]),
        general_euler_limit_deg=c["general_euler_limit_deg"],
        planar_rotation_deg=c["planar_rotation_deg"],
        planar_direction_deg=c["planar_direction_deg"],
        grid_rotations_deg=tuple(c["grid_rotations_deg"]),
        clearance_squares=c["clearance_squares"],
        position_noise_px=c["position_noise_px"],
        rng_seed=c["rng_seed"],
    )
    corners = doc["corners"]
    n = len(corners)
    plane_id = np.array([k["plane"] for k in corners], dtype=int)
    row = np.array([k["row"] for k in corners], dtype=int)
    col = np.array([k["col"] for k in corners], dtype=int)
    world = np.array([k["world"] for k in corners], dtype=float)
    p1 = np.array([k["p1"] for k in corners], dtype=float)
    p2 = np.array([k["p2"] for k in corners], dtype=float)
    affinity = np.array([k["affinity"] for k in corners], dtype=float).reshape(n, 2, 2)
    normal = np.array([k["normal"] for k in corners], dtype=float)
    planes = doc["planes"]
    index = {(int(plane_id[i]), int(row[i]), int(col[i])): i for i in range(n)}
    gt = GroundTruth(
        config=cfg,
        K=np.array(doc["intrinsics"]["K1"], dtype=float).reshape(3, 3),
        cam1=CameraP(np.array(doc["cameras"]["cam1"], dtype=float)),
        cam2=CameraP(np.array(doc["cameras"]["cam2"], dtype=float)),
        pose=Pose(np.array(doc["pose"]["R"]).reshape(3, 3), np.array(doc["pose"]["t"])),
        F=np.array(doc["fundamental"], dtype=float).reshape(3, 3),
        E=np.array(doc["essential"], dtype=float).reshape(3, 3),
        plane_normals=np.array([p["normal"] for p in planes], dtype=float),
        plane_offsets=np.array([p["offset"] for p in planes], dtype=float),
        homographies=np.array([p["homography"] for p in planes], dtype=float).reshape(3, 3, 3),
        plane_id=plane_id,
        row=row,
        col=col,
        world=world,
        p1=p1,
        p2=p2,
        affinity=affinity,
        normal=normal,
        _index=index,
    )
    obs_doc = doc.get("observations")
    observations = None
    if obs_doc is not None:
        observations = [
            DirectionObservation(
                corner_id=o["corner"],
                horizontal=_pair_from_dict(o["horizontal"]),
                vertical=_pair_from_dict(o["vertical"]),
                diagonal=_pair_from_dict(o["diagonal"]),
                noise_applied=o["noise_applied"],
            )
            for o in obs_doc["corners"]
        ]
    return gt, observations


def save_scene(path, gt: GroundTruth, observations=None, sigma_deg=0.0, noise_seed=0):
    with open(path, "w") as f:
        json.dump(
            scene_to_dict(gt, observations, sigma_deg, noise_seed),
            f,
            indent=1,
            sort_keys=True,
        )
        f.write("\n")


def load_scene(path) -> tuple[GroundTruth, list[DirectionObservation] | None]:
    with open(path) as f:
        return scene_from_dict(json.load(f))
