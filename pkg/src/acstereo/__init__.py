"""Affine-correspondence stereo vision toolkit.

Estimation of local affine transformations from matched image directions,
two-view epipolar geometry, triangulation, surface-normal recovery, and a
seeded synthetic evaluation harness.
"""

from .affine import (
    ConstrainedSystem,
    EstimatorKind,
    det_hint_from_scaled_directions,
    epipolar_constraint_residual,
    estimate_2sdir,
    estimate_3sdir,
    estimate_det3udir,
    estimate_f2udir,
    estimate_f3udir,
    solve_det_constrained,
)
from .epipolar import (
    affine_from_homography,
    decompose_essential,
    epipolar_normals,
    essential_from_f,
    estimate_f_8point,
    fundamental_from_cameras,
    homography_from_plane,
    refine_f_with_acs,
    triangulate,
    triangulate_batch,
)
from .evaluation import (
    BoxStats,
    TrialResult,
    angular_error,
    fit_plane_pca,
    run_experiment,
    summarize,
)
from .geometry import (
    AffineCorrespondence,
    CameraP,
    DirectionPair,
    Pose,
    compose_camera,
    project,
    projection_gradients,
)
from .normals import OrientedPoint, WVectors, compute_w_vectors, estimate_normal
from .pipeline import (
    PipelineConfig,
    Reconstruction,
    apply_metric_scale,
    run_pipeline,
)
from .scene import (
    DirectionObservation,
    GroundTruth,
    PoseKind,
    SceneConfig,
    correspondence_set,
    generate_scene,
    observe_directions,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
