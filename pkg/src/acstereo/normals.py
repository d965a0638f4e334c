"""Surface-normal recovery from an affine correspondence and two cameras.

For a point X on a surface with unit normal n, the local affinity between
the two projections is a ratio of normal projections onto five fixed
3-vectors built from the projection gradients:

    A = (1 / n.w5) * [[n.w1, n.w2], [n.w3, n.w4]]

with w1 = gv1 x gu2, w2 = gu2 x gu1, w3 = gv1 x gv2, w4 = gv2 x gu1 and
w5 = gv1 x gu1, where gu_i, gv_i are the gradients of the pixel coordinates
of view i with respect to (X, Y, Z). The pairings follow from eliminating
the tangent plane from the chain rule (triple-product identities) and are
pinned by the homography-derivative oracle in the tests. Inverting the
relation for n given a measured A is a 4x3 null-space problem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import IllConditioned
from .geometry import AffineCorrespondence, CameraP, projection_gradients

Array = np.ndarray


@dataclass(frozen=True)
class WVectors:
    """The five gradient cross products at one correspondence."""

    w1: Array
    w2: Array
    w3: Array
    w4: Array
    w5: Array

    def stack(self) -> Array:
        return np.stack([self.w1, self.w2, self.w3, self.w4, self.w5])


@dataclass(frozen=True)
class OrientedPoint:
    """Triangulated position with a unit, camera-facing surface normal."""

    position: Array
    normal: Array
    residual: float


def compute_w_vectors(cam1: CameraP, cam2: CameraP, p1, p2, X) -> WVectors:
    """Cross products of projection gradients entering the affinity ratio."""
    g1 = projection_gradients(cam1, p1, X)
    g2 = projection_gradients(cam2, p2, X)
    gu1, gv1 = g1
    gu2, gv2 = g2
    return WVectors(
        w1=np.cross(gv1, gu2),
        w2=np.cross(gu2, gu1),
        w3=np.cross(gv1, gv2),
        w4=np.cross(gv2, gu1),
        w5=np.cross(gv1, gu1),
    )


def affinity_from_normal(w: WVectors, normal) -> Array:
    """Forward map: the affinity induced by a given surface normal."""
    n = np.asarray(normal, dtype=float).reshape(3)
    denom = n @ w.w5
    if denom == 0:
        raise IllConditioned("normal is orthogonal to the reference vector")
    return np.array([[n @ w.w1, n @ w.w2], [n @ w.w3, n @ w.w4]]) / denom


def estimate_normal(
    ac: AffineCorrespondence, cam1: CameraP, cam2: CameraP, X
) -> OrientedPoint:
    """Recover the surface normal consistent with a measured affinity.

    Each affinity entry a_k gives one homogeneous equation
    n . (w_k - a_k w5) = 0; the unit minimizer of the stacked 4x3 system is
    the smallest right singular vector. Raises IllConditioned when the two
    smallest singular values are close (second near-null direction: the
    normal is not identifiable), which is typical for planes facing the
    camera under motion along the optical axis.
    """
    X = np.asarray(X, dtype=float).reshape(3)
    w = compute_w_vectors(cam1, cam2, ac.p1, ac.p2, X)
    a = ac.A.ravel()
    rows = np.stack([
        w.w1 - a[0] * w.w5,
        w.w2 - a[1] * w.w5,
        w.w3 - a[2] * w.w5,
        w.w4 - a[3] * w.w5,
    ])
    _, sv, Vt = np.linalg.svd(rows)
    if sv[1] <= 1e-6 * sv[0]:
        raise IllConditioned("normal direction is ambiguous at this match")
    n = Vt[-1]
    facing = n @ (cam1.center - X)
    if facing < 0:
        n = -n
    return OrientedPoint(position=X, normal=n, residual=float(sv[-1]))
