"""Two-view epipolar geometry: fundamental/essential matrices, plane-induced
homographies and their pointwise affinities, pose recovery, triangulation.

Conventions: for a correspondence (p1, p2), x2h^T F x1h = 0 with xh = (u, v, 1).
Fundamental matrices are returned rank-2, Frobenius-normalized, with the
largest-magnitude entry positive (a deterministic sign choice).
"""
from __future__ import annotations

import numpy as np

from .exceptions import (
    DegenerateConfiguration,
    DegeneratePlane,
    EpipoleAtPoint,
    NoCheiralityWinner,
    ParallelRays,
    PointOnHorizon,
)
from .geometry import AffineCorrespondence, CameraP, Pose, homogenize, skew

Array = np.ndarray


def _canonical(F: Array) -> Array:
    """Frobenius-normalize and fix the overall sign deterministically."""
    F = F / np.linalg.norm(F)
    flat = F.ravel()
    lead = flat[np.argmax(np.abs(flat))]
    return F if lead >= 0 else -F


def _force_rank2(F: Array) -> Array:
    U, s, Vt = np.linalg.svd(F)
    s = s.copy()
    s[2] = 0.0
    return U @ np.diag(s) @ Vt


def epipolar_normals(F: Array, p1, p2) -> tuple[Array, Array]:
    """Leading two line coordinates of the epipolar lines at a match.

    Returns (n1, n2): n2 from the line F (p1;1) in image 2, n1 from
    F^T (p2;1) in image 1. The magnitudes matter downstream, so the vectors
    are deliberately not normalized. Zero vectors are returned at epipoles;
    callers that cannot tolerate them must test.
    """
    F = np.asarray(F, dtype=float)
    l2 = homogenize(p1) @ F.T
    l1 = homogenize(p2) @ F
    return l1[..., :2], l2[..., :2]


def affine_from_homography(H: Array, p1) -> AffineCorrespondence:
    """Map a pixel through H and differentiate the map there.

    The affinity is the exact 2x2 Jacobian of the inhomogeneous homography
    map at p1 (validated against central finite differences in the tests).
    """
    H = np.asarray(H, dtype=float)
    p1 = np.asarray(p1, dtype=float).reshape(2)
    p1h = np.append(p1, 1.0)
    s = H[2] @ p1h
    if abs(s) <= 1e-12 * np.linalg.norm(H[2]) * np.linalg.norm(p1h):
        raise PointOnHorizon("pixel maps to the line at infinity")
    u2 = (H[0] @ p1h) / s
    v2 = (H[1] @ p1h) / s
    A = np.array([
        [H[0, 0] - H[2, 0] * u2, H[0, 1] - H[2, 1] * u2],
        [H[1, 0] - H[2, 0] * v2, H[1, 1] - H[2, 1] * v2],
    ]) / s
    return AffineCorrespondence(p1, np.array([u2, v2]), A)


def homography_from_plane(cam1: CameraP, cam2: CameraP, normal, offset: float) -> Array:
    """Homography induced by the plane {X : n.X + d = 0} between two views.

    Built by back-projecting image-1 rays onto the plane and reprojecting
    into image 2; exact for any pair of finite projective cameras.
    """
    n = np.asarray(normal, dtype=float).reshape(3)
    pi = np.append(n, float(offset))
    C1 = np.linalg.svd(cam1.P)[2][-1]
    depth1 = pi @ C1
    if abs(depth1) <= 1e-12 * np.linalg.norm(pi) * np.linalg.norm(C1):
        raise DegeneratePlane("plane passes through camera 1 center")
    back = (np.eye(4) - np.outer(C1, pi) / depth1) @ np.linalg.pinv(cam1.P)
    H = cam2.P @ back
    if abs(np.linalg.det(H)) <= 1e-12 * np.linalg.norm(H) ** 3:
        raise DegeneratePlane("plane passes through camera 2 center")
    return _canonical(H)


def _normalizing_transform(x: Array) -> Array:
    """Similarity moving the centroid to the origin, mean radius to sqrt(2)."""
    c = x.mean(axis=0)
    dist = np.linalg.norm(x - c, axis=1).mean()
    if dist <= 0:
        raise DegenerateConfiguration("coincident points cannot be normalized")
    s = np.sqrt(2.0) / dist
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _pc_rows(x1h: Array, x2h: Array) -> Array:
    """One x2^T F x1 = 0 row per match, F flattened row-major."""
    return (x2h[:, :, None] * x1h[:, None, :]).reshape(len(x1h), 9)


def estimate_f_8point(x1, x2) -> Array:
    """Normalized eight-point fundamental matrix estimate.

    Points are Hartley-normalized per image, the linear system is solved by
    SVD, rank 2 is enforced, and the result is denormalized and canonically
    scaled.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=float).reshape(-1, 2)
    if len(x1) != len(x2) or len(x1) < 8:
        raise ValueError("need at least 8 point matches")
    T1 = _normalizing_transform(x1)
    T2 = _normalizing_transform(x2)
    x1h = homogenize(x1) @ T1.T
    x2h = homogenize(x2) @ T2.T
    rows = _pc_rows(x1h, x2h)
    return _solve_f_linear(rows, T1, T2)


def _solve_f_linear(rows: Array, T1: Array, T2: Array) -> Array:
    _, s, Vt = np.linalg.svd(rows)
    s9 = np.zeros(9)
    s9[: len(s)] = s
    if s9[7] <= 1e-10 * s9[0]:
        raise DegenerateConfiguration("point configuration leaves F ambiguous")
    Fn = Vt[-1].reshape(3, 3)
    F = T2.T @ _force_rank2(Fn) @ T1
    return _canonical(_force_rank2(F))


def ac_constraint_rows(ac: AffineCorrespondence) -> Array:
    """Two rows, linear in the 9 entries of F, expressing A^T n2 = -n1.

    Substituting the epipolar-line normals n2 = (F (p1;1))_{1:2} and
    n1 = (F^T (p2;1))_{1:2} turns the constraint into two linear equations
    in F for a known affinity.
    """
    u1, v1 = ac.p1
    u2, v2 = ac.p2
    a1, a2, a3, a4 = ac.A.ravel()
    return np.array([
        [a1 * u1 + u2, a1 * v1, a1, a3 * u1 + v2, a3 * v1, a3, 1.0, 0.0, 0.0],
        [a2 * u1, a2 * v1 + u2, a2, a4 * u1, a4 * v1 + v2, a4, 0.0, 1.0, 0.0],
    ])


def refine_f_with_acs(x1, x2, acs: list[AffineCorrespondence], F0: Array) -> Array:
    """Joint linear fundamental estimate from point matches and affinities.

    Each point match contributes its epipolar row; each affine correspondence
    adds the two rows of ``ac_constraint_rows``. Everything is expressed in
    Hartley-normalized coordinates (the affinities rescale by the ratio of
    the two image scales), and the affinity rows are normalized to unit row
    norm so the two row families are commensurable. F0 only orients the sign
    of the result.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=float).reshape(-1, 2)
    if len(x1) + 2 * len(acs) < 9:
        raise ValueError("need at least 9 constraint rows")
    T1 = _normalizing_transform(x1) if len(x1) else np.eye(3)
    T2 = _normalizing_transform(x2) if len(x2) else np.eye(3)
    s1, s2 = T1[0, 0], T2[0, 0]
    blocks = []
    if len(x1):
        blocks.append(_pc_rows(homogenize(x1) @ T1.T, homogenize(x2) @ T2.T))
    for ac in acs:
        p1n = (T1 @ np.append(ac.p1, 1.0))[:2]
        p2n = (T2 @ np.append(ac.p2, 1.0))[:2]
        acn = AffineCorrespondence(p1n, p2n, (s2 / s1) * ac.A)
        r = ac_constraint_rows(acn)
        r /= np.linalg.norm(r, axis=1, keepdims=True)
        blocks.append(r)
    F = _solve_f_linear(np.vstack(blocks), T1, T2)
    if np.sum(F * np.asarray(F0, dtype=float)) < 0:
        F = -F
    return F


def essential_from_f(F: Array, K1, K2) -> Array:
    """E = K2^T F K1 projected onto the essential manifold."""
    K1 = np.asarray(K1, dtype=float)
    K2 = np.asarray(K2, dtype=float)
    E = K2.T @ np.asarray(F, dtype=float) @ K1
    U, s, Vt = np.linalg.svd(E)
    sigma = (s[0] + s[1]) / 2.0
    return U @ np.diag([sigma, sigma, 0.0]) @ Vt


def fundamental_from_cameras(cam1: CameraP, cam2: CameraP) -> Array:
    """Exact fundamental matrix of a calibrated-or-not projective camera pair."""
    C1 = np.linalg.svd(cam1.P)[2][-1]
    e2 = cam2.P @ C1
    F = skew(e2) @ cam2.P @ np.linalg.pinv(cam1.P)
    return _canonical(_force_rank2(F))


def _dlt_points(P1: Array, P2: Array, x1: Array, x2: Array) -> Array:
    """Batched linear triangulation; returns homogeneous (N, 4) solutions."""
    rows = np.stack([
        x1[:, 0, None] * P1[2] - P1[0],
        x1[:, 1, None] * P1[2] - P1[1],
        x2[:, 0, None] * P2[2] - P2[0],
        x2[:, 1, None] * P2[2] - P2[1],
    ], axis=1)
    return np.linalg.svd(rows)[2][:, -1, :]


def decompose_essential(E: Array, x1, x2, K1, K2) -> Pose:
    """Select the (R, t) candidate, |t| = 1, that passes the cheirality test.

    The four candidates from the SVD of E are scored by triangulating the
    sample matches; the winner must place a strict majority of them in front
    of both cameras.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=float).reshape(-1, 2)
    if len(x1) == 0:
        raise ValueError("need at least one sample match")
    K1 = np.asarray(K1, dtype=float)
    K2 = np.asarray(K2, dtype=float)
    U, _, Vt = np.linalg.svd(np.asarray(E, dtype=float))
    if np.linalg.det(U) < 0:
        U = U * np.array([1.0, 1.0, -1.0])
    if np.linalg.det(Vt) < 0:
        Vt = Vt * np.array([[1.0], [1.0], [-1.0]])
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    t = U[:, 2]
    P1 = K1 @ np.hstack([np.eye(3), np.zeros((3, 1))])
    best = None
    for R in (U @ W @ Vt, U @ W.T @ Vt):
        for tc in (t, -t):
            P2 = K2 @ np.hstack([R, tc[:, None]])
            Xh = _dlt_points(P1, P2, x1, x2)
            w = Xh[:, 3]
            w = np.where(w == 0, 1e-300, w)
            X = Xh[:, :3] / w[:, None]
            z1 = X[:, 2]
            z2 = X @ R[2] + tc[2]
            front = int(np.count_nonzero((z1 > 0) & (z2 > 0)))
            if best is None or front > best[0]:
                best = (front, R, tc)
    front, R, tc = best
    if front * 2 <= len(x1):
        raise NoCheiralityWinner("no candidate passes the cheirality vote")
    return Pose(R, tc)


def _closest_point_on_line(line: Array) -> Array:
    """Homogeneous point on a line closest to the origin."""
    lu, lv, lw = line
    return np.array([-lu * lw, -lv * lw, lu * lu + lv * lv])


def _correct_pair(F: Array, p1: Array, p2: Array) -> tuple[Array, Array, bool]:
    """Move a match onto the epipolar constraint with minimal pixel motion.

    Parameterizes the pencil of epipolar lines through a rotated, translated
    frame, minimizes the squared pixel displacement along the resulting
    one-parameter family (a degree-6 polynomial in the parameter), and drops
    both points onto the optimal line pair. Returns the corrected pair and a
    flag that is True when the polynomial step failed and the original pair
    was kept (callers then rely on the plain linear lift).
    """
    T1 = np.array([[1.0, 0.0, p1[0]], [0.0, 1.0, p1[1]], [0.0, 0.0, 1.0]])
    T2 = np.array([[1.0, 0.0, p2[0]], [0.0, 1.0, p2[1]], [0.0, 0.0, 1.0]])
    Fp = T2.T @ F @ T1
    U, _, Vt = np.linalg.svd(Fp)
    e1 = Vt[-1]
    e2 = U[:, -1]
    n1 = np.hypot(e1[0], e1[1])
    n2 = np.hypot(e2[0], e2[1])
    if n1 == 0 or n2 == 0:
        return p1, p2, True
    e1 = e1 / n1
    e2 = e2 / n2
    R1 = np.array([[e1[0], e1[1], 0.0], [-e1[1], e1[0], 0.0], [0.0, 0.0, 1.0]])
    R2 = np.array([[e2[0], e2[1], 0.0], [-e2[1], e2[0], 0.0], [0.0, 0.0, 1.0]])
    Fpp = R2 @ Fp @ R1.T
    f1, f2 = float(e1[2]), float(e2[2])
    # plain floats: numpy scalars do not defer to poly1d arithmetic
    a, b, c, d = (float(Fpp[1, 1]), float(Fpp[1, 2]),
                  float(Fpp[2, 1]), float(Fpp[2, 2]))

    t_poly = np.poly1d([1.0, 0.0])
    ab = np.poly1d([a, b])
    cd = np.poly1d([c, d])
    one_f1t = np.poly1d([f1 * f1, 0.0, 1.0])
    g = t_poly * (ab * ab + f2 * f2 * cd * cd) ** 2 \
        - (a * d - b * c) * one_f1t * one_f1t * ab * cd
    if g.order < 1:
        return p1, p2, True
    roots = np.roots(g.coeffs)
    real = roots[np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))].real
    if len(real) == 0:
        return p1, p2, True

    def cost(t):
        num2 = (c * t + d) ** 2
        den2 = (a * t + b) ** 2 + f2 * f2 * num2
        if den2 == 0:
            return np.inf
        return t * t / (1.0 + f1 * f1 * t * t) + num2 / den2

    costs = np.array([cost(t) for t in real])
    t_best = real[int(np.argmin(costs))]
    cost_inf = np.inf
    if f1 != 0.0 and (a * a + f2 * f2 * c * c) != 0.0:
        cost_inf = 1.0 / (f1 * f1) + c * c / (a * a + f2 * f2 * c * c)
    if cost_inf < costs.min():
        return p1, p2, True

    l1 = np.array([t_best * f1, 1.0, -t_best])
    l2 = np.array([-f2 * (c * t_best + d), a * t_best + b, c * t_best + d])
    x1h = T1 @ R1.T @ _closest_point_on_line(l1)
    x2h = T2 @ R2.T @ _closest_point_on_line(l2)
    if x1h[2] == 0 or x2h[2] == 0:
        return p1, p2, True
    return x1h[:2] / x1h[2], x2h[:2] / x2h[2], False


def triangulate_batch(cam1: CameraP, cam2: CameraP, x1, x2) -> tuple[Array, Array]:
    """Optimal two-view triangulation of many matches at once.

    Pairs already satisfying the epipolar constraint (to machine precision,
    scale-relative) skip the polynomial correction. Returns world points and
    a boolean mask of matches that fell back to the uncorrected linear lift.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=float).reshape(-1, 2)
    if np.allclose(cam1.P / np.linalg.norm(cam1.P), cam2.P / np.linalg.norm(cam2.P)):
        raise ParallelRays("identical cameras")
    F = fundamental_from_cameras(cam1, cam2)
    x1h = homogenize(x1)
    x2h = homogenize(x2)
    l2 = x1h @ F.T
    l1 = x2h @ F
    res = np.abs(np.sum(x2h * l2, axis=1))
    scale = np.maximum(
        np.linalg.norm(l1[:, :2], axis=1) + np.linalg.norm(l2[:, :2], axis=1), 1e-300
    )
    needs_fix = res / scale > 1e-10
    x1c = x1.copy()
    x2c = x2.copy()
    fallback = np.zeros(len(x1), dtype=bool)
    for i in np.flatnonzero(needs_fix):
        x1c[i], x2c[i], fallback[i] = _correct_pair(F, x1[i], x2[i])
    Xh = _dlt_points(cam1.P, cam2.P, x1c, x2c)
    w = Xh[:, 3]
    bad = np.abs(w) <= 1e-12 * np.linalg.norm(Xh, axis=1)
    if np.any(bad):
        raise ParallelRays("triangulated point at infinity (parallel rays)")
    return Xh[:, :3] / w[:, None], fallback


def triangulate(cam1: CameraP, cam2: CameraP, p1, p2) -> tuple[Array, bool]:
    """Single-match wrapper around ``triangulate_batch``.

    Returns (world point, fallback flag); the flag is True when the optimal
    pair correction was abandoned and the plain linear lift was used.
    """
    X, flags = triangulate_batch(cam1, cam2, np.atleast_2d(p1), np.atleast_2d(p2))
    return X[0], bool(flags[0])


def sampson_errors(F: Array, x1, x2) -> Array:
    """First-order geometric (Sampson) distances of matches to the F manifold."""
    F = np.asarray(F, dtype=float)
    x1h = homogenize(np.asarray(x1, dtype=float).reshape(-1, 2))
    x2h = homogenize(np.asarray(x2, dtype=float).reshape(-1, 2))
    l2 = x1h @ F.T
    l1 = x2h @ F
    r = np.sum(x2h * l2, axis=1)
    den = l1[:, 0] ** 2 + l1[:, 1] ** 2 + l2[:, 0] ** 2 + l2[:, 1] ** 2
    return r * r / np.maximum(den, 1e-300)


def reprojection_errors(cam1: CameraP, cam2: CameraP, X, x1, x2) -> Array:
    """Symmetric pixel reprojection error of world points against matches."""
    from .geometry import project

    X = np.asarray(X, dtype=float).reshape(-1, 3)
    p1 = project(cam1, X)
    p2 = project(cam2, X)
    e1 = np.linalg.norm(p1 - np.asarray(x1, dtype=float).reshape(-1, 2), axis=1)
    e2 = np.linalg.norm(p2 - np.asarray(x2, dtype=float).reshape(-1, 2), axis=1)
    return e1 + e2
