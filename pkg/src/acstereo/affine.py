"""Estimators recovering the 2x2 local affinity of a correspondence from
matched image directions.

A direction pair (d1, d2) with scale alpha satisfies alpha * d2 = A @ d1;
when the scale is unknown it becomes an extra unknown per direction. Five
estimator variants are provided:

* two / three scaled directions (exact 4x4 solve / least squares),
* three unscaled directions plus a target determinant,
* fundamental-matrix-assisted variants using two or three unscaled
  directions together with the epipolar-normal constraint A^T n2 = -n1.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .epipolar import epipolar_normals
from .exceptions import (
    DegenerateDirections,
    EpipoleAtPoint,
    NoAdmissibleEigenvector,
    RankDeficient,
    SignMismatch,
    SingularSystem,
)
from .geometry import DirectionPair

Array = np.ndarray


class EstimatorKind(str, Enum):
    """The five direction-based affinity estimators."""

    F2UDIR = "F2UDIR"
    F3UDIR = "F3UDIR"
    DET3UDIR = "DET3UDIR"
    TWO_SDIR = "2SDIR"
    THREE_SDIR = "3SDIR"


@dataclass(frozen=True)
class ConstrainedSystem:
    """Homogeneous system M x ~ 0 over x = (a1..a4, alpha_1..alpha_N) with the
    side constraint a1*a4 - a2*a3 = s."""

    M: Array
    s: float

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2 or M.shape[1] < 7 or M.shape[0] < 6:
            raise ValueError("expected a (2N x 4+N) system with N >= 3")
        if self.s == 0:
            raise ValueError("target determinant must be nonzero")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "s", float(self.s))


def _check_independent(dirs: list[DirectionPair]) -> None:
    best = 0.0
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            di, dj = dirs[i].d1, dirs[j].d1
            denom = np.linalg.norm(di) * np.linalg.norm(dj)
            if denom == 0:
                continue
            best = max(best, abs(di[0] * dj[1] - di[1] * dj[0]) / denom)
    if best < 1e-10:
        raise DegenerateDirections("image-1 directions are linearly dependent")


def scaled_rows(dp: DirectionPair) -> tuple[Array, Array]:
    """Two equations alpha*d2 = A d1 as rows over (a1, a2, a3, a4) plus rhs."""
    if dp.scale is None:
        raise ValueError("direction pair has no scale")
    u, v = dp.d1
    M = np.array([[u, v, 0.0, 0.0], [0.0, 0.0, u, v]])
    rhs = dp.scale * dp.d2
    return M, rhs


def unscaled_rows(dp: DirectionPair) -> Array:
    """Two homogeneous rows over (a1..a4, alpha) for one unscaled pair."""
    u, v = dp.d1
    u2, v2 = dp.d2
    return np.array([
        [u, v, 0.0, 0.0, -u2],
        [0.0, 0.0, u, v, -v2],
    ])


def build_unscaled_system(dirs: list[DirectionPair], s: float) -> ConstrainedSystem:
    """Stack per-direction homogeneous blocks into the (2N x 4+N) matrix."""
    n = len(dirs)
    M = np.zeros((2 * n, 4 + n))
    for i, dp in enumerate(dirs):
        block = unscaled_rows(dp)
        M[2 * i : 2 * i + 2, :4] = block[:, :4]
        M[2 * i : 2 * i + 2, 4 + i] = block[:, 4]
    return ConstrainedSystem(M, s)


def scaled_direction_residual(A: Array, dirs: list[DirectionPair]) -> float:
    """max_i ||A d1_i - alpha_i d2_i|| over the scaled pairs."""
    A = np.asarray(A, dtype=float)
    return max(float(np.linalg.norm(A @ dp.d1 - dp.scale * dp.d2)) for dp in dirs)


def estimate_2sdir(dirs: list[DirectionPair]) -> Array:
    """Exact affinity from two scaled direction pairs (a 4x4 linear solve)."""
    if len(dirs) != 2:
        raise ValueError("expected exactly two direction pairs")
    _check_independent(dirs)
    blocks = [scaled_rows(dp) for dp in dirs]
    M = np.vstack([b[0] for b in blocks])
    rhs = np.concatenate([b[1] for b in blocks])
    return np.linalg.solve(M, rhs).reshape(2, 2)


def estimate_3sdir(dirs: list[DirectionPair]) -> Array:
    """Least-squares affinity from three scaled direction pairs (6 eq, 4 unk)."""
    if len(dirs) != 3:
        raise ValueError("expected exactly three direction pairs")
    _check_independent(dirs)
    blocks = [scaled_rows(dp) for dp in dirs]
    M = np.vstack([b[0] for b in blocks])
    rhs = np.concatenate([b[1] for b in blocks])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return sol.reshape(2, 2)


def _apply_det_scale(x: Array, s: float) -> Array:
    """Rescale a homogeneous solution so a1*a4 - a2*a3 == s, scales positive."""
    det = x[0] * x[3] - x[1] * x[2]
    a_norm = np.linalg.norm(x[:4])
    if a_norm == 0 or abs(det) <= 1e-14 * a_norm * a_norm:
        raise SignMismatch("solution determinant is numerically zero")
    if np.sign(det) != np.sign(s):
        raise SignMismatch("solution determinant sign contradicts the target")
    out = x * np.sqrt(s / det)
    if out[4:].sum() < 0:
        out = -out
    return out


def estimate_det3udir(dirs: list[DirectionPair], det_hint: float) -> Array:
    """Affinity from unscaled directions plus a known determinant.

    With exactly three directions the (6 x 7) system has a structural null
    vector whose free scale is fixed by the determinant; with more directions
    the constrained least-squares solver takes over.
    """
    if len(dirs) < 3:
        raise ValueError("need at least three direction pairs")
    if det_hint == 0:
        raise ValueError("determinant hint must be nonzero")
    _check_independent(dirs)
    sys_ = build_unscaled_system(dirs, det_hint)
    if len(dirs) > 3:
        A, _ = solve_det_constrained(sys_)
        return A
    _, sv, Vt = np.linalg.svd(sys_.M)
    if sv[-1] <= 1e-8 * sv[0]:
        raise RankDeficient("unscaled system has a null space of dimension > 1")
    x = _apply_det_scale(Vt[-1], det_hint)
    return x[:4].reshape(2, 2)


def solve_det_constrained(sys_: ConstrainedSystem) -> tuple[Array, Array]:
    """Minimize ||M x|| subject to a1*a4 - a2*a3 = s.

    Stationary points of the Lagrangian satisfy the generalized eigenproblem
    (M^T M) x = mu * B x where B is the (constant, rank-4) Hessian of the
    determinant constraint. Real eigenvectors whose determinant sign matches
    sign(s) are rescaled to satisfy the constraint exactly; the one with the
    smallest residual wins. Eigenvectors with the opposite determinant sign
    cannot be rescaled onto the constraint set and are discarded.

    Returns (A, scales); the scale entries are sign-fixed to be positive in
    aggregate, which resolves the +/-x ambiguity of the homogeneous system.
    """
    M = sys_.M
    dim = M.shape[1]
    MtM = M.T @ M
    B = np.zeros((dim, dim))
    B[0, 3] = B[3, 0] = 1.0
    B[1, 2] = B[2, 1] = -1.0
    eigvals, eigvecs = scipy.linalg.eig(MtM, B)
    best: tuple[float, Array] | None = None
    for k in range(len(eigvals)):
        if not np.isfinite(eigvals[k]):
            continue
        vec = eigvecs[:, k]
        lead = vec[np.argmax(np.abs(vec))]
        if lead == 0:
            continue
        vec = vec / (lead / abs(lead))
        if np.linalg.norm(vec.imag) > 1e-8 * np.linalg.norm(vec.real):
            continue
        x = vec.real
        try:
            x = _apply_det_scale(x, sys_.s)
        except SignMismatch:
            continue
        resid = float(np.linalg.norm(M @ x))
        if best is None or resid < best[0]:
            best = (resid, x)
    if best is None:
        raise NoAdmissibleEigenvector(
            "no generalized eigenvector matches the determinant sign"
        )
    x = best[1]
    return x[:4].reshape(2, 2), x[4:]


def _epipolar_rows(F: Array, p1, p2) -> tuple[Array, Array]:
    """Rows over (a1..a4) expressing A^T n2 = -n1, plus their rhs."""
    F = np.asarray(F, dtype=float)
    n1, n2 = epipolar_normals(F, p1, p2)
    fn = np.linalg.norm(F)
    s1 = np.linalg.norm(np.append(np.asarray(p1, float), 1.0))
    s2 = np.linalg.norm(np.append(np.asarray(p2, float), 1.0))
    if np.linalg.norm(n2) <= 1e-12 * fn * s1 or np.linalg.norm(n1) <= 1e-12 * fn * s2:
        raise EpipoleAtPoint("epipolar-line normal vanishes at the match")
    M = np.array([
        [n2[0], 0.0, n2[1], 0.0],
        [0.0, n2[0], 0.0, n2[1]],
    ])
    return M, -n1


def _f_system(F, p1, p2, dirs: list[DirectionPair]) -> tuple[Array, Array]:
    eM, erhs = _epipolar_rows(F, p1, p2)
    n = len(dirs)
    M = np.zeros((2 + 2 * n, 4 + n))
    rhs = np.zeros(2 + 2 * n)
    M[:2, :4] = eM
    rhs[:2] = erhs
    for i, dp in enumerate(dirs):
        block = unscaled_rows(dp)
        M[2 + 2 * i : 4 + 2 * i, :4] = block[:, :4]
        M[2 + 2 * i : 4 + 2 * i, 4 + i] = block[:, 4]
    return M, rhs


def estimate_f2udir(F, p1, p2, dirs: list[DirectionPair]) -> Array:
    """Affinity from a known fundamental matrix and two unscaled directions.

    The two epipolar rows and the four direction rows form a square system
    that is solved exactly, so the returned affinity satisfies
    A^T n2 = -n1 up to conditioning regardless of direction noise.
    """
    if len(dirs) != 2:
        raise ValueError("expected exactly two direction pairs")
    _check_independent(dirs)
    M, rhs = _f_system(F, p1, p2, dirs)
    if np.linalg.cond(M) > 1e12:
        raise SingularSystem("direction/epipolar system is near-singular")
    x = np.linalg.solve(M, rhs)
    return x[:4].reshape(2, 2)


def estimate_f3udir(F, p1, p2, dirs: list[DirectionPair]) -> Array:
    """Over-determined variant of ``estimate_f2udir`` with three directions.

    The 8x7 stacked system is solved in the least-squares sense with rows
    left unweighted: the epipolar-normal magnitudes are meaningful.
    """
    if len(dirs) != 3:
        raise ValueError("expected exactly three direction pairs")
    _check_independent(dirs)
    M, rhs = _f_system(F, p1, p2, dirs)
    if np.linalg.cond(M) > 1e12:
        raise SingularSystem("direction/epipolar system is near-singular")
    x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return x[:4].reshape(2, 2)


def epipolar_constraint_residual(A, F, p1, p2) -> float:
    """||A^T n2 + n1|| with unnormalized epipolar-line normals."""
    A = np.asarray(A, dtype=float)
    n1, n2 = epipolar_normals(F, p1, p2)
    return float(np.linalg.norm(A.T @ n2 + n1))


def det_hint_from_scaled_directions(dirs: list[DirectionPair]) -> float:
    """Determinant magnitude implied by three direction scales.

    The squared scale of a direction u is u^T (A^T A) u / ||u||^2, so three
    independent directions determine the Gram matrix A^T A linearly and with
    it |det A| = sqrt(det(A^T A)). Orientation-preserving affinities are
    assumed, so the positive root is returned. Falls back to the mean squared
    scale when the three directions are too close to pairwise parallel.
    """
    if len(dirs) != 3:
        raise ValueError("expected exactly three scaled direction pairs")
    if any(dp.scale is None for dp in dirs):
        raise ValueError("all direction pairs need scales")
    rows = []
    rhs = []
    for dp in dirs:
        u = dp.d1 / np.linalg.norm(dp.d1)
        rows.append([u[0] ** 2, 2.0 * u[0] * u[1], u[1] ** 2])
        rhs.append(dp.scale**2)
    rows = np.asarray(rows)
    rhs = np.asarray(rhs)
    fallback = float(np.mean(rhs))
    if abs(np.linalg.det(rows)) < 1e-12:
        return fallback
    g11, g12, g22 = np.linalg.solve(rows, rhs)
    det_sq = g11 * g22 - g12 * g12
    if det_sq <= 0:
        return fallback
    return float(np.sqrt(det_sq))


def mean_square_scale(dirs: list[DirectionPair]) -> float:
    """Mean of the squared direction scales (the crude determinant proxy)."""
    if any(dp.scale is None for dp in dirs):
        raise ValueError("all direction pairs need scales")
    return float(np.mean([dp.scale**2 for dp in dirs]))
