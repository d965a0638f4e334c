"""Exception types raised by the geometry and estimation routines."""


class GeometryError(Exception):
    """Base class for all geometric failure modes in this package."""


class PointAtInfinity(GeometryError):
    """Projection denominator vanishes: the point lies on the principal plane."""


class PointOnHorizon(GeometryError):
    """Homography denominator vanishes: the pixel maps to the line at infinity."""


class DegenerateDirections(GeometryError):
    """Supplied image directions are (numerically) linearly dependent."""


class SignMismatch(GeometryError):
    """Null-vector determinant sign cannot be reconciled with the requested one."""


class RankDeficient(GeometryError):
    """Homogeneous system has more than a one-dimensional null space."""


class NoAdmissibleEigenvector(GeometryError):
    """Every generalized eigenvector violates the determinant sign constraint."""


class SingularSystem(GeometryError):
    """Square estimator system is ill-conditioned beyond the accepted bound."""


class EpipoleAtPoint(GeometryError):
    """Epipolar-line normal vanishes: the match sits on an epipole."""


class DegeneratePlane(GeometryError):
    """Plane passes through a camera center; no induced homography exists."""


class DegenerateConfiguration(GeometryError):
    """Point matches do not determine a unique fundamental matrix."""


class NoCheiralityWinner(GeometryError):
    """No pose candidate places a majority of points in front of both cameras."""


class ParallelRays(GeometryError):
    """Back-projected rays are parallel; triangulation is undefined."""


class NoRealRoot(GeometryError):
    """Polynomial pair-correction has no usable real root (DLT fallback taken)."""


class IllConditioned(GeometryError):
    """Normal direction is ambiguous: near-null space has dimension > 1."""


class CollinearPoints(GeometryError):
    """Points span a line, not a plane."""


class InvalidConfig(GeometryError):
    """Scene or pipeline configuration is rejected."""


class CornersBehindCamera(GeometryError):
    """Generated scene places corners at non-positive depth in a view."""


class InsufficientStructure(GeometryError):
    """Reconstruction lacks the adjacent corner pairs needed for metric scaling."""


class EmptyGroup(GeometryError):
    """Statistics requested over an empty result group."""
