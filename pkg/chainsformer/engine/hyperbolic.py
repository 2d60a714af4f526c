"""Poincaré ball primitives.

Array functions work on the last axis and broadcast over leading axes; the
``PoincareVector`` wrappers add the dimension/curvature checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..const import BALL_MARGIN
from .exceptions import GeometryError, NonFiniteError

MIN_NORM = 1e-15


def _sq_norm(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=-1, keepdims=True)


def artanh(x: np.ndarray) -> np.ndarray:
    """arctanh with its argument kept inside (-1, 1)."""
    return np.arctanh(np.clip(x, -1.0 + 1e-15, 1.0 - 1e-15))


def arcosh(x: np.ndarray) -> np.ndarray:
    """arcosh in log1p form, accurate for arguments near 1."""
    z = np.maximum(np.asarray(x, dtype=np.float64) - 1.0, 0.0)
    return np.log1p(z + np.sqrt(z * (z + 2.0)))


def mobius_add_array(x: np.ndarray, y: np.ndarray, curvature: float = 1.0) -> np.ndarray:
    """x ⊕_c y on arrays."""
    c = curvature
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = _sq_norm(x)
    y2 = _sq_norm(y)
    num = (1 + 2 * c * xy + c * y2) * x + (1 - c * x2) * y
    denom = 1 + 2 * c * xy + c**2 * x2 * y2
    out = num / np.maximum(denom, MIN_NORM)
    return _pull_inside(out, c)


def _pull_inside(x: np.ndarray, curvature: float) -> np.ndarray:
    """Re-project points that rounding pushed onto or past the boundary."""
    if curvature <= 0:
        return x
    outside = curvature * _sq_norm(x) >= 1.0
    if not np.any(outside):
        return x
    return np.where(outside, project_array(x, curvature), x)


def distance_array(x: np.ndarray, y: np.ndarray, curvature: float = 1.0) -> np.ndarray:
    """Geodesic distance 2/√c · artanh(√c ‖(-x) ⊕ y‖), shape (...,)."""
    sqrt_c = np.sqrt(curvature)
    diff = mobius_add_array(-x, y, curvature)
    norm = np.sqrt(np.sum(diff * diff, axis=-1))
    return 2.0 / sqrt_c * artanh(sqrt_c * norm)


def distance_arcosh_array(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unit-curvature distance via arcosh(1 + 2‖x-y‖² / ((1-‖x‖²)(1-‖y‖²)))."""
    diff2 = np.sum((x - y) ** 2, axis=-1)
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    return arcosh(1.0 + 2.0 * diff2 / ((1.0 - x2) * (1.0 - y2)))


def log_map_origin_array(x: np.ndarray, curvature: float = 1.0) -> np.ndarray:
    """Log map at the origin: artanh(√c‖x‖) x / (√c‖x‖); the origin maps to 0."""
    sqrt_c = np.sqrt(curvature)
    norm = np.sqrt(_sq_norm(x))
    safe = np.maximum(norm, MIN_NORM)
    scale = np.where(norm > 0, artanh(sqrt_c * safe) / (sqrt_c * safe), 1.0)
    return scale * x


def project_array(v: np.ndarray, curvature: float = 1.0, margin: float = BALL_MARGIN) -> np.ndarray:
    """Rescale rows with ‖v‖ >= (1-margin)/√c onto that radius; other rows unchanged."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("cannot project a non-finite vector into the ball")
    radius = (1.0 - margin) / np.sqrt(curvature)
    norm = np.sqrt(_sq_norm(v))
    factor = np.where(norm >= radius, radius / np.maximum(norm, MIN_NORM), 1.0)
    return v * factor


@dataclass(frozen=True, eq=False)
class PoincareVector:
    """Point of the d-dimensional Poincaré ball with curvature -c."""

    coords: np.ndarray
    curvature: float = 1.0

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 1:
            raise GeometryError(f"expected a 1-d coordinate vector, got shape {coords.shape}")
        if self.curvature <= 0:
            raise GeometryError(f"curvature must be positive, got {self.curvature}")
        if not np.all(np.isfinite(coords)):
            raise NonFiniteError("non-finite Poincaré coordinates")
        if self.curvature * float(coords @ coords) >= 1.0:
            raise GeometryError("point lies outside the open ball")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        """Ambient dimension d."""
        return int(self.coords.shape[0])

    @classmethod
    def origin(cls, dim: int, curvature: float = 1.0) -> PoincareVector:
        """The ball's origin."""
        return cls(np.zeros(dim), curvature)


def _check_pair(x: PoincareVector, y: PoincareVector) -> None:
    if x.dim != y.dim:
        raise GeometryError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if x.curvature != y.curvature:
        raise GeometryError(f"curvature mismatch: {x.curvature} vs {y.curvature}")


def mobius_add(x: PoincareVector, y: PoincareVector) -> PoincareVector:
    """Möbius addition x ⊕ y."""
    _check_pair(x, y)
    return PoincareVector(mobius_add_array(x.coords, y.coords, x.curvature), x.curvature)


def distance(x: PoincareVector, y: PoincareVector) -> float:
    """Hyperbolic distance between two points."""
    _check_pair(x, y)
    return float(distance_array(x.coords, y.coords, x.curvature))


def distance_arcosh(x: PoincareVector, y: PoincareVector) -> float:
    """Closed arcosh form of the distance, valid at unit curvature."""
    _check_pair(x, y)
    if x.curvature != 1.0:
        raise GeometryError("the arcosh form only holds for curvature 1")
    return float(distance_arcosh_array(x.coords, y.coords))


def log_map_origin(x: PoincareVector) -> np.ndarray:
    """Tangent vector at the origin for x."""
    return log_map_origin_array(x.coords, x.curvature)


def project_to_ball(
    v: np.ndarray, curvature: float = 1.0, margin: float = BALL_MARGIN
) -> PoincareVector:
    """Bring an arbitrary finite vector strictly inside the ball."""
    return PoincareVector(project_array(np.asarray(v, dtype=np.float64), curvature, margin), curvature)
