"""Six-parameter planar affine transforms and their algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Linear blocks with |det| at or below this are treated as non-invertible.
DET_EPS = 1e-8


class SingularTransformError(ValueError):
    """The 2x2 linear block of an affine transform is numerically singular."""


@dataclass(frozen=True)
class AffineParams:
    """A 2x3 affine matrix [[m1, m2, m3], [m4, m5, m6]].

    The 2x2 left block carries rotation/scale (dimensionless), the third
    column is the translation in pixels. Points map as p' = M p + t with
    p = (x, y) in pixel-center coordinates (x = column, y = row).
    """

    mu: np.ndarray

    def __post_init__(self) -> None:
        mu = np.array(self.mu, dtype=np.float64)
        if mu.shape != (2, 3):
            raise ValueError(f"affine parameters must be 2x3, got shape {mu.shape}")
        if not np.all(np.isfinite(mu)):
            raise ValueError("affine parameters must be finite")
        if abs(np.linalg.det(mu[:, :2])) <= DET_EPS:
            raise SingularTransformError("2x2 linear block is numerically singular")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @property
    def linear(self) -> np.ndarray:
        return self.mu[:, :2]

    @property
    def translation(self) -> np.ndarray:
        return self.mu[:, 2]

    def as_homogeneous(self) -> np.ndarray:
        """3x3 matrix with the implicit [0, 0, 1] row appended."""
        return np.vstack([self.mu, [0.0, 0.0, 1.0]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an ...x2 array of (x, y) points through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.linear.T + self.translation

    def is_identity(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.mu - AffineParams.identity().mu) <= tol))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffineParams):
            return NotImplemented
        return np.array_equal(self.mu, other.mu)


def affine_from_params(sx: float, sy: float, theta_deg: float, tx: float, ty: float) -> AffineParams:
    """Build the matrix [[sx*cos, -sx*sin, tx], [sy*sin, sy*cos, ty]].

    Angles are in degrees; sx and sy must be strictly positive.
    """
    if sx <= 0 or sy <= 0:
        raise ValueError(f"scale factors must be positive, got sx={sx}, sy={sy}")
    theta = math.radians(theta_deg)
    c, s = math.cos(theta), math.sin(theta)
    return AffineParams(np.array([[sx * c, -sx * s, tx], [sy * s, sy * c, ty]]))


def compose_affine(a: AffineParams, b: AffineParams) -> AffineParams:
    """Composition a o b: the result maps p the way a maps b(p)."""
    return AffineParams((a.as_homogeneous() @ b.as_homogeneous())[:2])


def invert_affine(phi: AffineParams) -> AffineParams:
    """Inverse transform; raises SingularTransformError if the linear block is degenerate."""
    m = phi.linear
    det = np.linalg.det(m)
    if abs(det) <= DET_EPS:
        raise SingularTransformError("cannot invert: linear block is numerically singular")
    m_inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    t_inv = -m_inv @ phi.translation
    return AffineParams(np.hstack([m_inv, t_inv[:, None]]))


def recenter_affine(phi: AffineParams, pivot: np.ndarray | tuple[float, float]) -> AffineParams:
    """Re-express a transform so its linear block pivots about `pivot` (x, y).

    The result maps p to M (p - pivot) + pivot + t, keeping M and t from `phi`.
    """
    px, py = float(pivot[0]), float(pivot[1])
    m = phi.linear
    t = phi.translation
    pivot_vec = np.array([px, py])
    new_t = pivot_vec - m @ pivot_vec + t
    return AffineParams(np.hstack([m, new_t[:, None]]))


def shift_affine_frame(phi: AffineParams, offset: np.ndarray | tuple[float, float]) -> AffineParams:
    """Rewrite a transform into a coordinate frame translated by `offset` (x, y).

    If q = p - offset, the returned transform maps q exactly where `phi` maps p,
    expressed in the shifted frame.
    """
    off = np.array([float(offset[0]), float(offset[1])])
    m = phi.linear
    new_t = m @ off + phi.translation - off
    return AffineParams(np.hstack([m, new_t[:, None]]))


def write_affine_text(path, phi: AffineParams) -> None:
    """Write the six coefficients m1..m6 row-major on a single line."""
    with open(path, "w") as f:
        f.write(" ".join(f"{v:.17g}" for v in phi.mu.ravel()) + "\n")


def read_affine_text(path) -> AffineParams:
    with open(path) as f:
        values = [float(tok) for tok in f.read().split()]
    if len(values) != 6:
        raise ValueError(f"affine text file must hold exactly 6 floats, got {len(values)}")
    return AffineParams(np.array(values).reshape(2, 3))
