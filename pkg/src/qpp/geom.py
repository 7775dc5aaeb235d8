"""Small 3D vector helpers and rigid transforms."""

from dataclasses import dataclass

import numpy as np

from .errors import NonRigidTransform


def vec(*xyz):
    return np.array(xyz, dtype=float)


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-300:
        raise ValueError("cannot normalize zero vector")
    return v / n


def perp_basis(n):
    """Two unit vectors completing ``n`` to a right-handed frame."""
    n = unit(n)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(n[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = unit(np.cross(n, helper))
    v = np.cross(n, u)
    return u, v


def rotation_matrix(axis, angle):
    """Rodrigues rotation about a unit axis."""
    d = unit(axis)
    k = np.array([
        [0.0, -d[2], d[1]],
        [d[2], 0.0, -d[0]],
        [-d[1], d[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation-plus-translation map ``p -> R p + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))

    @staticmethod
    def identity():
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def translation(offset):
        return RigidTransform(np.eye(3), np.asarray(offset, dtype=float))

    @staticmethod
    def rotation(point, axis, angle):
        R = rotation_matrix(axis, angle)
        p = np.asarray(point, dtype=float)
        return RigidTransform(R, p - R @ p)

    def require_rigid(self, tol=1e-9):
        err = np.abs(self.R @ self.R.T - np.eye(3)).max()
        if err > tol or np.linalg.det(self.R) < 0.0:
            raise NonRigidTransform(f"transform is not rigid (orthogonality error {err:.2e})")

    def apply_point(self, p):
        p = np.asarray(p, dtype=float)
        return p @ self.R.T + self.t

    def apply_direction(self, d):
        return np.asarray(d, dtype=float) @ self.R.T

    def inverse(self):
        Rt = self.R.T
        return RigidTransform(Rt, -(Rt @ self.t))

    def compose(self, other):
        """Returns the transform ``self o other`` (other applied first)."""
        return RigidTransform(self.R @ other.R, self.R @ other.t + self.t)

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m

    def is_identity(self, tol=1e-14):
        return (np.abs(self.R - np.eye(3)).max() <= tol
                and np.abs(self.t).max() <= tol)
