"""Quadric implicit surfaces.

A surface is the zero set of ``F(p) = p~^T Q p~`` with ``p~`` the
homogeneous point ``(x, y, z, 1)`` and ``Q`` a symmetric 4x4 matrix.
Planes, spheres, cylinders and cones additionally carry canonical
parameters from which ``Q`` is rebuilt exactly; the two representations
are kept consistent at construction time.
"""

from dataclasses import dataclass, field

import numpy as np

from .geom import RigidTransform, unit

PLANE = "plane"
SPHERE = "sphere"
CYLINDER = "cylinder"
CONE = "cone"
GENERAL = "general"

KINDS = (PLANE, SPHERE, CYLINDER, CONE, GENERAL)


def _canonical_matrix(kind, canonical):
    """Build the homogeneous coefficient matrix from canonical parameters."""
    Q = np.zeros((4, 4))
    if kind == PLANE:
        n = np.asarray(canonical["normal"], dtype=float)
        d = float(canonical["offset"])
        Q[:3, 3] = n / 2.0
        Q[3, :3] = n / 2.0
        Q[3, 3] = -d
    elif kind == SPHERE:
        c = np.asarray(canonical["center"], dtype=float)
        r = float(canonical["radius"])
        Q[:3, :3] = np.eye(3)
        Q[:3, 3] = -c
        Q[3, :3] = -c
        Q[3, 3] = c @ c - r * r
    elif kind == CYLINDER:
        a = np.asarray(canonical["point"], dtype=float)
        d = np.asarray(canonical["axis"], dtype=float)
        r = float(canonical["radius"])
        A = np.eye(3) - np.outer(d, d)
        b = -(A @ a)
        Q[:3, :3] = A
        Q[:3, 3] = b
        Q[3, :3] = b
        Q[3, 3] = a @ (A @ a) - r * r
    elif kind == CONE:
        v = np.asarray(canonical["apex"], dtype=float)
        d = np.asarray(canonical["axis"], dtype=float)
        alpha = float(canonical["half_angle"])
        k = 1.0 + np.tan(alpha) ** 2
        A = np.eye(3) - k * np.outer(d, d)
        b = -(A @ v)
        Q[:3, :3] = A
        Q[:3, 3] = b
        Q[3, :3] = b
        Q[3, 3] = v @ (A @ v)
    else:
        raise ValueError(f"no canonical form for kind {kind!r}")
    return Q


@dataclass(frozen=True)
class QuadricSurface:
    """Implicit quadric with a stable id and optional canonical form."""

    id: str
    kind: str
    Q: np.ndarray
    canonical: dict = field(default_factory=dict)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float).reshape(4, 4)
        Q = 0.5 * (Q + Q.T)
        object.__setattr__(self, "Q", Q)
        if self.kind not in KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}")

    # -- constructors -------------------------------------------------

    @staticmethod
    def plane(sid, normal, offset):
        n = unit(normal)
        canonical = {"normal": n, "offset": float(offset)}
        return QuadricSurface(sid, PLANE, _canonical_matrix(PLANE, canonical), canonical)

    @staticmethod
    def plane_through(sid, normal, point):
        n = unit(normal)
        return QuadricSurface.plane(sid, n, float(n @ np.asarray(point, dtype=float)))

    @staticmethod
    def sphere(sid, center, radius):
        canonical = {"center": np.asarray(center, dtype=float), "radius": float(radius)}
        return QuadricSurface(sid, SPHERE, _canonical_matrix(SPHERE, canonical), canonical)

    @staticmethod
    def cylinder(sid, point, axis, radius):
        canonical = {
            "point": np.asarray(point, dtype=float),
            "axis": unit(axis),
            "radius": float(radius),
        }
        return QuadricSurface(sid, CYLINDER, _canonical_matrix(CYLINDER, canonical), canonical)

    @staticmethod
    def cone(sid, apex, axis, half_angle):
        canonical = {
            "apex": np.asarray(apex, dtype=float),
            "axis": unit(axis),
            "half_angle": float(half_angle),
        }
        return QuadricSurface(sid, CONE, _canonical_matrix(CONE, canonical), canonical)

    @staticmethod
    def general(sid, Q):
        return QuadricSurface(sid, GENERAL, np.asarray(Q, dtype=float))

    # -- evaluation ----------------------------------------------------

    def value(self, points):
        """F at one point (scalar) or an (N, 3) array of points."""
        p = np.asarray(points, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        A = self.Q[:3, :3]
        b = self.Q[:3, 3]
        c = self.Q[3, 3]
        vals = np.einsum("ni,ij,nj->n", p, A, p) + 2.0 * (p @ b) + c
        return vals[0] if single else vals

    def gradient(self, points):
        """Gradient of F, exact (F is quadratic)."""
        p = np.asarray(points, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        g = 2.0 * (p @ self.Q[:3, :3].T + self.Q[:3, 3])
        return g[0] if single else g

    def eval_and_grad(self, point):
        return self.value(point), self.gradient(point)

    # -- transforms and checks -----------------------------------------

    def transformed(self, T: RigidTransform):
        """Surface satisfying ``F'(T p) = F(p)``; the id is preserved."""
        T.require_rigid()
        if self.kind == GENERAL:
            Minv = T.inverse().matrix()
            return QuadricSurface(self.id, GENERAL, Minv.T @ self.Q @ Minv)
        canonical = dict(self.canonical)
        if self.kind == PLANE:
            n = T.apply_direction(canonical["normal"])
            # A plane point maps with T; offset follows from it.
            p0 = canonical["normal"] * canonical["offset"]
            canonical["normal"] = n
            canonical["offset"] = float(n @ T.apply_point(p0))
        elif self.kind == SPHERE:
            canonical["center"] = T.apply_point(canonical["center"])
        elif self.kind == CYLINDER:
            canonical["point"] = T.apply_point(canonical["point"])
            canonical["axis"] = T.apply_direction(canonical["axis"])
        elif self.kind == CONE:
            canonical["apex"] = T.apply_point(canonical["apex"])
            canonical["axis"] = T.apply_direction(canonical["axis"])
        return QuadricSurface(self.id, self.kind, _canonical_matrix(self.kind, canonical), canonical)

    def canonical_consistency(self):
        """Max absolute deviation between Q and the canonical rebuild."""
        if self.kind == GENERAL:
            return 0.0
        rebuilt = _canonical_matrix(self.kind, self.canonical)
        scale = max(np.abs(self.Q).max(), 1e-30)
        return float(np.abs(self.Q - rebuilt).max() / scale)

    def distance_estimate(self, points):
        """First-order distance |F| / |grad F| from points to the surface."""
        vals = np.atleast_1d(self.value(points))
        grads = np.atleast_2d(self.gradient(points))
        g = np.maximum(np.linalg.norm(grads, axis=1), 1e-12)
        d = np.abs(vals) / g
        return d[0] if np.asarray(points).ndim == 1 else d


def eval_and_grad(surface: QuadricSurface, point):
    """Value and gradient of a surface at a point."""
    return surface.eval_and_grad(np.asarray(point, dtype=float))


def transform_surface(surface: QuadricSurface, T: RigidTransform):
    """Rigidly transform a surface, rejecting non-rigid input."""
    return surface.transformed(T)
