"""2D charts on carrier surfaces and point-in-face tests.

Loops are mapped to polylines in a per-face chart and containment is a
signed winding number, so outer loops and holes need no special casing
as long as loop orientations are consistent.  Cylinder and cone charts
place the angular seam inside the largest angular gap left free by the
loops; faces that wrap the full circumference (tube bands bounded by
closed circles) fall back to classification along the axis only.
"""

import numpy as np

from .geom import perp_basis, unit
from .quadric import CONE, CYLINDER, GENERAL, PLANE, SPHERE


def loop_polyline(M, face, loop):
    """Concatenated sample polyline of one loop, in walking order."""
    pts = []
    for eid, sense in loop:
        e = M.edges[eid]
        P = e.samples
        if P is None or len(P) == 0:
            continue
        P = P if sense > 0 else P[::-1]
        if pts and np.linalg.norm(pts[-1] - P[0]) < 1e-12:
            pts.extend(P[1:])
        else:
            pts.extend(P)
    return np.asarray(pts, dtype=float).reshape(-1, 3)


class FaceChart:
    """Chart of one face: 3D points -> (u, v), plus loop polygons."""

    def __init__(self, M, face):
        self.face = face
        self.surface = M.surfaces[face.surface]
        self.loops3d = [loop_polyline(M, face, loop) for loop in face.loops]
        self.loops3d = [L for L in self.loops3d if len(L) >= 2]
        self.mode = "polygon"
        # Right-handed chart as seen from outside the material, so outer
        # loops of a well-oriented face have positive signed area.
        self.orient = 1.0 if face.sense >= 0 else -1.0
        self._setup(M)
        self.loops_uv = [self.to_uv(L) for L in self.loops3d]
        self.max_sagitta = self._max_sagitta(M)

    def _max_sagitta(self, M):
        """Largest deviation of an edge sample from its neighbors' chord.

        Bounds how far the sampled polylines stray from the true edge
        curves; containment answers within this distance of a polyline
        are unreliable.  Measured per edge so that real corners between
        edges do not count.
        """
        worst = 0.0
        for eid in set(self.face.edge_ids()):
            e = M.edges.get(eid)
            if e is None or e.samples is None or len(e.samples) < 3:
                continue
            L = e.samples if not e.closed else np.vstack([e.samples, e.samples[:2]])
            a, m, b = L[:-2], L[1:-1], L[2:]
            d = b - a
            ll = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
            t = np.clip(np.einsum("ij,ij->i", m - a, d) / ll, 0, 1)
            proj = a + t[:, None] * d
            worst = max(worst, float(np.linalg.norm(m - proj, axis=1).max()))
        return worst

    # -- chart construction -------------------------------------------

    def _setup(self, M):
        s = self.surface
        allp = (np.vstack(self.loops3d) if self.loops3d else np.zeros((0, 3)))
        if s.kind == PLANE:
            self.origin = s.canonical["normal"] * s.canonical["offset"]
            self.u, self.v = perp_basis(s.canonical["normal"])
            self.normal = s.canonical["normal"]
        elif s.kind in (CYLINDER, CONE):
            if s.kind == CYLINDER:
                self.origin = s.canonical["point"]
                self.axis = s.canonical["axis"]
                self.radius = s.canonical["radius"]
            else:
                self.origin = s.canonical["apex"]
                self.axis = s.canonical["axis"]
                rel = allp - self.origin if len(allp) else np.zeros((1, 3))
                h = rel @ self.axis
                d = np.linalg.norm(rel - np.outer(h, self.axis), axis=1)
                self.radius = max(float(np.mean(d)), 1e-9)
            self.u, self.v = perp_basis(self.axis)
            self.seam = self._pick_seam(allp)
        elif s.kind == SPHERE:
            self.origin = s.canonical["center"]
            self.radius = s.canonical["radius"]
            self.axis = self._pick_pole(allp)
            self.u, self.v = perp_basis(self.axis)
            self.seam = self._pick_seam(allp)
        else:  # GENERAL: best-fit plane of the loop samples
            self.origin = allp.mean(axis=0) if len(allp) else np.zeros(3)
            if len(allp) >= 3:
                _, _, vt = np.linalg.svd(allp - self.origin, full_matrices=False)
                self.normal = vt[-1]
            else:
                self.normal = np.array([0.0, 0.0, 1.0])
            self.u, self.v = perp_basis(self.normal)

    def _angles(self, pts):
        rel = pts - self.origin
        return np.arctan2(rel @ self.v, rel @ self.u)

    def _pick_seam(self, allp):
        if len(allp) == 0:
            return np.pi
        th = np.sort(self._angles(allp))
        gaps = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
        i = int(np.argmax(gaps))
        # A face whose loops leave no angular gap beyond the sampling
        # step wraps the full circumference; chart coordinates then have
        # no usable seam and loop orientation cannot be area-based.
        median_gap = float(np.median(gaps))
        if gaps[i] < max(0.5, 3.0 * median_gap):
            self.mode = "wrapped"
            return th[i] + gaps[i] / 2.0
        return th[i] + gaps[i] / 2.0

    def _pick_pole(self, allp):
        best, best_score = np.array([0.0, 0.0, 1.0]), -1.0
        for cand in np.vstack([np.eye(3), unit([1, 1, 1]) * np.ones((1, 3))]):
            cand = unit(cand)
            if len(allp) == 0:
                return cand
            rel = allp - self.origin
            cosang = np.abs(rel @ cand) / np.maximum(np.linalg.norm(rel, axis=1), 1e-12)
            score = 1.0 - cosang.max()
            if score > best_score:
                best, best_score = cand, score
        return best

    # -- mapping --------------------------------------------------------

    def to_uv(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s = self.surface
        if s.kind == PLANE or s.kind == GENERAL:
            rel = pts - self.origin
            uv = np.column_stack([rel @ self.u, rel @ self.v])
        elif s.kind in (CYLINDER, CONE):
            rel = pts - self.origin
            h = rel @ self.axis
            th = np.arctan2(rel @ self.v, rel @ self.u)
            if self.mode != "wrapped":
                th = np.mod(th - self.seam, 2 * np.pi) + self.seam
            uv = np.column_stack([th * self.radius, h])
        else:  # sphere
            rel = pts - self.origin
            nrm = np.maximum(np.linalg.norm(rel, axis=1), 1e-12)
            polar = np.arccos(np.clip(rel @ self.axis / nrm, -1, 1))
            th = np.arctan2(rel @ self.v, rel @ self.u)
            if self.mode != "wrapped":
                th = np.mod(th - self.seam, 2 * np.pi) + self.seam
            uv = np.column_stack([th * self.radius, polar * self.radius])
        if self.orient < 0:
            uv = np.column_stack([uv[:, 0], -uv[:, 1]])
        return uv

    # -- containment -----------------------------------------------------

    def contains(self, points):
        """True where the point lies inside the face's loops."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.loops_uv:
            return np.ones(len(pts), dtype=bool)
        if self.surface.kind in (CYLINDER, CONE):
            return self._contains_angular(pts)
        uv = self.to_uv(pts)
        w = np.zeros(len(pts), dtype=int)
        for loop in self.loops_uv:
            w += winding_number(loop, uv)
        return w != 0

    def _contains_angular(self, pts):
        """Crossing parity in (angle, height), immune to the seam.

        A point is inside when an axial ray from below crosses the loop
        polylines an odd number of times.  Angles are unwrapped along
        each loop so full wraps count correctly.
        """
        rel = pts - self.origin
        hq = rel @ self.axis
        thq = np.arctan2(rel @ self.v, rel @ self.u)
        parity = np.zeros(len(pts), dtype=int)
        two_pi = 2 * np.pi
        for L in self.loops3d:
            relL = L - self.origin
            h = relL @ self.axis
            th = np.unwrap(np.arctan2(relL @ self.v, relL @ self.u))
            # Close the loop in unwrapped coordinates: a loop that winds
            # the cylinder closes one full turn away from its start.
            closing = th[0] + two_pi * round((th[-1] - th[0]) / two_pi)
            th = np.append(th, closing)
            h = np.append(h, h[0])
            t1, t2 = th[:-1], th[1:]
            h1, h2 = h[:-1], h[1:]
            # Sample segments span far less than a turn, so each segment
            # crosses the query's angular line at most once.
            for lo in range(0, len(pts), 4096):
                sl = slice(lo, lo + 4096)
                tq = thq[sl][:, None]
                k1 = np.floor((t1[None, :] - tq) / two_pi)
                k2 = np.floor((t2[None, :] - tq) / two_pi)
                cross = k1 != k2
                kk = np.maximum(k1, k2)
                tc = tq + two_pi * kk
                denom = np.where(np.abs(t2 - t1) < 1e-30, 1.0, t2 - t1)[None, :]
                u = (tc - t1[None, :]) / denom
                hc = h1[None, :] + u * (h2 - h1)[None, :]
                parity[sl] += (cross & (hc < hq[sl][:, None])).sum(axis=1)
        return parity % 2 == 1

    def boundary_distance(self, points):
        """3D distance from points to the nearest loop polyline."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(pts), np.inf)
        for L in self.loops3d:
            a = L
            b = np.roll(L, -1, axis=0)
            d = b - a
            ll = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
            for lo in range(0, len(pts), 2048):
                q = pts[lo:lo + 2048]
                t = np.clip(np.einsum("nkj,kj->nk", q[:, None, :] - a, d) / ll, 0, 1)
                proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
                dist = np.linalg.norm(proj - q[:, None, :], axis=2).min(axis=1)
                best[lo:lo + 2048] = np.minimum(best[lo:lo + 2048], dist)
        return best


def winding_number(polygon, points):
    """Signed winding numbers of a closed 2D polyline around query points."""
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    ay, by = a[:, 1][None, :], b[:, 1][None, :]
    ax, bx = a[:, 0][None, :], b[:, 0][None, :]
    # Left-of-segment test via the cross product sign.
    cross = (bx - ax) * (y - ay) - (x - ax) * (by - ay)
    up = (ay <= y) & (by > y) & (cross > 0)
    down = (by <= y) & (ay > y) & (cross < 0)
    return (up.astype(int) - down.astype(int)).sum(axis=1)


def signed_area(polygon):
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))
