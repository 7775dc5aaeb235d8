"""Boundary representation types.

Geometry lives on carrier surfaces: an edge is a piece of the
intersection curve of its two carrier surfaces and a vertex is a common
root of three of them.  Topology (loops, co-edge senses, shells) is
stored separately and the two are only required to agree up to the
on-surface tolerances, which is what validation checks.

Conventions:
  * ``Face.sense`` is +1 when the carrier gradient points out of the
    material, -1 otherwise.
  * walking a loop in storage order with each co-edge's sense, the face
    interior lies to the left when seen from outside the solid.
  * a closed edge (full conic) has ``bounds=None`` and is its own loop.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import tol
from .quadric import QuadricSurface


@dataclass
class Vertex:
    id: str
    position: np.ndarray
    triple: tuple            # three surface ids whose common root this is
    hint: np.ndarray = None  # optional off-surface seed bias for re-solving

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.triple = tuple(self.triple)


@dataclass
class Edge:
    id: str
    carriers: tuple          # ordered pair of surface ids
    bounds: tuple = None     # (start vertex id, end vertex id) or None if closed
    samples: np.ndarray = None
    branch: int = 0
    hint: np.ndarray = None  # bias point selecting among curve components
    contact: bool = False    # tangential contact from a crossing, not a
    #                          designed smooth connection

    def __post_init__(self):
        self.carriers = tuple(self.carriers)
        if self.samples is not None:
            self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)

    @property
    def closed(self):
        return self.bounds is None

    def length(self):
        return polyline_length(self.samples, self.closed)


@dataclass
class Face:
    id: str
    surface: str             # carrier surface id
    loops: list              # list of loops; a loop is [(edge id, sense), ...]
    sense: int = 1

    def co_edges(self):
        for loop in self.loops:
            for ce in loop:
                yield ce

    def edge_ids(self):
        return [e for loop in self.loops for e, _ in loop]


@dataclass
class BrepSolid:
    surfaces: dict
    vertices: dict
    edges: dict
    faces: dict
    shells: list = field(default_factory=list)
    model_scale: float = None
    genus: int = None

    def __post_init__(self):
        if self.model_scale is None:
            self.model_scale = self.compute_scale()
        if not self.shells:
            self.shells = self.compute_shells()

    # -- derived structure ----------------------------------------------

    def compute_scale(self):
        pts = [v.position for v in self.vertices.values()]
        pts += [e.samples for e in self.edges.values() if e.samples is not None]
        if not pts:
            return 1.0
        allp = np.vstack([np.atleast_2d(p) for p in pts])
        extent = allp.max(axis=0) - allp.min(axis=0)
        return float(max(extent.max(), 1e-12))

    def bbox(self):
        pts = [np.atleast_2d(v.position) for v in self.vertices.values()]
        pts += [e.samples for e in self.edges.values() if e.samples is not None]
        allp = np.vstack(pts)
        return allp.min(axis=0), allp.max(axis=0)

    def edge_uses(self):
        """edge id -> list of (face id, loop index, position, sense)."""
        uses = {}
        for f in self.faces.values():
            for li, loop in enumerate(f.loops):
                for pos, (eid, sense) in enumerate(loop):
                    uses.setdefault(eid, []).append((f.id, li, pos, sense))
        return uses

    def faces_of_edge(self, eid):
        out = []
        for f in self.faces.values():
            for loop in f.loops:
                for e, _ in loop:
                    if e == eid:
                        out.append(f.id)
        return out

    def edges_of_vertex(self):
        """vertex id -> set of edge ids bounded by it."""
        inc = {}
        for e in self.edges.values():
            if e.bounds is None:
                continue
            for vid in e.bounds:
                inc.setdefault(vid, set()).add(e.id)
        return inc

    def compute_shells(self):
        adj = {}
        for eid, uses in self.edge_uses().items():
            fids = sorted({u[0] for u in uses})
            for a in fids:
                for b in fids:
                    if a != b:
                        adj.setdefault(a, set()).add(b)
        remaining = set(self.faces)
        shells = []
        while remaining:
            start = min(remaining)
            comp = {start}
            stack = [start]
            while stack:
                cur = stack.pop()
                for nxt in adj.get(cur, ()):  # isolated faces form their own shell
                    if nxt in remaining and nxt not in comp:
                        comp.add(nxt)
                        stack.append(nxt)
            remaining -= comp
            shells.append(frozenset(comp))
        return shells

    def euler_characteristic(self):
        """V - E + F generalized to closed edges and multi-loop faces.

        Closed edges contribute 0 and a face with L loops contributes
        ``2 - L``, so the total equals the Euler characteristic of the
        boundary surface: 2 (shells - genus) for a closed orientable one.
        """
        n_open = sum(1 for e in self.edges.values() if not e.closed)
        face_term = sum(2 - len(f.loops) for f in self.faces.values())
        return len(self.vertices) - n_open + face_term

    def derived_genus(self):
        chi = self.euler_characteristic()
        return len(self.shells) - chi // 2 if chi % 2 == 0 else None

    # -- geometry helpers -----------------------------------------------

    def outward_normal(self, face, point):
        s = self.surfaces[face.surface]
        g = s.gradient(point)
        n = np.linalg.norm(g)
        if n < 1e-14:
            return None
        return face.sense * g / n

    def smooth_edges(self, angle_tol=tol.G1_ANGLE):
        """Edges whose two adjacent faces have collinear normals along them.

        Edges marked as crossing contacts are skipped: they are tangent
        incidentally (the crossing happened at a tangency), not by the
        model's design.
        """
        smooth = set()
        uses = self.edge_uses()
        for eid, us in uses.items():
            fids = [u[0] for u in us]
            if len(fids) != 2:
                continue
            e = self.edges[eid]
            if e.contact:
                continue
            if e.samples is None or len(e.samples) == 0:
                continue
            s1 = self.surfaces[self.faces[fids[0]].surface]
            s2 = self.surfaces[self.faces[fids[1]].surface]
            if s1.id == s2.id:
                continue
            g1 = s1.gradient(e.samples)
            g2 = s2.gradient(e.samples)
            n1 = np.linalg.norm(g1, axis=1)
            n2 = np.linalg.norm(g2, axis=1)
            if (n1 < 1e-14).any() or (n2 < 1e-14).any():
                continue
            sin = np.linalg.norm(np.cross(g1, g2), axis=1) / (n1 * n2)
            if (sin <= angle_tol).all():
                smooth.add(eid)
        return smooth

    def copy(self):
        return BrepSolid(
            surfaces=dict(self.surfaces),
            vertices={k: replace(v, position=v.position.copy()) for k, v in self.vertices.items()},
            edges={k: Edge(e.id, e.carriers, e.bounds,
                           None if e.samples is None else e.samples.copy(),
                           e.branch, None if e.hint is None else np.array(e.hint),
                           e.contact)
                   for k, e in self.edges.items()},
            faces={k: Face(f.id, f.surface, [list(loop) for loop in f.loops], f.sense)
                   for k, f in self.faces.items()},
            shells=list(self.shells),
            model_scale=self.model_scale,
            genus=self.genus,
        )


# -- polyline utilities ------------------------------------------------


def _segments(P, closed):
    P = np.asarray(P, dtype=float)
    if closed:
        return P, np.roll(P, -1, axis=0)
    return P[:-1], P[1:]


def polyline_length(P, closed=False):
    if P is None or len(P) < 2:
        return 0.0
    a, b = _segments(P, closed)
    return float(np.linalg.norm(b - a, axis=1).sum())


def polyline_project(P, point, closed=False):
    """Arc-length parameter and distance of the closest polyline point."""
    P = np.asarray(P, dtype=float)
    point = np.asarray(point, dtype=float)
    if len(P) == 1:
        return 0.0, float(np.linalg.norm(point - P[0]))
    a, b = _segments(P, closed)
    d = b - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    seg_len2 = np.maximum(seg_len2, 1e-300)
    u = np.clip(np.einsum("ij,ij->i", point - a, d) / seg_len2, 0.0, 1.0)
    proj = a + u[:, None] * d
    dist = np.linalg.norm(proj - point, axis=1)
    i = int(np.argmin(dist))
    seg_len = np.sqrt(seg_len2)
    s = float(seg_len[:i].sum() + u[i] * seg_len[i])
    return s, float(dist[i])


def max_chord_gap(P, closed=False):
    if P is None or len(P) < 2:
        return 0.0
    a, b = _segments(P, closed)
    return float(np.linalg.norm(b - a, axis=1).max())


def point_in_edge_bounds(P, closed, point, model_scale, end_tol=None,
                         start_open=False, end_open=False):
    """Whether a point lies on the edge between its bounding vertices.

    The point must sit close to the sample polyline (within half the
    largest chord gap, guarding against antipodal false matches) and,
    for open edges, fall inside the span.  Projection clamps at the end
    vertices, so overshoot there is measured as the distance to the end
    vertex itself; ``start_open`` / ``end_open`` drop the test on sides
    whose bounding vertex no longer exists.
    """
    if P is None or len(P) == 0:
        return False
    if end_tol is None:
        end_tol = tol.EDGE_END * model_scale
    s, dist = polyline_project(P, point, closed)
    guard = max(0.5 * max_chord_gap(P, closed), 4.0 * end_tol)
    if dist > guard:
        return False
    if closed:
        return True
    L = polyline_length(P, closed)
    point = np.asarray(point, dtype=float)
    if s <= 1e-12 and not start_open:
        return float(np.linalg.norm(point - P[0])) <= end_tol
    if s >= L - 1e-12 and not end_open:
        return float(np.linalg.norm(point - P[-1])) <= end_tol
    return True
