"""Critical events inferred from connection-graph differences.

An added connection between two edges means they collided; the contact
was either a tangency of their carrier curves at an interior point or
an incidence at one of the edges' end points, and with no motion
history both must be checked.  A lost connection means the curves
separated, whose characteristic contact is a tangency at the edge ends.

Each event contributes four scalar equations: the point lies on both
carrier curves (three surface equations, the shared face carrier
counted once) plus either the collinear-tangent condition or the
end-surface incidence.  Together with the push-pull parameter and the
driven-face unknowns this forms a square system solved by the root
finder.
"""

from dataclasses import dataclass

import numpy as np

from . import tol
from .errors import DegenerateGradient
from .graphdiff import ADDED
from .quadric import CONE, CYLINDER, PLANE, SPHERE

INTERIOR_TANGENCY = "interior_tangency"
ENDPOINT_INCIDENCE = "endpoint_incidence"
ENDPOINT_TANGENCY = "endpoint_tangency"


@dataclass(frozen=True)
class CriticalEvent:
    kind: str
    face: str
    edge_a: str
    edge_b: str
    f1: str                  # other carrier of edge_a
    f2: str                  # shared face carrier
    f3: str                  # other carrier of edge_b
    f4: str = None           # end surface (incidence only)

    def __post_init__(self):
        if self.f1 == self.f3:
            raise ValueError("event surfaces F1 and F3 must differ")
        if (self.f4 is not None) != (self.kind == ENDPOINT_INCIDENCE):
            raise ValueError("F4 is for end-point incidence events only")

    @property
    def is_tangency(self):
        return self.kind in (INTERIOR_TANGENCY, ENDPOINT_TANGENCY)

    def surface_ids(self):
        out = {self.f1, self.f2, self.f3}
        if self.f4 is not None:
            out.add(self.f4)
        return out

    def dedup_key(self):
        # the edge pair matters: one surface set can describe contacts
        # between different edge pairs, which repair differently
        return ("tangency" if self.is_tangency else "incidence",
                frozenset(self.surface_ids()),
                frozenset((self.edge_a, self.edge_b)))

    def to_json(self):
        out = {"kind": self.kind, "face": self.face,
               "edges": [self.edge_a, self.edge_b],
               "surfaces": sorted({self.f1, self.f2, self.f3})}
        if self.f4 is not None:
            out["end_surface"] = self.f4
        return out


def _other_carrier(edge, face_surface):
    a, b = edge.carriers
    if a == face_surface:
        return b
    if b == face_surface:
        return a
    raise ValueError(f"edge {edge.id} does not lie on surface {face_surface}")


def _end_surfaces(M, edge):
    """Surfaces defining each end of an open edge, beyond its carriers."""
    if edge.bounds is None:
        return []
    out = []
    for vid in edge.bounds:
        v = M.vertices.get(vid)
        if v is None:
            continue
        for sid in set(v.triple) - set(edge.carriers):
            out.append(sid)
    return out


def surfaces_coincident(sa, sb):
    """Same zero set, regardless of id or coefficient scale."""
    qa = sa.Q / max(np.abs(sa.Q).max(), 1e-300)
    qb = sb.Q / max(np.abs(sb.Q).max(), 1e-300)
    return (np.abs(qa - qb).max() < 1e-9) or (np.abs(qa + qb).max() < 1e-9)


def infer_critical_events(diff, face, M):
    """Candidate events explaining each changed connection of one face.

    Added arcs yield one interior tangency plus one end-point incidence
    per end surface of either edge; lost arcs yield the end-point
    tangency.  Candidates are deduplicated by surface set.
    """
    if diff.empty:
        return []
    f2 = M.faces[face].surface if isinstance(face, str) else face.surface
    fid = face if isinstance(face, str) else face.id
    events = []
    for arc in diff.arcs:
        a, b = arc.pair
        ea, eb = M.edges[a], M.edges[b]
        f1 = _other_carrier(ea, f2)
        f3 = _other_carrier(eb, f2)
        if f1 == f3:
            continue
        if arc.origin == ADDED:
            events.append(CriticalEvent(INTERIOR_TANGENCY, fid, a, b, f1, f2, f3))
        else:
            events.append(CriticalEvent(ENDPOINT_TANGENCY, fid, a, b, f1, f2, f3))
        # End incidences cover both directions: a contact entering an
        # edge through its end, or leaving through it (an edge that
        # inverts away keeps permanently tangent carriers, so only the
        # incidence equations time its collapse).  Redundant candidates
        # are filtered by the solvers.
        for f4 in _end_surfaces(M, ea) + _end_surfaces(M, eb):
            if f4 in (f1, f2, f3):
                continue
            if any(surfaces_coincident(M.surfaces[f4], M.surfaces[s])
                   for s in (f1, f2, f3)):
                continue
            events.append(CriticalEvent(ENDPOINT_INCIDENCE, fid, a, b,
                                        f1, f2, f3, f4))
    seen = {}
    for ev in events:
        seen.setdefault(ev.dedup_key(), ev)
    return list(seen.values())


def tangency_residual(s1, s2, s3, p):
    """Normalized collinear-tangent condition of the two carrier curves.

    The raw triple product of gradients is divided by the product of
    gradient norms, making the residual scale invariant.
    """
    g1, g2, g3 = s1.gradient(p), s2.gradient(p), s3.gradient(p)
    n1, n2, n3 = (np.linalg.norm(g) for g in (g1, g2, g3))
    if min(n1, n2, n3) < 1e-9:
        raise DegenerateGradient(
            f"vanishing gradient at {np.round(p, 6)}; tangency undefined")
    return float(g2 @ np.cross(g1, g3)) / (n1 * n2 * n3)


def event_residuals(ev: CriticalEvent, p, config, model_scale=1.0):
    """Residual vector [F1, F2, F3, contact] at a point, scale-normalized."""
    p = np.asarray(p, dtype=float)
    surfaces = config.surfaces if hasattr(config, "surfaces") else config
    out = []
    for sid in (ev.f1, ev.f2, ev.f3):
        s = surfaces[sid]
        gn = max(np.linalg.norm(s.gradient(p)), 1e-12)
        out.append(float(s.value(p)) / (gn * model_scale))
    if ev.is_tangency:
        out.append(tangency_residual(surfaces[ev.f1], surfaces[ev.f2],
                                     surfaces[ev.f3], p))
    else:
        s4 = surfaces[ev.f4]
        gn = max(np.linalg.norm(s4.gradient(p)), 1e-12)
        out.append(float(s4.value(p)) / (gn * model_scale))
    return np.array(out)


class _SurfaceState:
    """Coefficient blocks and canonical data of one surface at (t, q).

    For translational edits every dependence is polynomial in t and
    affine in the driven offsets, so states evaluate with a handful of
    vector operations instead of rebuilding surface objects.
    """

    __slots__ = ("A", "b", "c", "kind", "normal", "offset", "point", "axis",
                 "radius", "center", "apex")

    def grad(self, p):
        return 2.0 * (self.A @ p + self.b)

    def value(self, p):
        return float(p @ self.A @ p + 2.0 * self.b @ p + self.c)


def _compile_state(M, cs, sid):
    """(t, q) -> _SurfaceState closure for one surface, or None."""
    s = M.surfaces[sid]
    st = _SurfaceState()
    st.kind = s.kind
    st.A = s.Q[:3, :3].copy()
    st.b = s.Q[:3, 3].copy()
    st.c = float(s.Q[3, 3])
    for key, attr in (("normal", "normal"), ("offset", "offset"),
                      ("point", "point"), ("axis", "axis"), ("radius", "radius"),
                      ("center", "center"), ("apex", "apex")):
        setattr(st, attr, s.canonical.get(key))
    pushed = {M.faces[f].surface for f in cs.edit.faces}
    offsets = [(i, u.direction) for i, u in enumerate(cs.unknowns)
               if u.surface == sid and u.kind == "offset"]
    radius_ix = [i for i, u in enumerate(cs.unknowns)
                 if u.surface == sid and u.kind == "radius"]
    if sid in pushed:
        if cs.edit.motion.kind != "translate":
            return None
        v = cs.edit.motion.direction * cs.edit.motion.distance
        A0, b0, c0 = st.A, st.b.copy(), st.c
        Av = A0 @ v
        bv = float(b0 @ v)
        vAv = float(v @ Av)
        n0, d0 = st.normal, st.offset
        pt0, ax0, ct0, ap0 = st.point, st.axis, st.center, st.apex

        def at(t, q, out=st):
            tv = t
            out.b = b0 - tv * Av
            out.c = c0 - 2 * tv * bv + tv * tv * vAv
            if n0 is not None:
                out.offset = d0 + tv * float(n0 @ v)
            if pt0 is not None:
                out.point = pt0 + tv * v
            if ct0 is not None:
                out.center = ct0 + tv * v
            if ap0 is not None:
                out.apex = ap0 + tv * v
            return out

        return at
    if not offsets and not radius_ix:
        return lambda t, q, out=st: out
    # driven: position affine in q, radius linear in q
    if s.kind == PLANE:
        n0, d0 = st.normal, st.offset
        coeff = [(i, float(n0 @ d)) for i, d in offsets]

        def at(t, q, out=st):
            out.offset = d0 + sum(c * q[i] for i, c in coeff)
            out.b = n0 / 2.0
            out.c = -out.offset
            return out

        return at
    key = {SPHERE: "center", CYLINDER: "point", CONE: "apex"}[s.kind]
    p0 = np.asarray(s.canonical[key], dtype=float)
    A0 = st.A
    r0 = s.canonical.get("radius")
    rix = radius_ix[0] if radius_ix else None

    def at(t, q, out=st, key=key):
        pos = p0
        for i, d in offsets:
            pos = pos + q[i] * d
        setattr(out, key, pos)
        out.b = -(A0 @ pos)
        r = r0 + q[rix] if rix is not None else r0
        if r is not None:
            out.radius = r
        extra = r * r if r is not None else 0.0
        if out.kind == SPHERE:
            out.c = float(pos @ pos) - extra
        elif out.kind == CYLINDER:
            out.c = float(pos @ (A0 @ pos)) - extra
        else:
            out.c = float(pos @ (A0 @ pos))
        return out

    return at


def _constraint_row(res, states):
    sa, sb = states[res.a], states[res.b]
    if res.kind == "plane_cyl":
        return res.sign * (float(sa.normal @ sb.point) - sa.offset) - sb.radius
    if res.kind == "plane_sphere":
        return res.sign * (float(sa.normal @ sb.center) - sa.offset) - sb.radius
    if res.kind == "plane_cone":
        return res.sign * (float(sa.normal @ sb.apex) - sa.offset)
    if res.kind == "cyl_cyl":
        rel = sb.point - sa.point
        perp = rel - float(rel @ sa.axis) * sa.axis
        return float(np.linalg.norm(perp)) - (res.ka * sa.radius + res.kb * sb.radius)
    rel = sb.center - sa.point
    perp = rel - float(rel @ sa.axis) * sa.axis
    return float(np.linalg.norm(perp)) - (res.ka * sa.radius + res.kb * sb.radius)


class EventSystem:
    """Square system in (point, parameter, driven unknowns) for one event."""

    def __init__(self, event: CriticalEvent, cs, M):
        for sid in event.surface_ids():
            if sid not in M.surfaces:
                raise KeyError(f"event references unknown surface {sid!r}")
        self.event = event
        self.cs = cs
        self.M = M
        self.scale = M.model_scale
        self.m = cs.size
        self.size = 4 + self.m
        self.needed = set(event.surface_ids())
        for r in cs.residual_defs:
            self.needed |= {r.a, r.b}
        self.needed = sorted(self.needed)
        self.labels = ([f"on:{event.f1}", f"on:{event.f2}", f"on:{event.f3}",
                        "tangency" if event.is_tangency else f"on:{event.f4}"]
                       + [r.label() for r in cs.residual_defs])
        self._states = {}
        for sid in self.needed:
            fn = _compile_state(M, cs, sid)
            if fn is None:
                self._states = None
                break
            self._states[sid] = fn
        no_half_angle = all(u.kind != "half_angle" for u in cs.unknowns)
        self.fast = self._states is not None and no_half_angle

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[:3], float(z[3]), z[4:]

    def residual(self, z):
        if self.fast:
            return self._residual_fast(z)
        p, t, q = self.split(z)
        surfaces = self.cs.realize(t, q, only=self.needed)
        r_event = event_residuals(self.event, p, surfaces, self.scale)
        r_cons = self.cs.residuals(t, q, surfaces=surfaces) / self.scale
        return np.concatenate([r_event, r_cons])

    def _residual_fast(self, z):
        p = z[:3]
        t = z[3]
        q = z[4:]
        ev = self.event
        states = {sid: fn(t, q) for sid, fn in self._states.items()}
        out = np.empty(self.size)
        grads = []
        for k, sid in enumerate((ev.f1, ev.f2, ev.f3)):
            st = states[sid]
            g = st.grad(p)
            grads.append(g)
            gn = max(np.linalg.norm(g), 1e-12)
            out[k] = st.value(p) / (gn * self.scale)
        if ev.is_tangency:
            g1, g2, g3 = grads
            n1, n2, n3 = (np.linalg.norm(g) for g in grads)
            if min(n1, n2, n3) < 1e-9:
                raise DegenerateGradient(
                    f"vanishing gradient at {np.round(p, 6)}; tangency undefined")
            out[3] = float(g2 @ np.cross(g1, g3)) / (n1 * n2 * n3)
        else:
            st = states[ev.f4]
            g = st.grad(p)
            gn = max(np.linalg.norm(g), 1e-12)
            out[3] = st.value(p) / (gn * self.scale)
        for k, res in enumerate(self.cs.residual_defs):
            out[4 + k] = _constraint_row(res, states) / self.scale
        return out

    def jacobian(self, z):
        n = self.size
        J = np.zeros((n, n))
        hs = np.full(n, 1e-7 * self.scale)
        hs[3] = 1e-7
        for j in range(n):
            dz = np.zeros(n)
            dz[j] = hs[j]
            J[:, j] = (self.residual(z + dz) - self.residual(z - dz)) / (2 * hs[j])
        return J


def build_event_system(ev: CriticalEvent, edit, scheme, M, context=None) -> EventSystem:
    """Assemble the square (4+m) system tying an event to the parameter."""
    if context is not None:
        cs = context.cs
    else:
        from .constraints import assemble_tangency_system

        cs = assemble_tangency_system(M, edit, scheme)
    return EventSystem(ev, cs, M)
