"""Inconsistency resolution at a critical point.

Crossing a critical point is resolved as event-guided topology surgery
whose result must agree with the Boolean semantics: the model after the
crossing equals the base model minus (or plus) the volume swept by the
pushed faces, bounded by their neighbor surfaces.  The surgery probes
the configuration slightly past the critical parameter, where the
contact has opened into transversal intersections:

  * the event edges are split at the probe intersection points (or
    re-bounded when the contact crossed an edge end),
  * edges and edge pieces whose probe midpoints are no longer on the
    swept-Boolean boundary are dropped, as are edges whose carrier
    curves died or inverted,
  * new edges connect the new vertices along shared carrier pairs,
  * separated stubs at dead vertices are spliced back together, faces
    over coincident carriers merge, loops are retraced and renested,

and finally all geometry is evaluated back at the critical parameter
itself.  The output must validate and is spot-checked against the
membership formula; failures raise rather than return a broken solid.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import tol
from .brep import BrepSolid, Edge, Face, Vertex, polyline_length, polyline_project
from .errors import NoConvergence, ResolutionFailed
from .events import surfaces_coincident
from .nsolve import project_to_curve, solve_triple
from .pmc import SolidClassifier
from .regen import (PushContext, apply_motion, materialize, regenerate,
                    _resolve_vertex, _signed_param)
from .surfparam import FaceChart, signed_area, winding_number
from .validate import validate_solid

TRANSLATE = "translate"


# ---------------------------------------------------------------------------
# swept volume membership (Eq. 6 semantics)
# ---------------------------------------------------------------------------


class _ParamSurface:
    """Implicit value of one carrier as a function of (point, parameter).

    Surfaces whose canonical parameters move affinely in the sweep
    parameter (translations of pushed faces, offset- or radius-driven
    faces under translational edits) evaluate as an exact quadratic in
    s per point; anything else interpolates a dense sample of realized
    configurations.
    """

    def __init__(self, M, ctx, sid, tau, grid, configs):
        self.sid = sid
        self.tau = tau
        self.grid = grid
        self.configs = configs
        s_start = configs[0][sid]
        s_end = configs[-1][sid]
        self.kind = s_start.kind
        self.affine = False
        if tau > 0:
            mid = configs[len(configs) // 2][sid]
            self.affine = self._check_affine(s_start, mid, s_end)
        if self.affine:
            self.p0, self.dp, self.r0, self.dr = self._path(s_start, s_end)
            self.A = s_start.Q[:3, :3]
            self.n = s_start.canonical.get("normal")

    @staticmethod
    def _pos_key(kind):
        return {"plane": "offset", "sphere": "center",
                "cylinder": "point", "cone": "apex"}.get(kind)

    def _check_affine(self, s0, sm, s1, tol_rel=1e-9):
        key = self._pos_key(self.kind)
        if key is None:
            return False
        a0 = np.atleast_1d(np.asarray(s0.canonical[key], dtype=float))
        am = np.atleast_1d(np.asarray(sm.canonical[key], dtype=float))
        a1 = np.atleast_1d(np.asarray(s1.canonical[key], dtype=float))
        scale = max(np.abs(a1 - a0).max(), 1.0)
        if np.abs(am - 0.5 * (a0 + a1)).max() > tol_rel * scale * 1e3:
            return False
        if self.kind in ("cylinder", "cone"):
            if np.abs(np.asarray(s0.canonical["axis"])
                      - np.asarray(s1.canonical["axis"])).max() > 1e-12:
                return False
        r0 = s0.canonical.get("radius")
        if r0 is not None:
            rm, r1 = sm.canonical["radius"], s1.canonical["radius"]
            if abs(rm - 0.5 * (r0 + r1)) > tol_rel * max(abs(r1 - r0), 1.0) * 1e3:
                return False
        if self.kind == "cone" and abs(s0.canonical["half_angle"]
                                       - s1.canonical["half_angle"]) > 1e-12:
            return False
        return True

    def _path(self, s0, s1):
        key = self._pos_key(self.kind)
        a0 = np.atleast_1d(np.asarray(s0.canonical[key], dtype=float))
        a1 = np.atleast_1d(np.asarray(s1.canonical[key], dtype=float))
        da = (a1 - a0) / self.tau if self.tau > 0 else a1 * 0.0
        r0 = s0.canonical.get("radius", 0.0)
        r1 = s1.canonical.get("radius", r0)
        dr = (r1 - r0) / self.tau if self.tau > 0 else 0.0
        return a0, da, float(r0 or 0.0), float(dr)

    def value_coeffs(self, X):
        """(c0, c1, c2) with F(x; s) = c0 + c1 s + c2 s^2 per point."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.affine:
            return None
        if self.kind == "plane":
            c0 = self.configs[0][self.sid].value(X)
            # offset d(s) = d0 + s dd, F = n.x - d
            return c0, np.full(len(X), -self.dp[0]), np.zeros(len(X))
        # quadric with moving anchor a(s) and radius r(s):
        # F = (x-a) A (x-a) - r^2 for cylinders/spheres (A = projector)
        a0, da = self.p0, self.dp
        A = self.A
        rel = X - a0
        Ada = A @ da
        c0 = np.einsum("ni,ij,nj->n", rel, A, rel) - self.r0 ** 2
        c1 = -2.0 * rel @ Ada - 2.0 * self.r0 * self.dr
        c2 = float(da @ Ada) - self.dr ** 2
        return c0, c1, np.full(len(X), c2)

    def value_at(self, X, s):
        """Values at per-point parameters (vectorized)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.broadcast_to(np.asarray(s, dtype=float), (len(X),))
        co = self.value_coeffs(X)
        if co is not None:
            c0, c1, c2 = co
            return c0 + c1 * s + c2 * s * s
        vals = np.empty(len(X))
        n = len(self.grid) - 1
        idx = np.clip(np.round(s / max(self.tau, 1e-300) * n).astype(int), 0, n)
        for k in np.unique(idx):
            m = idx == k
            vals[m] = self.configs[k][self.sid].value(X[m])
        return vals

    def final_value(self, X):
        return self.configs[-1][self.sid].value(np.atleast_2d(X))


@dataclass
class _FaceSweep:
    face: str
    surface: str
    material_sign: float          # sign of F on the material side
    neighbors: list               # transversal: (sid, material sign)
    axial_trims: list = field(default_factory=list)
    # tangential neighbors cannot trim by their half-space (the face
    # stays on one side of them); instead the face ends at the tangent
    # ruling, a half-plane through the moving quadric anchor:
    # each entry is (anchor surface id, axis or None, u direction)
    chart: object = None          # rigid faces: exact region transport
    # directly pushed faces move rigidly, so the swept region is tested
    # exactly by pulling the point back through the motion and asking
    # the original face chart; neighbor trims then play no role


class SweptDelta:
    """Volume swept by the moving faces from 0 to tau, within neighbors.

    Both the directly pushed faces and the driven faces sweep: a fillet
    following a pushed face removes (or adds) material exactly like the
    pushed face itself, and the combined membership change is the union
    of the per-face sweeps with removal dominating.
    """

    def __init__(self, M, edit, tau, context=None, samples=256):
        self.M = M
        self.edit = edit
        self.tau = float(tau)
        self.ctx = context or PushContext(M, edit)
        n = samples if self.tau > 0 else 1
        self._grid = np.linspace(0.0, max(self.tau, 0.0), n + 1)
        self._configs = [self.ctx.cs.realize(s, self.ctx.solve_q(s))
                         for s in self._grid]
        self._psurf = {}
        moving_sids = set(self.ctx.moved_surfaces)
        moving_faces = [fid for fid, f in sorted(M.faces.items())
                        if f.surface in moving_sids]
        smooth = M.smooth_edges()
        pushed_sids = set(self.ctx.pushed_surfaces)
        self.sweeps = []
        for fid in moving_faces:
            face = M.faces[fid]
            if face.surface in pushed_sids:
                self.sweeps.append(_FaceSweep(fid, face.surface,
                                              -float(face.sense), [],
                                              chart=FaceChart(M, face)))
                continue
            boundary = [M.edges[eid].samples for eid in set(face.edge_ids())
                        if M.edges[eid].samples is not None]
            pts = np.vstack(boundary)
            neighbor_edges = {}
            for eid in set(face.edge_ids()):
                for ofid in M.faces_of_edge(eid):
                    if ofid != fid:
                        neighbor_edges.setdefault(ofid, []).append(eid)
            nb = []
            trims = []
            for ofid in sorted(neighbor_edges):
                sid = M.faces[ofid].surface
                if sid == face.surface:
                    continue
                smooth_shared = [e for e in neighbor_edges[ofid] if e in smooth]
                if smooth_shared:
                    trim = self._axial_trim(M, face.surface, sid,
                                            smooth_shared[0], pts)
                    if trim is not None:
                        trims.append(trim)
                        continue
                vals = M.surfaces[sid].value(pts)
                vals = vals[np.abs(vals) > 1e-9 * M.model_scale]
                sign = 1.0 if (len(vals) == 0 or np.median(np.sign(vals)) >= 0) else -1.0
                nb.append((sid, sign))
            self.sweeps.append(_FaceSweep(fid, face.surface, -float(face.sense),
                                          nb, trims))

    @staticmethod
    def _axial_trim(M, face_sid, neighbor_sid, shared_eid, face_pts):
        """Half-plane through the quadric anchor ending a tangent face.

        The face stops at the tangent ruling; its side of the ruling is
        the in-face tangent direction there, fixed by the sign that
        points toward the face's own boundary samples.
        """
        contact = M.edges[shared_eid].samples
        contact = contact[len(contact) // 2]
        for sid in (face_sid, neighbor_sid):
            s = M.surfaces[sid]
            key = {"sphere": "center", "cylinder": "point", "cone": "apex"}.get(s.kind)
            if key is None:
                continue
            anchor = np.asarray(s.canonical[key], dtype=float)
            axis = s.canonical.get("axis")
            rel = contact - anchor
            if axis is not None:
                axis = np.asarray(axis, dtype=float)
                rel = rel - (rel @ axis) * axis
            n = np.linalg.norm(rel)
            if n < 1e-12:
                continue
            radial = rel / n
            if axis is None:
                return (sid, None, radial)
            w = np.cross(axis, radial)
            toward = face_pts.mean(axis=0) - contact
            if toward @ w < 0:
                w = -w
            return (sid, axis, w)
        return None

    def _surf(self, sid):
        if sid not in self._psurf:
            self._psurf[sid] = _ParamSurface(self.M, self.ctx, sid, self.tau,
                                             self._grid, self._configs)
        return self._psurf[sid]

    def _neighbor_ok(self, sweep, X, s_star):
        if sweep.chart is not None:
            return self._rigid_contains(sweep, X, s_star)
        ok = np.ones(len(X), dtype=bool)
        for sid, sign in sweep.neighbors:
            vals = self._surf(sid).value_at(X, s_star)
            ok &= sign * vals >= -1e-7 * self.M.model_scale
        for sid, axis, u in sweep.axial_trims:
            anchor = self._anchor_at(sid, X, s_star)
            rel = X - anchor
            if axis is not None:
                rel = rel - np.outer(rel @ axis, axis)
            ok &= rel @ u >= -1e-7 * self.M.model_scale
        return ok

    def _rigid_contains(self, sweep, X, s_star):
        """Exact pushed-face region test by inverse motion transport."""
        m = self.edit.motion
        s_star = np.broadcast_to(np.asarray(s_star, dtype=float), (len(X),))
        if m.kind == TRANSLATE:
            back = X - s_star[:, None] * (m.direction * m.distance)[None, :]
            return sweep.chart.contains(back)
        out = np.zeros(len(X), dtype=bool)
        # rotations: transform per distinct grid parameter
        n = len(self._grid) - 1
        idx = np.clip(np.round(s_star / max(self.tau, 1e-300) * n).astype(int), 0, n)
        for k in np.unique(idx):
            mask = idx == k
            T = m.transform_at(self._grid[k]).inverse()
            out[mask] = sweep.chart.contains(T.apply_point(X[mask]))
        return out

    def _anchor_at(self, sid, X, s_star):
        ps = self._surf(sid)
        s_star = np.broadcast_to(np.asarray(s_star, dtype=float), (len(X),))
        if ps.affine and ps.kind != "plane":
            return ps.p0[None, :] + s_star[:, None] * ps.dp[None, :]
        key = {"sphere": "center", "cylinder": "point", "cone": "apex"}[ps.kind]
        n = len(self._grid) - 1
        idx = np.clip(np.round(s_star / max(self.tau, 1e-300) * n).astype(int), 0, n)
        out = np.empty((len(X), 3))
        for k in np.unique(idx):
            out[idx == k] = np.asarray(self._configs[k][sid].canonical[key], float)
        return out

    def _sweep_region(self, sweep, X):
        """(inside sweep, final-position material side) per point."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ps = self._surf(sweep.surface)
        final_inside = sweep.material_sign * ps.final_value(X) >= 0
        if self.tau <= 0:
            return np.zeros(len(X), dtype=bool), final_inside
        co = ps.value_coeffs(X)
        inside = np.zeros(len(X), dtype=bool)
        if co is not None:
            c0, c1, c2 = co
            lim = 1e-12 * max(1.0, self.M.model_scale ** 2)
            # quadratic (or linear) roots in s, each passage checked
            lin = np.abs(c2) < 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                s_lin = np.where(np.abs(c1) > 1e-300, -c0 / c1, np.inf)
            disc = c1 * c1 - 4 * c2 * c0
            sq = np.sqrt(np.maximum(disc, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                r1 = (-c1 - sq) / (2 * c2)
                r2 = (-c1 + sq) / (2 * c2)
            for cand, valid in ((s_lin, lin),
                                (r1, ~lin & (disc >= 0)),
                                (r2, ~lin & (disc > 0))):
                in_range = valid & (cand >= -1e-12) & (cand <= self.tau + 1e-12)
                if not in_range.any():
                    continue
                s_chk = np.clip(np.where(in_range, cand, 0.0), 0.0, self.tau)
                hit = in_range.copy()
                hit[in_range] &= self._neighbor_ok(sweep, X[in_range],
                                                   s_chk[in_range])
                inside |= hit
            return inside, final_inside
        vals = np.stack([cfg[sweep.surface].value(X) for cfg in self._configs])
        prev = vals[0]
        s_star = np.zeros(len(X))
        crossed = np.zeros(len(X), dtype=bool)
        for k in range(1, len(self._grid)):
            cur = vals[k]
            hit = ~crossed & (np.sign(prev) != np.sign(cur))
            s_star[hit] = self._grid[k - 1]
            crossed |= hit
            prev = cur
        inside = crossed.copy()
        inside[crossed] &= self._neighbor_ok(sweep, X[crossed], s_star[crossed])
        return inside, final_inside

    def contains(self, X):
        """Whether points lie inside the swept volume of any moving face."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(len(X), dtype=bool)
        for sweep in self.sweeps:
            inside, _ = self._sweep_region(sweep, X)
            out |= inside
        return out

    def apply(self, base_inside, X):
        """Membership of the model at tau given base membership at 0."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        result = np.asarray(base_inside, dtype=bool).copy()
        removed = np.zeros(len(X), dtype=bool)
        added = np.zeros(len(X), dtype=bool)
        for sweep in self.sweeps:
            inside, final_inside = self._sweep_region(sweep, X)
            removed |= inside & ~final_inside
            added |= inside & final_inside
        return (result | added) & ~removed


def build_swept_delta(M, edit, tau, context=None):
    return SweptDelta(M, edit, tau, context)


def delta_membership(sd: SweptDelta, x):
    """Point test of the swept volume (Eq. 6's delta term)."""
    return bool(sd.contains(np.atleast_2d(np.asarray(x, dtype=float)))[0])


# ---------------------------------------------------------------------------
# probe-space Boolean oracle
# ---------------------------------------------------------------------------


class _ProbeOracle:
    """Membership and boundary queries for the crossed configuration."""

    def __init__(self, M, edit, t_probe, context):
        self.M = M
        self.scale = M.model_scale
        self.base = SolidClassifier(M)
        self.delta = SweptDelta(M, edit, t_probe, context)

    def inside(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        base = self.base.classify(X)
        base_in = (base == "in") | (base == "on")
        return self.delta.apply(base_in, X)

    def on_boundary_quadrants(self, p, n1, n2, eps):
        """Membership of the four wedge-bisector offsets around an edge.

        The bisectors of +-n1 and +-n2 point into the four regions the
        two surfaces cut around their intersection, whatever the angle
        between them; a crease has one or three material wedges.
        """
        u1 = n1 / np.linalg.norm(n1)
        u2 = n2 / np.linalg.norm(n2)
        if np.linalg.norm(np.cross(u1, u2)) < 1e-6:
            return None
        offs = np.array([u1 + u2, u1 - u2, -u1 + u2, -u1 - u2])
        norms = np.linalg.norm(offs, axis=1)
        if norms.min() < 1e-6:
            return None
        offs /= norms[:, None]
        return self.inside(p + eps * offs)

    def boundary_owner(self, p, n, t_perp, eps):
        """Which side surfaces own the boundary next to a tangent edge.

        Walks a small distance to each side of the edge, finds the
        boundary crossing along the common normal there and returns the
        crossing heights; the caller compares surface residuals.
        """
        out = []
        for sgn in (1.0, -1.0):
            q = p + sgn * eps * t_perp
            us = np.linspace(-eps, eps, 9)
            pts = q[None, :] + us[:, None] * n[None, :]
            ins = self.inside(pts)
            if ins.all() or (~ins).all():
                out.append(None)
                continue
            k = int(np.argmax(ins[:-1] != ins[1:]))
            out.append(pts[k])
        return out


# ---------------------------------------------------------------------------
# surgery working state
# ---------------------------------------------------------------------------


class _Surgeon:
    def __init__(self, M: BrepSolid, edit, batch, all_roots, context):
        self.M0 = M
        self.edit = edit
        self.batch = batch
        self.ctx = context or PushContext(M, edit)
        self.tau = float(np.mean([cp.t for cp in batch]))
        self.scale = M.model_scale
        # Roots within 1e-4 of tau are the same instant (solver scatter
        # on compound events); only genuinely later roots cap the probe.
        # Incidence contacts separate quadratically, so absent a nearby
        # next event the probe is allowed to reach well past the edit
        # end (motions extrapolate fine).
        roots_after = [cp.t for cp in (all_roots or [])
                       if cp.t > self.tau + 1e-4]
        gap = (min(roots_after) - self.tau) if roots_after else 0.35
        self.delta_ladder = [min(d, 0.45 * gap) for d in (0.02, 0.05, 0.12)]
        self.delta_ladder = sorted({max(d, 1e-3) for d in self.delta_ladder})
        # fresh ids must not collide with ids minted by earlier repairs
        taken = 0
        for name in list(M.vertices) + list(M.edges) + list(M.faces):
            for part in name.split("~"):
                if part.startswith(("v+", "e+")) and part[2:].isdigit():
                    taken = max(taken, int(part[2:]) + 1)
                elif part.isdigit():
                    taken = max(taken, int(part) + 1)
        self.counter = itertools.count(taken)

    # -- naming ---------------------------------------------------------

    def _vid(self):
        return f"v+{next(self.counter)}"

    def _eid(self):
        return f"e+{next(self.counter)}"

    # -- main entry -------------------------------------------------------

    def run(self):
        last_error = None
        for delta in reversed(self.delta_ladder):
            try:
                return self._run_at(self.tau + delta)
            except ResolutionFailed as exc:
                last_error = exc
        raise last_error

    def _run_at(self, t_probe):
        M = self.M0
        self.t_probe = t_probe
        self.config_probe = apply_motion(M, self.edit, t_probe, context=self.ctx)
        self.config_tau = apply_motion(M, self.edit, self.tau, context=self.ctx)
        self.probe_regen = regenerate(M, self.config_probe)
        self.oracle = _ProbeOracle(M, self.edit, t_probe, self.ctx)
        self.eps = 1e-4 * self.scale
        trust = self._trust_radius()

        self.out = M.copy()
        self.affected = set()
        self.new_vertices = {}        # vid -> (position at probe, triple)
        self.split_parents = {}       # vid -> set of parent edge ids
        self.dropped_edges = set()
        self.rebound = []
        self.fresh_edges = set()      # ids whose samples are probe geometry
        self.piece_parent = {}        # split piece id -> parent edge id

        splits = self._collect_splits(trust)
        self._apply_splits(splits)
        self._drop_pass()
        self._splice_stubs()
        self._new_edges()
        self._close_chains()
        self._new_edges()
        self._drop_orphans()
        self._rebuild_loops()
        self._evaluate_at_tau()
        self._finalize()
        return self.out

    # -- split collection -------------------------------------------------

    def _displacement(self):
        """Largest surface displacement between tau and the probe."""
        disp = 0.0
        for sid in self.config_probe.moved:
            s_tau = self.config_tau.surfaces[sid]
            s_probe = self.config_probe.surfaces[sid]
            for key in ("point", "center", "apex"):
                if key in s_tau.canonical:
                    disp = max(disp, float(np.linalg.norm(
                        np.asarray(s_probe.canonical[key])
                        - np.asarray(s_tau.canonical[key]))))
            if "offset" in s_tau.canonical:
                disp = max(disp, abs(s_probe.canonical["offset"]
                                     - s_tau.canonical["offset"]))
        return disp

    def _trust_radius(self):
        """How far a probe contact may drift from the event point.

        Tangential contacts separate like the square root of the
        surface displacement, so the radius uses the geometric mean of
        the displacement and the model scale, plus a linear cushion.
        """
        disp = self._displacement()
        return 4.0 * np.sqrt(disp * self.scale) + 4.0 * disp + 1e-3 * self.scale

    def _edge_admits(self, eid, p, slack):
        """Contact point lies on the edge or just beyond one of its ends."""
        geom = self.probe_regen.edge_geometry[eid]
        if geom.raw is None:
            return False
        if geom.in_bounds(p, self.scale):
            return True
        e = self.M0.edges[eid]
        if e.bounds is None:
            return False
        for vid in e.bounds:
            vp = self.probe_regen.vertex_positions.get(vid)
            if vp is not None and np.linalg.norm(p - vp) <= slack:
                return True
        return False

    def _collect_splits(self, trust):
        """Probe contact points per edge, with spurious roots filtered.

        A root qualifies only if it sits on both event edges (inside
        their bounds, or just beyond an end within the motion slack,
        which is the re-bound case); other roots of the same surface
        triple belong to distant parts of the carriers.
        """
        M = self.M0
        # end overshoot grows linearly with the displacement, unlike the
        # tangential pair separation
        slack = 4.0 * self._displacement() + 1e-3 * self.scale
        splits = {}
        for cp in self.batch:
            ev = cp.event
            surfaces = [self.config_probe.surfaces[s]
                        for s in (ev.f1, ev.f2, ev.f3)]
            seeds = [cp.point]
            roots = solve_triple(*surfaces, np.asarray(seeds), self.scale)
            pts = [p for p in roots.points
                   if np.linalg.norm(p - cp.point) <= trust
                   and self._edge_admits(ev.edge_a, p, slack)
                   and self._edge_admits(ev.edge_b, p, slack)]
            triple = (ev.f1, ev.f2, ev.f3)
            for eid in (ev.edge_a, ev.edge_b):
                entry = splits.setdefault(eid, [])
                for p in pts:
                    if self._is_existing_vertex(eid, p):
                        continue
                    if not any(np.linalg.norm(p - q) < tol.ROOT_DEDUP * self.scale
                               for q, _ in entry):
                        entry.append((p, triple))
        return splits

    def _is_existing_vertex(self, eid, p):
        """Contact at an edge's own end vertex needs no new topology."""
        e = self.M0.edges.get(eid)
        if e is None or e.bounds is None:
            return False
        for vid in e.bounds:
            vp = self.probe_regen.vertex_positions.get(vid)
            if vp is not None and np.linalg.norm(p - vp) < tol.ROOT_DEDUP * self.scale:
                return True
        return False

    def _vertex_for(self, p, triple):
        for vid, (pos, _) in self.new_vertices.items():
            if np.linalg.norm(pos - p) < tol.ROOT_DEDUP * self.scale:
                return vid
        vid = self._vid()
        self.new_vertices[vid] = (np.asarray(p, dtype=float), tuple(sorted(triple)))
        self.out.vertices[vid] = Vertex(vid, p, tuple(sorted(triple)),
                                        hint=np.asarray(p, dtype=float))
        return vid

    def _apply_splits(self, splits):
        M = self.M0
        for eid, pts in sorted(splits.items()):
            if not pts:
                continue
            geom = self.probe_regen.edge_geometry[eid]
            if geom.raw is None:
                continue
            e = self.out.edges[eid]
            P = geom.raw
            L = polyline_length(P, e.closed)
            events = []
            for p, triple in pts:
                s = _signed_param(P, p) if not e.closed else polyline_project(P, p, True)[0]
                events.append((s, p, triple))
            events.sort(key=lambda x: x[0])
            if e.closed:
                self._split_closed(e, P, events)
                continue
            interior = [ev for ev in events if 1e-9 * self.scale < ev[0] < L - 1e-9 * self.scale]
            before = [ev for ev in events if ev[0] <= 1e-9 * self.scale]
            after = [ev for ev in events if ev[0] >= L - 1e-9 * self.scale]
            if before:
                vid = self._vertex_for(before[0][1], before[0][2])
                self.split_parents.setdefault(vid, set()).add(eid)
                self.rebound.append((eid, 0, vid))
            if after:
                vid = self._vertex_for(after[-1][1], after[-1][2])
                self.split_parents.setdefault(vid, set()).add(eid)
                self.rebound.append((eid, 1, vid))
            if interior:
                self._split_open(e, P, interior)
        for eid, side, vid in self.rebound:
            e = self.out.edges[eid]
            b = list(e.bounds)
            b[side] = vid
            e.bounds = tuple(b)
            self._rebound_samples(e, side)
            self.affected.update(self.out.faces_of_edge(eid))

    def _rebound_samples(self, e, side):
        """Probe polyline of an edge whose end moved to a new vertex."""
        geom = self.probe_regen.edge_geometry[e.id]
        raw = geom.raw
        keep_vid = e.bounds[1 - side]
        keep = self.probe_regen.vertex_positions.get(
            keep_vid, self.M0.vertices[keep_vid].position
            if keep_vid in self.M0.vertices else None)
        if keep is None:
            keep = self.new_vertices[keep_vid][0]
        new = self.new_vertices[e.bounds[side]][0]
        s_keep = _signed_param(raw, keep)
        s_new = _signed_param(raw, new)
        lo, hi = sorted((s_keep, s_new))
        P = self._segment(raw, lo, hi,
                          keep if s_keep < s_new else new,
                          new if s_keep < s_new else keep)
        if side == 0:
            P = P if np.allclose(P[0], new) else P[::-1]
        else:
            P = P if np.allclose(P[-1], new) else P[::-1]
        e.samples = P
        e.hint = P[len(P) // 2].copy()
        self.fresh_edges.add(e.id)

    def _segment(self, P, s_lo, s_hi, p_lo, p_hi):
        run = 0.0
        acc = [np.asarray(p_lo, dtype=float)]
        for k in range(len(P)):
            if k > 0:
                run += float(np.linalg.norm(P[k] - P[k - 1]))
            if s_lo + 1e-12 < run < s_hi - 1e-12:
                acc.append(P[k])
        acc.append(np.asarray(p_hi, dtype=float))
        return np.asarray(acc)

    def _split_open(self, e, P, interior):
        bounds = [e.bounds[0]] + [None] * len(interior) + [e.bounds[1]]
        cuts = [0.0] + [s for s, _, _ in interior] + [polyline_length(P, False)]
        pts = ([self.probe_regen.vertex_positions.get(e.bounds[0], P[0])]
               + [p for _, p, _ in interior]
               + [self.probe_regen.vertex_positions.get(e.bounds[1], P[-1])])
        for k, (_, p, triple) in enumerate(interior):
            vid = self._vertex_for(p, triple)
            self.split_parents.setdefault(vid, set()).add(e.id)
            bounds[k + 1] = vid
        pieces = []
        for k in range(len(bounds) - 1):
            pid = f"{e.id}~{next(self.counter)}" if k else e.id
            samples = self._segment(P, cuts[k], cuts[k + 1], pts[k], pts[k + 1])
            piece = Edge(pid, e.carriers, (bounds[k], bounds[k + 1]), samples,
                         e.branch, hint=samples[len(samples) // 2].copy(),
                         contact=e.contact)
            pieces.append(piece)
        self.out.edges.pop(e.id)
        for piece in pieces:
            self.out.edges[piece.id] = piece
            self.fresh_edges.add(piece.id)
            self.piece_parent[piece.id] = e.id
        # patch loops: the pieces replace the edge in walking order
        for f in self.out.faces.values():
            for loop in f.loops:
                for i, (eid, sense) in enumerate(list(loop)):
                    if eid == e.id:
                        repl = [(p.id, sense) for p in
                                (pieces if sense > 0 else reversed(pieces))]
                        loop[i:i + 1] = repl
                        self.affected.add(f.id)

    def _split_closed(self, e, P, events):
        vids = []
        cuts = []
        for s, p, triple in events:
            vid = self._vertex_for(p, triple)
            self.split_parents.setdefault(vid, set()).add(e.id)
            vids.append(vid)
            cuts.append(s)
        L = polyline_length(P, True)
        Pc = np.vstack([P, P[:1]])
        pieces = []
        for k in range(len(cuts)):
            s_lo, s_hi = cuts[k], cuts[(k + 1) % len(cuts)]
            if s_hi <= s_lo:
                s_hi += L
            pid = f"{e.id}~{next(self.counter)}" if k else e.id
            run = 0.0
            acc = [self.new_vertices[vids[k]][0]]
            for i in range(1, 2 * len(Pc)):
                j = i % len(P)
                prev = (i - 1) % len(P)
                run += float(np.linalg.norm(P[j] - P[prev]))
                if s_lo + 1e-12 < run < s_hi - 1e-12:
                    acc.append(P[j])
                if run >= s_hi:
                    break
            acc.append(self.new_vertices[vids[(k + 1) % len(cuts)]][0])
            piece = Edge(pid, e.carriers, (vids[k], vids[(k + 1) % len(cuts)]),
                         np.asarray(acc), e.branch,
                         hint=np.asarray(acc[len(acc) // 2], dtype=float),
                         contact=e.contact)
            pieces.append(piece)
        self.out.edges.pop(e.id)
        for piece in pieces:
            self.out.edges[piece.id] = piece
            self.fresh_edges.add(piece.id)
            self.piece_parent[piece.id] = e.id
        for f in self.out.faces.values():
            for loop in f.loops:
                for i, (eid, sense) in enumerate(list(loop)):
                    if eid == e.id:
                        repl = [(p.id, sense) for p in
                                (pieces if sense > 0 else reversed(pieces))]
                        loop[i:i + 1] = repl
                        self.affected.add(f.id)

    # -- drop pass ---------------------------------------------------------

    def _edge_probe_polyline(self, e):
        if e.id in self.fresh_edges:
            return e.samples, True
        geom = self.probe_regen.edge_geometry.get(e.id)
        if geom is not None:
            return geom.samples if geom.samples is not None else geom.raw, geom.alive
        # new piece: its samples were built at probe already
        return e.samples, True

    @staticmethod
    def _interp_along(P, fractions):
        """Points at arc-length fractions of a polyline (interior only)."""
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        L = seg.sum()
        if L <= 0:
            return [P[len(P) // 2]]
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        out = []
        for f in fractions:
            s = f * L
            k = int(np.searchsorted(cum, s, side="right") - 1)
            k = min(k, len(seg) - 1)
            u = (s - cum[k]) / max(seg[k], 1e-300)
            out.append(P[k] + u * (P[k + 1] - P[k]))
        return out

    def _edge_on_boundary(self, e):
        P, alive = self._edge_probe_polyline(e)
        if not alive or P is None or len(P) < 2:
            return False
        sa = self.config_probe.surfaces[e.carriers[0]]
        sb = self.config_probe.surfaces[e.carriers[1]]
        # interior samples only: corner points sit on other boundaries
        # and always look like creases; projection removes chord sag
        probes = np.asarray(self._interp_along(P, (0.31, 0.5, 0.73)))
        probes, ok = project_to_curve(sa, sb, probes, self.scale)
        votes = []
        for p in probes[ok]:
            n1, n2 = sa.gradient(p), sb.gradient(p)
            if min(np.linalg.norm(n1), np.linalg.norm(n2)) < 1e-12:
                continue
            quad = self.oracle.on_boundary_quadrants(p, n1, n2, self.eps)
            if quad is None:
                votes.append(self._tangent_edge_real(e, p, sa, sb))
                continue
            n_in = int(quad.sum())
            if n_in in (1, 3):
                votes.append(True)
            elif n_in == 2:
                # same-side pair: the boundary is smooth there and the
                # edge is a leftover marking, not a crease
                same_n1 = (quad[0] and quad[1]) or (quad[2] and quad[3])
                same_n2 = (quad[0] and quad[2]) or (quad[1] and quad[3])
                votes.append(not (same_n1 or same_n2))
            else:
                votes.append(False)
        if not votes:
            return False
        return sum(votes) * 2 >= len(votes)

    def _tangent_edge_real(self, e, p, sa, sb):
        """A tangent pair is a real edge iff each side's boundary lies on
        a different carrier."""
        g = sa.gradient(p)
        n = g / np.linalg.norm(g)
        tangent = None
        P, _ = self._edge_probe_polyline(e)
        k = int(np.argmin(np.linalg.norm(P - p, axis=1)))
        if k + 1 < len(P):
            tangent = P[k + 1] - P[k]
        elif k > 0:
            tangent = P[k] - P[k - 1]
        if tangent is None or np.linalg.norm(tangent) < 1e-12:
            return False
        t_hat = tangent / np.linalg.norm(tangent)
        t_perp = np.cross(n, t_hat)
        owners = []
        for b in self.oracle.boundary_owner(p, n, t_perp, 8 * self.eps):
            if b is None:
                owners.append(None)
                continue
            da = sa.distance_estimate(b)
            db = sb.distance_estimate(b)
            owners.append("a" if da < db else "b")
        if None in owners:
            return False
        return owners[0] != owners[1]

    def _drop_edge(self, eid):
        self.dropped_edges.add(eid)
        e = self.out.edges.pop(eid, None)
        for f in self.out.faces.values():
            for loop in f.loops:
                before = len(loop)
                loop[:] = [(a, s) for a, s in loop if a != eid]
                if len(loop) != before:
                    self.affected.add(f.id)

    def _drop_pass(self):
        # dead or inverted carrier intersections first
        for eid, geom in self.probe_regen.edge_geometry.items():
            if not geom.alive and eid in self.out.edges:
                self._drop_edge(eid)
        scope = set(self.affected)
        for cp in self.batch:
            scope.add(cp.event.face)
        check = set()
        for fid in scope:
            f = self.out.faces.get(fid)
            if f is not None:
                check.update(f.edge_ids())
        for eid in sorted(check):
            e = self.out.edges.get(eid)
            if e is None:
                continue
            if not self._edge_on_boundary(e):
                self._drop_edge(eid)
        # faces having lost every edge disappear
        for fid in sorted(self.out.faces):
            f = self.out.faces[fid]
            if all(not loop for loop in f.loops) or not f.edge_ids():
                del self.out.faces[fid]
                self.affected.discard(fid)

    # -- stub splicing (separation events) ----------------------------------

    def _splice_stubs(self):
        """Reconnect surviving edges whose shared vertices died.

        Two stubs over geometrically identical carrier pairs whose gap
        midpoint is still on the boundary are one edge; a stub pair on
        the same edge closes it into a full loop edge.
        """
        dead = {vid for vid in self.out.vertices
                if vid in self.probe_regen.vertex_positions
                and self.probe_regen.vertex_positions.get(vid) is None}
        dead |= {vid for vid, v in self.out.vertices.items()
                 if vid not in self.probe_regen.vertex_positions
                 and vid not in self.new_vertices
                 and self._vertex_dead(v)}
        if not dead:
            return
        stubs = []
        for eid, e in self.out.edges.items():
            if e.bounds is None:
                continue
            for side in (0, 1):
                if e.bounds[side] in dead:
                    stubs.append([eid, side])
        groups = []
        for stub in stubs:
            e = self.out.edges[stub[0]]
            placed = False
            for g in groups:
                e0 = self.out.edges[g[0][0]]
                if self._pairs_coincident(e.carriers, e0.carriers):
                    g.append(stub)
                    placed = True
                    break
            if not placed:
                groups.append([stub])
        for g in groups:
            if len(g) != 2:
                raise ResolutionFailed(
                    f"cannot splice {len(g)} loose ends over carrier pair "
                    f"{self.out.edges[g[0][0]].carriers}")
            self._merge_stub_pair(g[0], g[1])
        for vid in dead:
            self.out.vertices.pop(vid, None)

    def _vertex_dead(self, v):
        try:
            pos = _resolve_vertex(self.M0, self.config_probe, v, {})
        except Exception:
            return True
        return pos is None

    def _pairs_coincident(self, pa, pb):
        used = set()
        for a in pa:
            hit = None
            for b in pb:
                if b in used:
                    continue
                if a == b or surfaces_coincident(self.M0.surfaces[a],
                                                 self.M0.surfaces[b]):
                    hit = b
                    break
            if hit is None:
                return False
            used.add(hit)
        return True

    def _merge_stub_pair(self, stub_a, stub_b):
        ea = self.out.edges[stub_a[0]]
        eb = self.out.edges[stub_b[0]]
        Pa, _ = self._edge_probe_polyline(ea)
        Pb, _ = self._edge_probe_polyline(eb)
        end_a = Pa[-1] if stub_a[1] == 1 else Pa[0]
        end_b = Pb[-1] if stub_b[1] == 1 else Pb[0]
        gap_seeds = np.linspace(end_a, end_b, 9)[1:-1]
        sa = self.config_probe.surfaces[ea.carriers[0]]
        sb = self.config_probe.surfaces[ea.carriers[1]]
        gap, ok = project_to_curve(sa, sb, gap_seeds, self.scale)
        if not ok.all():
            raise ResolutionFailed(f"gap between {ea.id} and {eb.id} left the carrier pair")
        mid = gap[len(gap) // 2]
        if not self.oracle.inside(np.vstack([mid[None, :]]))[0]:
            pass  # boundary points classify either way; verify with offsets
        if ea.id == eb.id:
            # the edge closes onto itself
            P = np.vstack([Pa, gap])
            ea.bounds = None
            ea.samples = P
            ea.hint = mid.copy()
            self.affected.update(self.out.faces_of_edge(ea.id))
            return
        if self._faces_merge_needed(ea, eb):
            self._merge_faces_over(ea, eb)
        Pa_o = Pa if stub_a[1] == 1 else Pa[::-1]
        Pb_o = Pb if stub_b[1] == 0 else Pb[::-1]
        samples = np.vstack([Pa_o, gap, Pb_o])
        start = ea.bounds[0] if stub_a[1] == 1 else ea.bounds[1]
        end = eb.bounds[1] if stub_b[1] == 0 else eb.bounds[0]
        merged = Edge(ea.id, ea.carriers, (start, end), samples, ea.branch,
                      hint=mid.copy(), contact=ea.contact and eb.contact)
        self.out.edges[ea.id] = merged
        # eb disappears; loops referencing it now use the merged edge
        self.out.edges.pop(eb.id, None)
        for f in self.out.faces.values():
            for loop in f.loops:
                for i, (eid, sense) in enumerate(list(loop)):
                    if eid == eb.id:
                        loop[i] = (ea.id, sense)
                        self.affected.add(f.id)
                    elif eid == ea.id:
                        self.affected.add(f.id)

    def _faces_merge_needed(self, ea, eb):
        return not self._pairs_coincident(ea.carriers, ea.carriers) or \
            set(ea.carriers) != set(eb.carriers)

    def _merge_faces_over(self, ea, eb):
        """Merge faces carried by coincident-but-distinct surfaces."""
        other = [b for b in eb.carriers if b not in ea.carriers]
        for sid_b in other:
            sid_a = next(a for a in ea.carriers
                         if surfaces_coincident(self.M0.surfaces[a],
                                                self.M0.surfaces[sid_b]))
            faces_a = [f for f in self.out.faces.values() if f.surface == sid_a]
            faces_b = [f for f in self.out.faces.values() if f.surface == sid_b]
            if not faces_a or not faces_b:
                continue
            fa, fb = faces_a[0], faces_b[0]
            fa.loops.extend(fb.loops)
            del self.out.faces[fb.id]
            self.affected.add(fa.id)
            self.affected.discard(fb.id)
            # absorb the coincident surface id everywhere
            for e in self.out.edges.values():
                if sid_b in e.carriers:
                    e.carriers = tuple(sid_a if c == sid_b else c
                                       for c in e.carriers)
            for v in self.out.vertices.values():
                if sid_b in v.triple:
                    v.triple = tuple(sorted(sid_a if s == sid_b else s
                                            for s in set(v.triple) | {sid_a}
                                            if not (s == sid_b)))
            for f in self.out.faces.values():
                if f.surface == sid_b:
                    f.surface = sid_a
            self.out.surfaces.pop(sid_b, None)

    # -- chain closure (contact beyond an edge end) ---------------------------

    def _chain_ends(self, fid):
        """Vertices where the face's surviving boundary chains break.

        New edges assigned to the face count as boundary even before
        loops are retraced.
        """
        f = self.out.faces.get(fid)
        if f is None:
            return []
        eids = {eid for loop in f.loops for eid, _ in loop}
        degree = {}
        owner = {}
        for eid in eids:
            e = self.out.edges.get(eid)
            if e is None or e.bounds is None:
                continue
            for vid in e.bounds:
                degree[vid] = degree.get(vid, 0) + 1
                owner.setdefault(vid, []).append(eid)
        return [(vid, owner[vid][0]) for vid, d in sorted(degree.items()) if d == 1]

    def _close_chains(self):
        """Reconnect faces whose boundary lost a corner to a collapse.

        When a face between two surviving edges vanished, the survivors
        meet on a fresh intersection of their carrier pairs: one edge
        extends past its old end, the other is cut back.  The crossing
        becomes a new vertex, feeding the new-edge discovery exactly
        like an ordinary split point.
        """
        for fid in sorted(set(self.affected)):
            f = self.out.faces.get(fid)
            if f is None:
                continue
            ends = self._chain_ends(fid)
            if not ends or len(ends) % 2:
                continue
            used = set()
            pairs = []
            for i, (va, ea) in enumerate(ends):
                if va in used:
                    continue
                best = None
                pa = self._vertex_probe_pos(va)
                for vb, eb in ends[i + 1:]:
                    if vb in used or vb == va:
                        continue
                    pb = self._vertex_probe_pos(vb)
                    d = np.linalg.norm(pa - pb)
                    if best is None or d < best[0]:
                        best = (d, vb, eb)
                if best is None:
                    continue
                used.update({va, best[1]})
                pairs.append(((va, ea), (best[1], best[2])))
            for (va, ea), (vb, eb) in pairs:
                self._close_gap(fid, va, ea, vb, eb)

    def _vertex_probe_pos(self, vid):
        p = self.probe_regen.vertex_positions.get(vid)
        if p is not None:
            return p
        if vid in self.new_vertices:
            return self.new_vertices[vid][0]
        return self.out.vertices[vid].position

    def _close_gap(self, fid, va, ea_id, vb, eb_id):
        f2 = self.out.faces[fid].surface
        ea = self.out.edges[ea_id]
        eb = self.out.edges[eb_id]
        oa = ea.carriers[0] if ea.carriers[1] == f2 else ea.carriers[1]
        ob = eb.carriers[0] if eb.carriers[1] == f2 else eb.carriers[1]
        if oa == ob:
            return  # a later discovery pass connects these ends
        pa, pb = self._vertex_probe_pos(va), self._vertex_probe_pos(vb)
        seed = 0.5 * (pa + pb)
        roots = solve_triple(self.config_probe.surfaces[oa],
                             self.config_probe.surfaces[f2],
                             self.config_probe.surfaces[ob],
                             seed[None, :], self.scale)
        if len(roots) == 0:
            return
        p = min(roots.points, key=lambda r: np.linalg.norm(r - seed))
        if np.linalg.norm(p - seed) > 0.5 * np.linalg.norm(pa - pb) + self._trust_radius():
            return
        vid = self._vertex_for(p, (oa, f2, ob))
        for eid, vold in ((ea_id, va), (eb_id, vb)):
            self.split_parents.setdefault(vid, set()).add(eid)
            e = self.out.edges[eid]
            side = 0 if e.bounds[0] == vold else 1
            P, _ = self._edge_probe_polyline(e)
            s_new = _signed_param(P, p)
            L = polyline_length(P)
            interior = 4 * tol.EDGE_END * self.scale < s_new < L - 4 * tol.EDGE_END * self.scale
            if interior:
                # cut the dangling side back to the closure point
                keep_vid = e.bounds[1 - side]
                keep_pos = self._vertex_probe_pos(keep_vid)
                s_keep = _signed_param(P, keep_pos)
                lo, hi = sorted((s_keep, s_new))
                seg = self._segment(P, lo, hi,
                                    keep_pos if s_keep < s_new else p,
                                    p if s_keep < s_new else keep_pos)
                if side == 0:
                    seg = seg if np.allclose(seg[0], p) else seg[::-1]
                else:
                    seg = seg if np.allclose(seg[-1], p) else seg[::-1]
                e.samples = seg
                b = list(e.bounds)
                b[side] = vid
                e.bounds = tuple(b)
                e.hint = seg[len(seg) // 2].copy()
                self.fresh_edges.add(e.id)
            else:
                self.rebound.append((eid, side, vid))
                b = list(e.bounds)
                b[side] = vid
                e.bounds = tuple(b)
                self._rebound_samples(e, side)
            self.affected.update(self.out.faces_of_edge(eid))

    # -- new edges -----------------------------------------------------------

    def _new_edges(self):
        groups = {}
        for vid, (pos, triple) in self.new_vertices.items():
            if vid not in self.out.vertices:
                continue
            parents = self.split_parents.get(vid, set())
            parent_pairs = {frozenset(self.M0.edges[p].carriers)
                            for p in parents if p in self.M0.edges}
            for pair in itertools.combinations(sorted(triple), 2):
                if frozenset(pair) in parent_pairs:
                    continue
                groups.setdefault(pair, []).append(vid)
        for pair, vids in sorted(groups.items()):
            if len(vids) < 2:
                continue
            sa = self.config_probe.surfaces[pair[0]]
            sb = self.config_probe.surfaces[pair[1]]
            for comp in self._branch_components(vids, sa, sb):
                pts = np.array([self.new_vertices[v][0] for v in comp])
                if len(comp) < 2:
                    continue
                axis = pts[np.argmax(np.linalg.norm(pts - pts[0], axis=1))] - pts[0]
                if np.linalg.norm(axis) < 1e-12:
                    continue
                order = np.argsort(pts @ axis)
                for i in range(len(order) - 1):
                    va, vb = comp[order[i]], comp[order[i + 1]]
                    if any(set(e.bounds or ()) == {va, vb} and set(e.carriers) == set(pair)
                           for e in self.out.edges.values()):
                        continue
                    pa, pb = self.new_vertices[va][0], self.new_vertices[vb][0]
                    seeds = np.linspace(pa, pb, 9)
                    P, ok = project_to_curve(sa, sb, seeds, self.scale)
                    if not ok.all():
                        continue
                    if not self._edge_on_boundary_samples(P, sa, sb):
                        continue
                    faces = self._faces_for_new_edge(pair, (va, vb))
                    if len(faces) != 2:
                        raise ResolutionFailed(
                            f"new edge on {pair} borders faces {faces}")
                    eid = self._eid()
                    mid = P[len(P) // 2]
                    # edges born from a crossing are incidental contacts,
                    # never design fillets, whatever their momentary angle
                    self.out.edges[eid] = Edge(eid, pair, (va, vb), P,
                                               hint=mid.copy(), contact=True)
                    self.fresh_edges.add(eid)
                    for fid in faces:
                        self.out.faces[fid].loops[0].append((eid, 1))
                        self.affected.add(fid)

    def _branch_components(self, vids, sa, sb):
        """Vertices grouped by connected component of the carrier curve."""
        parent = {v: v for v in vids}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for i, va in enumerate(vids):
            for vb in vids[i + 1:]:
                pa, pb = self.new_vertices[va][0], self.new_vertices[vb][0]
                mid = 0.5 * (pa + pb)[None, :]
                proj, ok = project_to_curve(sa, sb, mid, self.scale)
                if ok[0] and np.linalg.norm(proj[0] - mid[0]) < 1e-3 * self.scale:
                    ra, rb = find(va), find(vb)
                    if ra != rb:
                        parent[ra] = rb
        comps = {}
        for v in vids:
            comps.setdefault(find(v), []).append(v)
        return [sorted(c) for c in sorted(comps.values())]

    def _edge_on_boundary_samples(self, P, sa, sb):
        k = len(P) // 2
        p = P[k]
        n1, n2 = sa.gradient(p), sb.gradient(p)
        quad = self.oracle.on_boundary_quadrants(p, n1, n2, self.eps)
        if quad is None:
            return True
        return int(quad.sum()) in (1, 3)

    def _faces_for_new_edge(self, pair, vids):
        faces = set()
        for vid in vids:
            for parent in self.split_parents.get(vid, ()):
                for fid, f in self.out.faces.items():
                    eids = set(f.edge_ids())
                    if f.surface in pair and any(
                            e == parent or self.piece_parent.get(e) == parent
                            for e in eids):
                        faces.add(fid)
        per_surface = {}
        for fid in faces:
            per_surface.setdefault(self.out.faces[fid].surface, set()).add(fid)
        out = []
        for sid in pair:
            cands = per_surface.get(sid, set())
            if len(cands) == 1:
                out.append(next(iter(cands)))
            elif len(cands) > 1:
                raise ResolutionFailed(
                    f"ambiguous face for new edge on {sid}: {sorted(cands)}")
            else:
                all_on = [fid for fid, f in self.out.faces.items()
                          if f.surface == sid]
                if len(all_on) == 1:
                    out.append(all_on[0])
        return out

    # -- cleanup and loop rebuild ---------------------------------------------

    def _drop_orphans(self):
        used = set()
        for e in self.out.edges.values():
            if e.bounds is not None:
                used.update(e.bounds)
        for vid in sorted(set(self.out.vertices) - used):
            del self.out.vertices[vid]

    def _rebuild_loops(self):
        inherited = {}
        for fid in sorted(self.affected):
            f = self.out.faces.get(fid)
            if f is None:
                continue
            for loop in f.loops:
                for eid, sense in loop:
                    inherited.setdefault((fid, eid), sense)
        for fid in sorted(self.affected):
            f = self.out.faces.get(fid)
            if f is None:
                continue
            eids = sorted({e for loop in f.loops for e, _ in loop})
            eids = [e for e in eids if e in self.out.edges]
            loops = self._trace_loops(fid, eids, inherited)
            f.loops = loops
        self._orient_loops()
        self._split_multi_outer_faces()

    def _trace_loops(self, fid, eids, inherited):
        by_vertex = {}
        closed = []
        open_edges = []
        for eid in eids:
            e = self.out.edges[eid]
            if e.bounds is None:
                closed.append(eid)
            else:
                open_edges.append(eid)
                by_vertex.setdefault(e.bounds[0], []).append((eid, 1))
                by_vertex.setdefault(e.bounds[1], []).append((eid, -1))
        for vid, inc in by_vertex.items():
            if len(inc) != 2:
                raise ResolutionFailed(
                    f"face {fid}: vertex {vid} has {len(inc)} boundary edges")
        loops = [[(eid, 1)] for eid in closed]
        unused = set(open_edges)
        while unused:
            start = min(unused)
            sense = inherited.get((fid, start), 1)
            loop = [(start, sense)]
            unused.discard(start)
            e = self.out.edges[start]
            head = e.bounds[1] if sense > 0 else e.bounds[0]
            first_tail = e.bounds[0] if sense > 0 else e.bounds[1]
            while head != first_tail:
                nxt = [x for x in by_vertex[head] if x[0] != loop[-1][0]]
                if len(nxt) != 1 or nxt[0][0] not in unused:
                    raise ResolutionFailed(f"face {fid}: open boundary at {head}")
                eid2, orient = nxt[0]
                loop.append((eid2, orient))
                unused.discard(eid2)
                e2 = self.out.edges[eid2]
                head = e2.bounds[1] if orient > 0 else e2.bounds[0]
            loops.append(loop)
        return loops

    def _orient_loops(self):
        """Loop orientations from manifold parity, anchored on the
        untouched part of the model.

        Each loop either keeps or reverses its traced direction; every
        edge's two co-edges must end up with opposite senses, which is a
        parity constraint between the two loops.  Loops of unaffected
        faces are fixed, and the constraints propagate outward.
        """
        uses = self.out.edge_uses()
        for eid, us in uses.items():
            if len(us) != 2:
                raise ResolutionFailed(f"edge {eid} has {len(us)} co-edges")
        nodes = {(f.id, li) for f in self.out.faces.values()
                 for li in range(len(f.loops))}
        fixed = {n: 0 for n in nodes if n[0] not in self.affected}
        adj = {}
        for eid, ((fa, la, _, sa), (fb, lb, _, sb)) in uses.items():
            a, b = (fa, la), (fb, lb)
            parity = 1 if sa == sb else 0
            adj.setdefault(a, []).append((b, parity))
            adj.setdefault(b, []).append((a, parity))
        color = dict(fixed)
        stack = sorted(fixed)
        seeds = iter(sorted(nodes))
        while True:
            while stack:
                cur = stack.pop()
                for nxt, parity in adj.get(cur, ()):
                    want = color[cur] ^ parity
                    if nxt in color:
                        if color[nxt] != want:
                            raise ResolutionFailed(
                                f"inconsistent loop orientation at {nxt}")
                    else:
                        color[nxt] = want
                        stack.append(nxt)
            start = next((n for n in seeds if n not in color), None)
            if start is None:
                break
            color[start] = 0
            stack = [start]
        # anchored components may force flips of fixed loops: re-check
        for n, c in color.items():
            if n[0] not in self.affected and c != 0:
                raise ResolutionFailed(f"orientation would flip untouched loop {n}")
        for (fid, li), c in sorted(color.items()):
            if c:
                f = self.out.faces[fid]
                f.loops[li] = [(e2, -s2) for e2, s2 in reversed(f.loops[li])]

    def _split_multi_outer_faces(self):
        for fid in sorted(self.affected):
            f = self.out.faces.get(fid)
            if f is None or len(f.loops) <= 1:
                continue
            chart = FaceChart(self.out, f)
            if chart.mode == "wrapped":
                continue
            uvs = chart.loops_uv
            depth = []
            for k in range(len(f.loops)):
                d = 0
                for m, other in enumerate(uvs):
                    if m != k and len(uvs[k]) and winding_number(other, uvs[k][:1])[0] != 0:
                        d += 1
                depth.append(d)
            outers = [k for k in range(len(f.loops)) if depth[k] % 2 == 0]
            if len(outers) <= 1:
                continue
            assignments = {k: [] for k in outers}
            for k in range(len(f.loops)):
                if k in outers:
                    continue
                holder = min((m for m in outers
                              if winding_number(uvs[m], uvs[k][:1])[0] != 0),
                             default=None, key=lambda m: abs(signed_area(uvs[m])))
                if holder is None:
                    raise ResolutionFailed(f"hole loop of {fid} has no container")
                assignments[holder].append(k)
            first = True
            for m in outers:
                loops = [f.loops[m]] + [f.loops[k] for k in assignments[m]]
                if first:
                    new_face = Face(f.id, f.surface, loops, f.sense)
                    self.out.faces[f.id] = new_face
                    first = False
                else:
                    nid = f"{f.id}~{next(self.counter)}"
                    self.out.faces[nid] = Face(nid, f.surface, loops, f.sense)
                    self.affected.add(nid)

    # -- final geometry at tau ---------------------------------------------

    def _evaluate_at_tau(self):
        out = self.out
        out.surfaces = {sid: self.config_tau.surfaces.get(sid, s)
                        for sid, s in out.surfaces.items()}
        tau_regen = self.probe_regen  # probe positions seed the tau solve
        for vid, v in sorted(out.vertices.items()):
            pos = None
            if vid in self.new_vertices:
                seeds_from = self.new_vertices[vid][0]
            else:
                pos = self.probe_regen.vertex_positions.get(vid)
                seeds_from = pos if pos is not None else v.position
            tri = [out.surfaces[s] for s in v.triple if s in out.surfaces]
            if len(tri) < 3:
                raise ResolutionFailed(f"vertex {vid} lost a defining surface")
            roots = solve_triple(tri[0], tri[1], tri[2],
                                 np.atleast_2d(seeds_from), self.scale)
            if len(roots) == 0:
                raise ResolutionFailed(f"vertex {vid} has no position at tau")
            v.position = min(roots.points,
                             key=lambda p: np.linalg.norm(p - seeds_from))
        for eid, e in sorted(out.edges.items()):
            sa = out.surfaces[e.carriers[0]]
            sb = out.surfaces[e.carriers[1]]
            P, ok = project_to_curve(sa, sb, e.samples, self.scale)
            if ok.sum() < 2:
                raise ResolutionFailed(f"edge {eid} lost its curve at tau")
            P = P[ok]
            if e.bounds is not None:
                # clip interior samples between the endpoint positions,
                # which may have moved inside the old sample range
                p0 = out.vertices[e.bounds[0]].position
                p1 = out.vertices[e.bounds[1]].position
                L = polyline_length(P)
                if (np.linalg.norm(p0 - p1) < 16 * tol.EDGE_END * self.scale
                        and L > tol.COLLAPSE * self.scale):
                    # distinct vertices at one position: the edge spans a
                    # full loop whose ends touch (coincident twins)
                    P = np.vstack([p0[None, :], P[1:-1], p1[None, :]])
                else:
                    s0 = _signed_param(P, p0)
                    s1 = _signed_param(P, p1)
                    if s1 < s0:
                        P = P[::-1]
                        s0, s1 = L - s0, L - s1
                    P = self._segment(P, s0, s1, p0, p1)
            e.samples = P
        # drop collapsed slivers outright rather than keep degenerate ones
        for eid, e in list(out.edges.items()):
            if e.bounds is not None and polyline_length(e.samples) < tol.COLLAPSE * self.scale:
                raise ResolutionFailed(f"edge {eid} collapsed below threshold at tau")
        out.model_scale = out.compute_scale()

    def _finalize(self):
        out = self.out
        out.shells = out.compute_shells()
        chi = out.euler_characteristic()
        if chi % 2 != 0:
            raise ResolutionFailed(f"odd Euler characteristic {chi} after surgery")
        out.genus = len(out.shells) - chi // 2
        report = validate_solid(out)
        if not report.ok:
            raise ResolutionFailed(f"surgery produced an invalid solid:\n{report}",
                                   report)
        self._membership_check()

    def _membership_check(self, n=400, seed=11):
        rng = np.random.default_rng(seed)
        lo, hi = self.out.bbox()
        pad = 0.02 * (hi - lo).max()
        X = rng.uniform(lo - pad, hi + pad, size=(n, 3))
        resolved = SolidClassifier(self.out)
        lab = resolved.classify(X)
        got = (lab == "in") | (lab == "on")
        base = self.oracle.base.classify(X)
        base_in = (base == "in") | (base == "on")
        want = SweptDelta(self.M0, self.edit, self.tau, self.ctx).apply(base_in, X)
        bad = got != want
        if bad.any():
            near = resolved.near_surface(X[bad])
            far_bad = (near > 1e-4).sum()
            if far_bad > max(2, 0.005 * n):
                raise ResolutionFailed(
                    f"resolved model disagrees with the swept-volume membership "
                    f"at {far_bad}/{n} points away from the boundary")


def resolve_gti(M: BrepSolid, edit, batch, all_roots=None, context=None) -> BrepSolid:
    """Model just past a batch of coincident critical points.

    ``batch`` must be non-empty and share one parameter value within the
    tie tolerance; the result is geometry at that parameter with the
    topology of the crossed configuration, validated before return.
    """
    if not batch:
        raise ResolutionFailed("nothing to resolve: empty critical batch")
    ts = [cp.t for cp in batch]
    if max(ts) - min(ts) > 2e-5:
        raise ResolutionFailed(f"batch spans distinct parameters {min(ts)}..{max(ts)}")
    return _Surgeon(M, edit, batch, all_roots, context).run()
