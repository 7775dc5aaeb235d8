"""Critical-point root finding.

Each candidate event's square system is solved by damped Newton from a
grid of parameter values; at every grid value the driven unknowns are
continued from the base configuration and the point is seeded from the
closest approach of the two edges' (motion-carried) polylines.  Roots
are kept when the parameter lies in the requested domain and the
contact point actually falls inside both edges, then deduplicated and
classified: a root across which the in-bounds contact count does not
change is a grazing contact, not a topology change.

Detection regenerates the model at the edit's end, infers events for
every topology-changed face, solves them all and returns the
lowest-parameter batch.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tol
from .errors import NoConvergence, UncoveredChange
from .events import (ENDPOINT_INCIDENCE, EventSystem, build_event_system,
                     infer_critical_events)
from .regen import (PushContext, SurfaceConfig, EdgeGeometry, _project_edge,
                    _resolve_vertex, _trim_edge, apply_motion,
                    edge_pair_intersections, regenerate)

DEFAULT_GRID = 64


@dataclass
class CriticalPoint:
    t: float
    event: object
    point: np.ndarray
    q: np.ndarray
    grazing: bool = False
    residual: float = 0.0

    def to_json(self):
        return {
            "t": self.t,
            "kind": self.event.kind,
            "face": self.event.face,
            "edges": [self.event.edge_a, self.event.edge_b],
            "surfaces": sorted(self.event.surface_ids()),
            "point": [float(x) for x in self.point],
            "grazing": self.grazing,
        }


@dataclass
class DetectionResult:
    batch: list                  # lowest-t critical points (tie group)
    roots: list                  # all accepted roots, ascending in t
    regen: object = None

    @property
    def t(self):
        return self.batch[0].t if self.batch else None

    def to_json(self):
        return {"critical_points": [cp.to_json() for cp in self.roots]}


def _edge_pair_geometry(M, config, ev):
    """Regenerated geometry of the two event edges at one configuration."""
    geom = {}
    v_pos = {}
    edges = [M.edges[ev.edge_a], M.edges[ev.edge_b]]
    raw = {}
    for e in edges:
        raw[e.id] = _project_edge(M, config, e)
    for e in edges:
        if e.bounds is None:
            continue
        for vid in e.bounds:
            if vid in v_pos:
                continue
            p = _resolve_vertex(M, config, M.vertices[vid], raw)
            if p is not None:
                v_pos[vid] = p
    for e in edges:
        geom[e.id] = _trim_edge(M, e, raw[e.id], v_pos)
    return geom


def _seed_points(M, config, ev):
    """Point seeds near the closest approach of the two event edges."""
    ea, eb = M.edges[ev.edge_a], M.edges[ev.edge_b]
    from .regen import _carrier_motion, _subsample

    polys = []
    for e in (ea, eb):
        P = e.samples
        moves = [_carrier_motion(M, config, s) for s in e.carriers]
        cands = [mv(P) for mv in moves if mv is not None]
        if cands:
            mid = P[len(P) // 2]
            disp = [np.linalg.norm(c[len(c) // 2] - mid) for c in cands]
            best = int(np.argmax(disp))
            if disp[best] > 1e-12:
                P = cands[best]
        polys.append(_subsample(P, 24))
    A, B = polys
    D = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    i, j = np.unravel_index(np.argmin(D), D.shape)
    seeds = [0.5 * (A[i] + B[j])]
    if ev.kind == ENDPOINT_INCIDENCE:
        for e in (ea, eb):
            if e.bounds is None:
                continue
            for vid in e.bounds:
                v = M.vertices[vid]
                if ev.f4 in v.triple:
                    seeds.append(v.position)
    return seeds


def _newton_root(sys: EventSystem, z0, max_iter=60, J=None, known=None):
    """Damped quasi-Newton solve.

    The finite-difference Jacobian is refreshed on stalls and rank-one
    updated (Broyden) in between.  Solves heading into an already-known
    root return it immediately, and solves making no early progress are
    abandoned: fresh roots pull Newton in fast or not at all.
    """
    z = np.asarray(z0, dtype=float).copy()
    r = sys.residual(z)
    worst = np.abs(r).max()
    start = worst
    fresh = False
    if J is None:
        J = sys.jacobian(z)
        fresh = True
    for it in range(max_iter):
        if worst < 1e-13:
            return z, worst, J
        if known is not None:
            for zk in known:
                if (abs(z[3] - zk[3]) < 1e-4
                        and np.linalg.norm(z[:3] - zk[:3]) < 1e-3 * sys.scale):
                    return zk.copy(), 0.0, J
        if it == 6 and worst > 0.3 * start and worst > 1e-6:
            break
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        lim = 2.0 * sys.scale
        ns = np.linalg.norm(step)
        if ns > lim:
            step *= lim / ns
        improved = False
        for _ in range(8):
            cand = z + step
            rc = sys.residual(cand)
            wc = np.abs(rc).max()
            if wc < worst:
                dz = cand - z
                dr = rc - r
                J = J + np.outer(dr - J @ dz, dz) / max(dz @ dz, 1e-300)
                z, r, worst = cand, rc, wc
                improved = True
                break
            step *= 0.5
        if not improved:
            if fresh:
                break
            J = sys.jacobian(z)
            fresh = True
        else:
            fresh = False
    return z, worst, J


def _contact_count(M, ctx, ev, t):
    """In-bounds contact count of the event's edge pair at parameter t."""
    try:
        config = apply_motion(M, ctx.edit, t, context=ctx)
    except NoConvergence:
        return None
    geom = _edge_pair_geometry(M, config, ev)
    face = M.faces[ev.face]
    pts = edge_pair_intersections(face, M.edges[ev.edge_a], M.edges[ev.edge_b],
                                  config, geom, M)
    return len(pts)


def find_roots(sys: EventSystem, domain=(0.0, 1.0), context=None,
               n_grid=DEFAULT_GRID):
    """All critical points of one event system inside the domain.

    Multi-start damped Newton over a t grid with continuation of the
    driven unknowns; converged roots are bounds-filtered, deduplicated
    in t, checked for grazing and returned sorted by t.
    """
    M = sys.M
    ev = sys.event
    ctx = context or PushContext(M, sys.cs.edit, sys.cs.scheme)
    lo, hi = float(domain[0]), float(domain[1])
    raw_roots = []
    known = []
    warm_J = None
    # Coarse pass first: an event system that converges nowhere on the
    # coarse grid has no reachable roots and skips the fine grid.
    grids = [np.linspace(lo, hi, max(n_grid // 8, 8))]
    fine = np.linspace(lo, hi, n_grid)
    converged_any = False
    stage = 0
    while stage < len(grids):
        for t0 in grids[stage]:
            try:
                config = apply_motion(M, ctx.edit, t0, context=ctx)
            except NoConvergence:
                continue
            for p0 in _seed_points(M, config, ev):
                z0 = np.concatenate([np.asarray(p0, float), [t0], config.q])
                z, res, warm_J = _newton_root(sys, z0, J=warm_J, known=known)
                if res > tol.ROOT_RESIDUAL:
                    warm_J = None
                    continue
                converged_any = True
                if not any(abs(z[3] - k[3]) < 1e-6
                           and np.linalg.norm(z[:3] - k[:3]) < 1e-4 * M.model_scale
                           for k in known):
                    known.append(z.copy())
                p, t, q = sys.split(z)
                if not (lo - 1e-9 <= t <= hi + 1e-9):
                    continue
                raw_roots.append((float(np.clip(t, lo, hi)), p, q, res))
        if stage == 0 and raw_roots and len(grids) == 1:
            # Only events with an in-domain root earn the fine sweep;
            # systems rooting solely outside the domain stay that way.
            grids.append(fine)
        stage += 1
    # Cluster coincident roots.  Roots whose Jacobian is singular in t
    # (compound events) scatter by the square root of the residual
    # tolerance; averaging the cluster recovers most of the accuracy.
    raw_roots.sort(key=lambda r: r[0])
    clusters = []
    for t, p, q, res in raw_roots:
        for c in clusters:
            if (abs(t - c[0][-1][0]) <= 1e-5
                    and np.linalg.norm(p - c[0][-1][1]) <= 1e-3 * M.model_scale):
                c[0].append((t, p, q, res))
                break
        else:
            clusters.append([[(t, p, q, res)]])
    deduped = []
    for (members,) in clusters:
        ts = np.array([m[0] for m in members])
        best = min(members, key=lambda m: m[3])
        deduped.append((float(ts.mean()), best[1], best[2], best[3]))
    out = []
    for t, p, q, res in deduped:
        try:
            config = apply_motion(M, ctx.edit, t, context=ctx)
        except NoConvergence:
            continue
        if not _isolated_in_t(sys, np.concatenate([p, [t], q])):
            continue
        geom = _edge_pair_geometry(M, config, ev)
        if not (_loose_contact(geom[ev.edge_a], p, M.model_scale)
                and _loose_contact(geom[ev.edge_b], p, M.model_scale)):
            continue
        h = max(1e-4, 16 * tol.T_TIE)
        before = _contact_count(M, ctx, ev, max(t - h, 0.0)) if t - h >= -1e-12 else None
        after = _contact_count(M, ctx, ev, min(t + h, 1.0)) if t + h <= 1 + 1e-12 else None
        grazing = (before is not None and after is not None and before == after
                   and abs(t - 0.0) > h and abs(t - 1.0) > h)
        out.append(CriticalPoint(t, ev, p, q, grazing, res))
    return out


def _loose_contact(g: EdgeGeometry, p, scale):
    """Contact plausibility at the solved instant.

    Events sit exactly on the boundary of the in-bounds region, so this
    only rejects contacts clearly outside the edge; the contact-count
    flip around the root is the decisive filter.
    """
    P = g.samples if g.samples is not None else g.raw
    if P is None or len(P) == 0:
        return False
    if not g.alive:
        from .brep import polyline_project

        _, dist = polyline_project(P, p, g.closed)
        return dist <= 1e-3 * scale
    from .brep import point_in_edge_bounds

    return point_in_edge_bounds(P, g.closed, p, scale, end_tol=1e-5 * scale,
                                start_open=not g.start_alive,
                                end_open=not g.end_alive)


def _isolated_in_t(sys: EventSystem, z, rank_tol=1e-8):
    """Reject roots lying on a solution continuum.

    Permanently tangent carrier pairs solve the tangency equations for
    every parameter value; stepping along the Jacobian null direction
    distinguishes them (residuals stay zero) from merely degenerate but
    isolated roots (residuals grow quadratically).
    """
    J = sys.jacobian(z)
    u, s, vt = np.linalg.svd(J)
    if s[-1] > rank_tol * max(s[0], 1e-30):
        return True
    v = vt[-1]
    step = 1e-3 * max(1.0, sys.scale)
    for sign in (1.0, -1.0):
        r = sys.residual(z + sign * step * v)
        if np.abs(r).max() > 100 * tol.ROOT_RESIDUAL:
            return True
    return False


def detect_next_critical_point(M, edit, scheme=None, context=None,
                               n_grid=DEFAULT_GRID):
    """Lowest-parameter critical point(s) of an edit, or None.

    Regenerates at the edit end, infers candidate events for every
    topology-changed face, solves all event systems over [0, 1] and
    returns the minimum-t tie batch together with the full root list.
    """
    ctx = context or PushContext(M, edit, scheme)
    config1 = apply_motion(M, edit, 1.0, context=ctx)
    regen1 = regenerate(M, config1)
    changed = regen1.changed_faces
    if not changed:
        return None
    roots = []
    failed_faces = []
    for fid in changed:
        events = infer_critical_events(regen1.diffs[fid], M.faces[fid], M)
        face_roots = []
        for ev in events:
            sys = EventSystem(ev, ctx.cs, M)
            face_roots.extend(find_roots(sys, (0.0, 1.0), ctx, n_grid))
        real = [cp for cp in face_roots if not cp.grazing]
        if not real:
            failed_faces.append(fid)
        roots.extend(real)
    if failed_faces and not roots:
        raise UncoveredChange(
            f"topology changes on {failed_faces} have no covering event in [0, 1]",
            failed_faces)
    if not roots:
        return None
    # Global dedup: the same instant often appears on several faces.
    # The tie window allows for the parameter scatter of degenerate
    # (compound-event) roots, which is the square root of the residual
    # tolerance rather than the tolerance itself.
    roots.sort(key=lambda cp: (cp.t, cp.event.face, cp.event.kind))
    t_min = roots[0].t
    batch = [cp for cp in roots if cp.t - t_min <= max(tol.T_TIE, 1e-5)]
    if failed_faces:
        uncovered = [f for f in failed_faces
                     if all(cp.event.face != f for cp in roots)]
        if uncovered:
            raise UncoveredChange(
                f"topology changes on {uncovered} have no covering event in "
                f"[0, 1]", uncovered)
    return DetectionResult(batch, roots, regen1)
