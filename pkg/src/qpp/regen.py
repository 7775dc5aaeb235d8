"""Boundary regeneration under pre-edit topology.

``apply_motion`` produces the carrier-surface configuration at a
parameter t (pushed faces rigidly moved, driven faces re-solved through
the tangency system); ``regenerate`` then re-evaluates every vertex and
edge from that configuration while keeping the stored topology, builds
per-face connection graphs from actual pairwise edge intersections and
compares them against the stored adjacency.  A face whose computed
connections differ from its stored ones is where the geometry and the
topology have fallen out of step.

Everything is a pure function of (model, config); a ``PushContext``
caches the constraint system, the driven-parameter continuation and
static intersection results so that dense parameter sweeps stay cheap.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tol
from .brep import (BrepSolid, max_chord_gap, point_in_edge_bounds,
                   polyline_length, polyline_project)
from .constraints import ChoosingScheme, assemble_tangency_system, solve_driven
from .errors import NoConvergence
from .graphdiff import (ConnectionGraph, build_connection_graph,
                        diff_connection_graphs, graph_from_topology)
from .nsolve import has_closed_form, project_to_curve, solve_triple

UNCHANGED = "unchanged"
TOPOLOGY_CHANGED = "topology_changed"
DEGENERATE = "degenerate"


class PushContext:
    """Caches shared by repeated evaluations of one edit on one model."""

    def __init__(self, M: BrepSolid, edit, scheme=None):
        self.M = M
        self.edit = edit
        self.scheme = scheme or edit.scheme or ChoosingScheme()
        self.cs = assemble_tangency_system(M, edit, self.scheme)
        self.pushed_surfaces = {M.faces[f].surface for f in edit.faces}
        self.moved_surfaces = set(self.pushed_surfaces)
        for u in self.cs.unknowns:
            self.moved_surfaces.add(u.surface)
        self._q_cache = [(0.0, self.cs.seed())]
        self._static_pairs = {}
        self._root_cache = {}

    def solve_q(self, t):
        """Driven parameters at t by continuation from the nearest solve."""
        if self.cs.size == 0:
            return np.zeros(0)
        t0, q0 = min(self._q_cache, key=lambda c: abs(c[0] - t))
        try:
            q = solve_driven(self.cs, t, q0)
        except NoConvergence:
            # sub-step from the best-known parameter toward t
            q = q0
            steps = 16
            for k in range(1, steps + 1):
                tk = t0 + (t - t0) * k / steps
                q = solve_driven(self.cs, tk, q)
        self._q_cache.append((t, q))
        if len(self._q_cache) > 512:
            del self._q_cache[1:257]
        return q

    def static_cache(self):
        return self._static_pairs


@dataclass
class SurfaceConfig:
    """Carrier surfaces at one parameter value of one edit."""

    surfaces: dict
    t: float
    q: np.ndarray
    moved: set
    context: PushContext = None

    def moved_any(self, sids):
        return any(s in self.moved for s in sids)


def apply_motion(M: BrepSolid, edit, t, scheme=None, context=None) -> SurfaceConfig:
    """Surface configuration at parameter t for the given edit."""
    ctx = context or PushContext(M, edit, scheme)
    q = ctx.solve_q(t)
    surfaces = ctx.cs.realize(t, q)
    return SurfaceConfig(surfaces, float(t), q, set(ctx.moved_surfaces), ctx)


@dataclass
class EdgeGeometry:
    samples: np.ndarray = None   # trimmed polyline (includes live endpoints)
    raw: np.ndarray = None       # untrimmed projection of the old samples
    alive: bool = True
    start_alive: bool = True
    end_alive: bool = True
    closed: bool = False

    def in_bounds(self, point, model_scale):
        if not self.alive or self.samples is None or len(self.samples) == 0:
            return False
        return point_in_edge_bounds(self.samples, self.closed, point, model_scale,
                                    start_open=not self.start_alive,
                                    end_open=not self.end_alive)


@dataclass
class RegenResult:
    config: SurfaceConfig
    vertex_positions: dict       # vid -> position or None
    edge_geometry: dict          # eid -> EdgeGeometry
    face_status: dict            # fid -> status string
    ref_graphs: dict
    reg_graphs: dict
    diffs: dict                  # fid -> DiffGraph (changed faces only)

    @property
    def changed_faces(self):
        return sorted(f for f, s in self.face_status.items() if s == TOPOLOGY_CHANGED)

    @property
    def all_unchanged(self):
        return all(s == UNCHANGED for s in self.face_status.values())


def _carrier_motion(M, config, sid):
    """Point map approximating how a carrier surface moved, or None."""
    if sid not in config.moved:
        return None
    ctx = config.context
    if ctx is not None and sid in ctx.pushed_surfaces:
        T = ctx.edit.transform_at(config.t)
        return lambda P: T.apply_point(P)
    old, new = M.surfaces[sid], config.surfaces[sid]
    keys = [k for k in ("point", "center", "apex") if k in old.canonical]
    if keys:
        delta = np.asarray(new.canonical[keys[0]]) - np.asarray(old.canonical[keys[0]])
    elif "normal" in old.canonical:
        delta = old.canonical["normal"] * (new.canonical["offset"] - old.canonical["offset"])
    else:
        return None
    return lambda P: P + delta


def _project_edge(M, config, edge):
    """Project the stored samples onto the edge's configured carriers.

    Samples first follow the motion of the most-displaced carrier, so
    large edits do not pile the projections onto the nearest sliver of
    the moved curve.
    """
    sa = config.surfaces[edge.carriers[0]]
    sb = config.surfaces[edge.carriers[1]]
    seeds = edge.samples
    moves = [_carrier_motion(M, config, s) for s in edge.carriers]
    cands = [mv(edge.samples) for mv in moves if mv is not None]
    if cands:
        mid = edge.samples[len(edge.samples) // 2]
        disp = [np.linalg.norm(c[len(c) // 2] - mid) for c in cands]
        best = int(np.argmax(disp))
        if disp[best] > 1e-12:
            seeds = cands[best]
    pts, ok = project_to_curve(sa, sb, seeds, M.model_scale)
    if ok.sum() < max(2, len(edge.samples) // 4):
        return None
    raw = pts[ok]
    if edge.hint is not None:
        h, h_ok = project_to_curve(sa, sb, [edge.hint], M.model_scale)
        if h_ok[0]:
            _, d = polyline_project(raw, h[0], edge.closed)
            if d > 2 * tol.ROOT_DEDUP * M.model_scale:
                # landed on the wrong intersection branch; bias the seeds
                i = int(np.argmin(np.linalg.norm(seeds - h[0], axis=1)))
                shift = h[0] - raw[min(i, len(raw) - 1)]
                pts2, ok2 = project_to_curve(sa, sb, seeds + shift, M.model_scale)
                if ok2.sum() >= max(2, len(edge.samples) // 4):
                    raw = pts2[ok2]
    return raw


def _resolve_vertex(M, config, vertex, edge_raw, incident=None):
    """Re-solve a vertex from its defining surfaces.

    The old position is first carried along by the motion of its most
    displaced defining surface; among multiple roots the one nearest
    that carried position wins, which keeps vertex identity continuous
    under large motions.
    """
    s1, s2, s3 = (config.surfaces[s] for s in vertex.triple)
    carried = vertex.position
    moves = [_carrier_motion(M, config, s) for s in vertex.triple]
    cands = [mv(vertex.position[None, :])[0] for mv in moves if mv is not None]
    if cands:
        disp = [np.linalg.norm(c - vertex.position) for c in cands]
        best = int(np.argmax(disp))
        if disp[best] > 1e-12:
            carried = cands[best]
    seeds = [carried, vertex.position]
    if vertex.hint is not None:
        seeds.append(vertex.hint)
        carried = vertex.hint
    inc = incident if incident is not None else M.edges_of_vertex().get(vertex.id, ())
    for eid in inc:
        raw = edge_raw.get(eid)
        if raw is not None and len(raw):
            i = int(np.argmin(np.linalg.norm(raw - carried, axis=1)))
            seeds.append(raw[i])
    roots = solve_triple(s1, s2, s3, np.array(seeds), M.model_scale)
    if len(roots) == 0:
        return None
    return min(roots.points, key=lambda p: np.linalg.norm(p - carried))


def _signed_param(P, point):
    """Arc-length coordinate extended past the polyline ends.

    Projection clamps at the ends, hiding which side of an end vertex a
    point lies on; adding the tangential overshoot recovers the sign,
    which is what inversion detection needs.
    """
    s, _ = polyline_project(P, point, False)
    L = polyline_length(P, False)
    point = np.asarray(point, dtype=float)
    if s <= 1e-12 and len(P) > 1:
        d = P[1] - P[0]
        n = np.linalg.norm(d)
        if n > 1e-300:
            s += float((point - P[0]) @ (d / n))
    elif s >= L - 1e-12 and len(P) > 1:
        d = P[-1] - P[-2]
        n = np.linalg.norm(d)
        if n > 1e-300:
            s += float((point - P[-1]) @ (d / n))
    return s


def _trim_edge(M, edge, raw, v_pos, original=None):
    """Clip the raw polyline between the edge's re-solved endpoints.

    An open edge whose endpoints swapped order along the curve has
    inverted: its in-bounds span is empty and it no longer carries any
    connections, exactly like an edge whose carrier intersection died.
    """
    geom = EdgeGeometry(raw=raw, closed=edge.closed)
    if raw is None:
        geom.alive = False
        return geom
    if edge.closed:
        geom.samples = raw
        return geom
    p0 = v_pos.get(edge.bounds[0])
    p1 = v_pos.get(edge.bounds[1])
    geom.start_alive = p0 is not None
    geom.end_alive = p1 is not None
    s0 = _signed_param(raw, p0) if geom.start_alive else 0.0
    s1 = _signed_param(raw, p1) if geom.end_alive else polyline_length(raw)
    if geom.start_alive and geom.end_alive and s1 < s0:
        # Stored samples run from bounds[0] to bounds[1] and projection
        # preserves that direction, so a swapped order means the edge
        # inverted through zero length.
        if s1 < s0 - 4 * tol.EDGE_END * M.model_scale:
            geom.alive = False
            geom.samples = raw
            return geom
        s0, s1 = s1, s0
    acc = [p0] if geom.start_alive else []
    run = 0.0
    for k in range(len(raw)):
        if k > 0:
            run += float(np.linalg.norm(raw[k] - raw[k - 1]))
        if s0 + 1e-12 < run < s1 - 1e-12:
            acc.append(raw[k])
        elif not geom.start_alive and run <= s1 - 1e-12:
            acc.append(raw[k])
    if geom.end_alive:
        acc.append(p1)
    if len(acc) < 2:
        mid = [] if not (geom.start_alive and geom.end_alive) else [(p0 + p1) / 2]
        acc = ([p0] if geom.start_alive else []) + mid + ([p1] if geom.end_alive else [])
    if len(acc) < 2:
        geom.alive = False
        return geom
    geom.samples = np.asarray(acc)
    return geom


def _subsample(P, k=16):
    if P is None or len(P) <= k:
        return P
    idx = np.linspace(0, len(P) - 1, k).round().astype(int)
    return P[idx]


def edge_pair_intersections(face, ea, eb, config, geom=None, M=None,
                            shared_seeds=None, root_cache=None):
    """In-bounds intersection points of two edges' carrier curves on a face.

    The three governing surfaces are the face carrier plus each edge's
    other carrier.  Roots are found from the old shared vertices and a
    subsample of each edge's points, then filtered to lie within both
    edges' bounds.  When all three surfaces are static the raw roots
    are reusable across parameter values; only the bounds test is
    re-evaluated.
    """
    M = M or config.context.M
    f2 = face.surface
    oa = ea.carriers[0] if ea.carriers[1] == f2 else ea.carriers[1]
    ob = eb.carriers[0] if eb.carriers[1] == f2 else eb.carriers[1]
    if geom is None:
        geom = {}
        for e in (ea, eb):
            raw = _project_edge(M, config, e)
            g = EdgeGeometry(raw=raw, samples=raw, closed=e.closed,
                             alive=raw is not None)
            geom[e.id] = g
    ga, gb = geom[ea.id], geom[eb.id]
    if not (ga.alive and gb.alive):
        return []
    curves_static = not config.moved_any((oa, f2, ob))
    cache_key = (f2, oa, ob, ea.id, eb.id)
    points = None
    if curves_static and root_cache is not None and cache_key in root_cache:
        points = root_cache[cache_key]
    if points is None:
        surfaces = (config.surfaces[oa], config.surfaces[f2], config.surfaces[ob])
        if has_closed_form(*surfaces):
            seeds = np.zeros((1, 3))
        else:
            seeds = []
            if shared_seeds is not None:
                seeds.extend(shared_seeds)
            seeds.extend(_subsample(ga.samples))
            seeds.extend(_subsample(gb.samples))
            seeds = np.asarray(seeds)
        points = solve_triple(*surfaces, seeds, M.model_scale).points
        if curves_static and root_cache is not None:
            root_cache[cache_key] = points
    out = []
    for p in points:
        if ga.in_bounds(p, M.model_scale) and gb.in_bounds(p, M.model_scale):
            out.append(p)
    return out


def _pair_cache_key(M, face, ea, eb):
    f2 = face.surface
    oa = ea.carriers[0] if ea.carriers[1] == f2 else ea.carriers[1]
    ob = eb.carriers[0] if eb.carriers[1] == f2 else eb.carriers[1]
    return (f2, frozenset((oa, ob)), ea.id, eb.id)


def _pair_is_static(M, config, face, ea, eb):
    sids = set(ea.carriers) | set(eb.carriers) | {face.surface}
    for e in (ea, eb):
        if e.bounds is not None:
            for vid in e.bounds:
                sids |= set(M.vertices[vid].triple)
    return not config.moved_any(sids)


def regenerate(M: BrepSolid, config: SurfaceConfig) -> RegenResult:
    """Re-evaluate boundary geometry and detect per-face topology changes."""
    # 1. raw edge projections
    edge_raw = {}
    for eid, e in sorted(M.edges.items()):
        if not config.moved_any(e.carriers):
            edge_raw[eid] = e.samples
        else:
            edge_raw[eid] = _project_edge(M, config, e)
    # 2. vertices
    v_pos = {}
    incidence = M.edges_of_vertex()
    for vid, v in sorted(M.vertices.items()):
        if not config.moved_any(v.triple):
            v_pos[vid] = v.position
            continue
        p = _resolve_vertex(M, config, v, edge_raw, incidence.get(vid, ()))
        if p is not None:
            v_pos[vid] = p
    # 3. trimmed edge geometry
    geom = {}
    for eid, e in sorted(M.edges.items()):
        geom[eid] = _trim_edge(M, e, edge_raw[eid], v_pos)
    # 4. per-face graphs
    cache = config.context.static_cache() if config.context is not None else {}
    ref_graphs, reg_graphs, status, diffs = {}, {}, {}, {}
    for fid, face in sorted(M.faces.items()):
        ref = graph_from_topology(M, face)
        conns = []
        eids = sorted(set(face.edge_ids()))
        for i, a in enumerate(eids):
            ea = M.edges[a]
            for b in eids[i + 1:]:
                eb = M.edges[b]
                f2 = face.surface
                oa = ea.carriers[0] if ea.carriers[1] == f2 else ea.carriers[1]
                ob = eb.carriers[0] if eb.carriers[1] == f2 else eb.carriers[1]
                if oa == ob or {oa, ob} == {f2}:
                    # same carrier pair: connected where they share a live vertex
                    if ea.bounds and eb.bounds and geom[a].alive and geom[b].alive:
                        shared = set(ea.bounds) & set(eb.bounds)
                        for vid in shared:
                            if vid in v_pos:
                                conns.append((a, b))
                    continue
                key = _pair_cache_key(M, face, ea, eb)
                static = _pair_is_static(M, config, face, ea, eb)
                if static and key in cache:
                    pts = cache[key]
                else:
                    shared = []
                    if ea.bounds and eb.bounds:
                        shared = [M.vertices[v].position
                                  for v in set(ea.bounds) & set(eb.bounds)]
                    rc = (config.context._root_cache
                          if config.context is not None else None)
                    pts = edge_pair_intersections(face, ea, eb, config, geom, M,
                                                  shared_seeds=shared,
                                                  root_cache=rc)
                    if static:
                        cache[key] = pts
                conns.extend([(a, b)] * len(pts))
        reg = build_connection_graph(face, conns)
        ref_graphs[fid], reg_graphs[fid] = ref, reg
        if reg == ref:
            dead = any(not geom[e].alive for e in eids) or \
                any(vid not in v_pos
                    for e in eids if M.edges[e].bounds
                    for vid in M.edges[e].bounds)
            status[fid] = DEGENERATE if dead else UNCHANGED
        else:
            status[fid] = TOPOLOGY_CHANGED
            diffs[fid] = diff_connection_graphs(ref, reg)
    return RegenResult(config, v_pos, geom, status, ref_graphs, reg_graphs, diffs)


def materialize(M: BrepSolid, result: RegenResult) -> BrepSolid:
    """Model with the regenerated geometry under the unchanged topology."""
    out = M.copy()
    out.surfaces = dict(result.config.surfaces)
    for vid, p in result.vertex_positions.items():
        out.vertices[vid].position = np.asarray(p, dtype=float)
    missing = [v for v in out.vertices if v not in result.vertex_positions]
    if missing:
        raise ValueError(f"cannot materialize: vertices {missing} lost their roots")
    for eid, g in result.edge_geometry.items():
        if not g.alive:
            raise ValueError(f"cannot materialize: edge {eid} lost its carrier curve")
        out.edges[eid].samples = g.samples.copy()
    out.model_scale = out.compute_scale()
    return out
