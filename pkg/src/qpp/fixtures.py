"""Bundled synthetic test solids.

Every fixture is a prism: a 2D cross-section profile of line and
circular-arc segments (plus optional circular tunnels) extruded along a
coordinate axis.  Profiles are drawn counterclockwise with material on
the left of the walking direction, which fixes the material side of
every side surface.  Each fixture also carries an independent
membership predicate built from half-space / cylinder set operations,
used to cross-check the boundary representation, plus the edits its
tests exercise.

Loop orientation of the assembled solids is repaired numerically (chart
signed areas and loop nesting), then everything is validated.
"""

from dataclasses import dataclass, field

import numpy as np

from .brep import BrepSolid, Edge, Face, Vertex
from .edit import Motion, PushPullEdit
from .quadric import QuadricSurface
from .surfparam import FaceChart, signed_area, winding_number
from .validate import validate_solid


# ---------------------------------------------------------------------------
# profile description
# ---------------------------------------------------------------------------


@dataclass
class Seg:
    kind: str            # "line" | "arc"
    p0: tuple
    p1: tuple
    surface: str
    center: tuple = None
    radius: float = None
    sweep: int = 1       # +1 counterclockwise in the drawing, -1 clockwise

    @property
    def sense(self):
        # Material is left of the walk: a counterclockwise arc has its
        # center on the material side (convex wall), a clockwise one the
        # opposite (cove), and planes always face outward as built.
        if self.kind == "line":
            return 1
        return 1 if self.sweep > 0 else -1


def line(p0, p1, surface):
    return Seg("line", tuple(p0), tuple(p1), surface)


def arc(p0, p1, center, radius, sweep, surface):
    for p in (p0, p1):
        r = np.hypot(p[0] - center[0], p[1] - center[1])
        if abs(r - radius) > 1e-9 * max(1.0, radius):
            raise ValueError(f"arc endpoint {p} not at radius {radius} around {center}")
    return Seg("arc", tuple(p0), tuple(p1), surface, tuple(center), float(radius), sweep)


@dataclass
class Tunnel:
    center: tuple
    radius: float
    surface: str


# ---------------------------------------------------------------------------
# prism construction
# ---------------------------------------------------------------------------


def _lift(axis):
    if axis == "y":
        return lambda a, b, w: np.array([a, w, b], dtype=float)
    if axis == "z":
        return lambda a, b, w: np.array([a, b, w], dtype=float)
    raise ValueError("extrusion axis must be 'y' or 'z'")


def _axis_vec(axis):
    return np.array([0.0, 1.0, 0.0]) if axis == "y" else np.array([0.0, 0.0, 1.0])


def _arc_points(seg, n=None):
    c = np.array(seg.center)
    a0 = np.arctan2(seg.p0[1] - c[1], seg.p0[0] - c[0])
    a1 = np.arctan2(seg.p1[1] - c[1], seg.p1[0] - c[0])
    if seg.sweep > 0:
        span = np.mod(a1 - a0, 2 * np.pi)
        span = span if span > 1e-12 else 2 * np.pi
    else:
        span = -np.mod(a0 - a1, 2 * np.pi)
        span = span if span < -1e-12 else -2 * np.pi
    if n is None:
        # keep the sampling sagitta a few 1e-4 of the radius so queries
        # near arc rims stay trustworthy
        n = max(16, int(abs(span) / 0.03) + 2)
    th = a0 + span * np.linspace(0, 1, n)
    pts = np.column_stack([c[0] + seg.radius * np.cos(th), c[1] + seg.radius * np.sin(th)])
    pts[0] = seg.p0
    pts[-1] = seg.p1
    return pts


def _seg_points(seg):
    if seg.kind == "line":
        return np.linspace(seg.p0, seg.p1, 5)
    return _arc_points(seg)


class PrismBuilder:
    """Extrudes a profile into a manifold solid."""

    def __init__(self, axis, w0, w1, cap_names=("cap0", "cap1")):
        self.axis = axis
        self.w0, self.w1 = float(w0), float(w1)
        self.lift = _lift(axis)
        self.av = _axis_vec(axis)
        self.cap_names = cap_names
        self.surfaces = {}
        self.vertices = {}
        self.edges = {}
        self.faces = {}
        self.genus = 0

    def _cap_planes(self):
        n0 = -self.av
        n1 = self.av
        self.surfaces[self.cap_names[0]] = QuadricSurface.plane(
            self.cap_names[0], n0, float(n0 @ self.lift(0, 0, self.w0)))
        self.surfaces[self.cap_names[1]] = QuadricSurface.plane(
            self.cap_names[1], n1, float(n1 @ self.lift(0, 0, self.w1)))

    def _side_surface(self, seg):
        if seg.surface in self.surfaces:
            return
        if seg.kind == "line":
            d = np.array([seg.p1[0] - seg.p0[0], seg.p1[1] - seg.p0[1]])
            out2 = np.array([d[1], -d[0]])
            out3 = self.lift(out2[0], out2[1], 0) - self.lift(0, 0, 0)
            p3 = self.lift(seg.p0[0], seg.p0[1], self.w0)
            self.surfaces[seg.surface] = QuadricSurface.plane_through(seg.surface, out3, p3)
        else:
            c3 = self.lift(seg.center[0], seg.center[1], self.w0)
            self.surfaces[seg.surface] = QuadricSurface.cylinder(
                seg.surface, c3, self.av, seg.radius)

    def build(self, segments, tunnels=()):
        self._cap_planes()
        cap0, cap1 = self.cap_names
        n = len(segments)
        for i, seg in enumerate(segments):
            prev = segments[(i - 1) % n]
            if tuple(prev.p1) != tuple(seg.p0):
                raise ValueError(f"profile gap between segment {i-1} and {i}")
            self._side_surface(seg)
        # corner vertices and rails
        rails = []
        for i, seg in enumerate(segments):
            prev = segments[(i - 1) % n]
            for w, cap in ((self.w0, cap0), (self.w1, cap1)):
                vid = f"v{i}@{cap}"
                self.vertices[vid] = Vertex(vid, self.lift(*seg.p0, w),
                                            (cap, prev.surface, seg.surface))
            rid = f"rail{i}"
            P = np.array([self.lift(*seg.p0, w) for w in np.linspace(self.w0, self.w1, 5)])
            self.edges[rid] = Edge(rid, (prev.surface, seg.surface),
                                   (f"v{i}@{cap0}", f"v{i}@{cap1}"), P)
            rails.append(rid)
        # profile edges on each cap
        prof = {cap0: [], cap1: []}
        for i, seg in enumerate(segments):
            pts2 = _seg_points(seg)
            j = (i + 1) % n
            for w, cap in ((self.w0, cap0), (self.w1, cap1)):
                eid = f"seg{i}@{cap}"
                P = np.array([self.lift(a, b, w) for a, b in pts2])
                self.edges[eid] = Edge(eid, (cap, seg.surface),
                                       (f"v{i}@{cap}", f"v{j}@{cap}"), P)
                prof[cap].append(eid)
        # tunnels
        hole_loops = {cap0: [], cap1: []}
        for k, tun in enumerate(tunnels):
            self.surfaces[tun.surface] = QuadricSurface.cylinder(
                tun.surface, self.lift(*tun.center, self.w0), self.av, tun.radius)
            for w, cap in ((self.w0, cap0), (self.w1, cap1)):
                eid = f"hole{k}@{cap}"
                th = np.linspace(0, 2 * np.pi, 211)[:-1]
                pts2 = np.column_stack([tun.center[0] + tun.radius * np.cos(th),
                                        tun.center[1] + tun.radius * np.sin(th)])
                P = np.array([self.lift(a, b, w) for a, b in pts2])
                self.edges[eid] = Edge(eid, (cap, tun.surface), None, P)
                hole_loops[cap].append(eid)
            self.faces[f"tube{k}"] = Face(f"tube{k}", tun.surface,
                                          [[(f"hole{k}@{cap0}", 1)], [(f"hole{k}@{cap1}", 1)]],
                                          sense=-1)
            self.genus += 1
        # cap faces
        for cap in (cap0, cap1):
            loops = [[(e, 1) for e in prof[cap]]]
            loops += [[(h, 1)] for h in hole_loops[cap]]
            self.faces[cap] = Face(cap, cap, loops, sense=1)
        # side faces
        for i, seg in enumerate(segments):
            fid = f"side{i}"
            j = (i + 1) % n
            loop = [(f"seg{i}@{cap0}", 1), (f"rail{j}", 1),
                    (f"seg{i}@{cap1}", 1), (f"rail{i}", 1)]
            self.faces[fid] = Face(fid, seg.surface, [loop], sense=seg.sense)
        # faces adopt their surface name when it is unambiguous, and the
        # tube faces their tunnel name, so edits can address them simply
        renames = {}
        per_surface = {}
        for f in self.faces.values():
            per_surface.setdefault(f.surface, []).append(f.id)
        for sid, fids in per_surface.items():
            if len(fids) == 1 and fids[0] != sid:
                renames[fids[0]] = sid
        for old, new in renames.items():
            f = self.faces.pop(old)
            f.id = new
            self.faces[new] = f
        solid = BrepSolid(self.surfaces, self.vertices, self.edges, self.faces,
                          genus=self.genus)
        fix_orientation(solid)
        return solid


# ---------------------------------------------------------------------------
# loop orientation repair
# ---------------------------------------------------------------------------


def _chain_loop(M, edge_ids):
    """Senses making consecutive edges share vertices head-to-tail."""
    if len(edge_ids) == 1:
        return [(edge_ids[0], 1)]
    out = []
    first, second = M.edges[edge_ids[0]], M.edges[edge_ids[1]]
    s0 = 1 if first.bounds[1] in second.bounds else -1
    out.append((edge_ids[0], s0))
    for k in range(1, len(edge_ids)):
        prev_e, prev_s = out[-1]
        head = M.edges[prev_e].bounds[1 if prev_s > 0 else 0]
        e = M.edges[edge_ids[k]]
        if e.bounds[0] == head:
            out.append((edge_ids[k], 1))
        elif e.bounds[1] == head:
            out.append((edge_ids[k], -1))
        else:
            raise ValueError(f"loop is not connected at {edge_ids[k]}")
    return out


def fix_orientation(M: BrepSolid):
    """Reorder and re-sense loops so outer loops wind counterclockwise
    as seen from outside and holes wind the other way."""
    deferred = []
    for f in M.faces.values():
        loops = []
        for loop in f.loops:
            eids = [e for e, _ in loop]
            if len(eids) == 1 and M.edges[eids[0]].closed:
                loops.append([(eids[0], 1)])
            else:
                loops.append(_chain_loop(M, eids))
        f.loops = loops
        chart = FaceChart(M, f)
        if chart.mode == "wrapped":
            deferred.append(f.id)
            continue
        uvs = chart.loops_uv
        for k, loop in enumerate(f.loops):
            depth = 0
            for m, other in enumerate(uvs):
                if m == k:
                    continue
                if winding_number(other, uvs[k][:1])[0] != 0:
                    depth += 1
            area = signed_area(uvs[k])
            want_positive = depth % 2 == 0
            if (area > 0) != want_positive:
                f.loops[k] = [(e, -s) for e, s in reversed(loop)]
    # wrapped faces take whatever sense makes each edge globally manifold
    uses = M.edge_uses()
    for fid in deferred:
        f = M.faces[fid]
        for li, loop in enumerate(f.loops):
            for pos, (eid, sense) in enumerate(loop):
                partners = [u for u in uses[eid] if u[0] != fid]
                if partners and partners[0][3] == sense:
                    f.loops[li][pos] = (eid, -sense)


# ---------------------------------------------------------------------------
# membership predicate helpers (independent of the B-rep)
# ---------------------------------------------------------------------------


def _box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)

    def f(X):
        X = np.atleast_2d(X)
        return np.all((X >= lo - 1e-12) & (X <= hi + 1e-12), axis=1)

    return f


def _inside_tunnel(center2, radius, axis):
    i, j = ((0, 2) if axis == "y" else (0, 1))

    def f(X):
        X = np.atleast_2d(X)
        return (X[:, i] - center2[0]) ** 2 + (X[:, j] - center2[1]) ** 2 <= radius ** 2

    return f


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


@dataclass
class Fixture:
    name: str
    solid: BrepSolid
    membership: callable       # (N,3) -> bool, the CSG ground truth
    edits: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)


def _assert_valid(solid, name):
    rep = validate_solid(solid)
    if not rep.ok:
        raise AssertionError(f"fixture {name} invalid:\n{rep}")


def build_cube(a=2.0):
    segs = [
        line((0, 0), (a, 0), "s:bottom"),
        line((a, 0), (a, a), "s:right"),
        line((a, a), (0, a), "s:top"),
        line((0, a), (0, 0), "s:left"),
    ]
    solid = PrismBuilder("y", 0.0, a, ("s:front", "s:back")).build(segs)
    _assert_valid(solid, "cube")
    return Fixture("cube", solid, _box([0, 0, 0], [a, a, a]),
                   expected={"genus": 0, "V": 8, "E": 12, "F": 6})


def build_groove_block():
    """Block with a side-to-side circular tunnel whose crest is at z=2.

    Pushing the top plane z=5 down by 5 first touches the tunnel at
    z = 2, i.e. at parameter 0.6 of the edit: the analytic-tangency
    fixture.
    """
    segs = [
        line((0, -4), (10, -4), "s:bottom"),
        line((10, -4), (10, 5), "s:right"),
        line((10, 5), (0, 5), "s:top"),
        line((0, 5), (0, -4), "s:left"),
    ]
    tun = Tunnel((5.0, 0.0), 2.0, "s:hole")
    solid = PrismBuilder("y", 0.0, 6.0, ("s:front", "s:back")).build(segs, [tun])
    _assert_valid(solid, "groove_block")
    box = _box([0, 0, -4], [10, 6, 5])
    hole = _inside_tunnel((5.0, 0.0), 2.0, "y")

    def member(X):
        return box(X) & ~hole(X)

    edits = {
        "push": PushPullEdit(("s:top",), Motion.translation([0, 0, -1], 5.0)),
        "partial": PushPullEdit(("s:top",), Motion.translation([0, 0, -1], 2.0)),
    }
    return Fixture("groove_block", solid, member, edits,
                   expected={"genus": 1, "tau": [0.6]})


def build_block_fillet():
    """Box with the top-left edge replaced by a tangent quarter-round.

    The fillet (r=1) joins the top z=5 and the side x=0 smoothly.
    Pushing the top down drives the fillet; at top height 1 the fillet
    reaches the floor corner (an end-point incidence event).
    """
    segs = [
        line((0, 0), (6, 0), "s:bottom"),
        line((6, 0), (6, 5), "s:right"),
        line((6, 5), (1, 5), "s:top"),
        arc((1, 5), (0, 4), (1, 4), 1.0, 1, "s:fillet"),
        line((0, 4), (0, 0), "s:left"),
    ]
    solid = PrismBuilder("y", 0.0, 6.0, ("s:front", "s:back")).build(segs)
    _assert_valid(solid, "block_fillet")
    box = _box([0, 0, 0], [6, 6, 5])

    def member(X):
        X = np.atleast_2d(X)
        sliver = (X[:, 0] < 1) & (X[:, 2] > 4) & \
            ((X[:, 0] - 1) ** 2 + (X[:, 2] - 4) ** 2 > 1.0)
        return box(X) & ~sliver

    edits = {
        "push": PushPullEdit(("s:top",), Motion.translation([0, 0, -1], 4.5)),
        "spec": PushPullEdit(("s:top",), Motion.translation([0, 0, -1], 3.0)),
        "pull": PushPullEdit(("s:top",), Motion.translation([0, 0, 1], 1.5)),
    }
    return Fixture("block_fillet", solid, member, edits,
                   expected={"genus": 0, "tau": [8.0 / 9.0]})


def build_staircase():
    """Block with three tunnels whose crests sit at z = 3, 2 and 1.

    Pushing the top z=5 down by 5 crosses them at t = 0.4, 0.6, 0.8.
    All three stay pierced at t=1, so every change is still visible in
    the final regeneration.
    """
    segs = [
        line((0, -3), (12, -3), "s:bottom"),
        line((12, -3), (12, 5), "s:right"),
        line((12, 5), (0, 5), "s:top"),
        line((0, 5), (0, -3), "s:left"),
    ]
    tunnels = [
        Tunnel((2.5, 1.4), 1.6, "s:holeA"),
        Tunnel((6.0, 0.6), 1.4, "s:holeB"),
        Tunnel((9.5, -0.2), 1.2, "s:holeC"),
    ]
    solid = PrismBuilder("y", 0.0, 6.0, ("s:front", "s:back")).build(segs, tunnels)
    _assert_valid(solid, "staircase")
    box = _box([0, 0, -3], [12, 6, 5])
    holes = [_inside_tunnel(t.center, t.radius, "y") for t in tunnels]

    def member(X):
        m = box(X)
        for h in holes:
            m &= ~h(X)
        return m

    edits = {"push": PushPullEdit(("s:top",), Motion.translation([0, 0, -1], 5.0))}
    return Fixture("staircase", solid, member, edits,
                   expected={"genus": 3, "tau": [0.4, 0.6, 0.8]})


def build_boss_plate():
    """Plate with a vertical through-hole; the right wall is pushed in.

    The wall plane x=8 reaches the hole (center x=4, r=1) after moving
    3 of its 3.5-unit travel: critical point at t = 6/7.
    """
    segs = [
        line((0, 0), (8, 0), "s:ymin"),
        line((8, 0), (8, 6), "s:wall"),
        line((8, 6), (0, 6), "s:ymax"),
        line((0, 6), (0, 0), "s:xmin"),
    ]
    tun = Tunnel((4.0, 3.0), 1.0, "s:hole")
    solid = PrismBuilder("z", 0.0, 2.0, ("s:bottom", "s:top")).build(segs, [tun])
    _assert_valid(solid, "boss_plate")
    box = _box([0, 0, 0], [8, 6, 2])
    hole = _inside_tunnel((4.0, 3.0), 1.0, "z")

    def member(X):
        return box(X) & ~hole(X)

    edits = {"push": PushPullEdit(("s:wall",), Motion.translation([-1, 0, 0], 3.5))}
    return Fixture("boss_plate", solid, member, edits,
                   expected={"genus": 1, "tau": [6.0 / 7.0]})


def build_clamp():
    """Block with two top fillets of different radii.

    Pushing the top down by 4.2 crosses the floor-incidence of the
    right fillet (r=2) at t = 5/7 and of the left one (r=1) at t = 20/21.
    """
    segs = [
        line((0, 0), (8, 0), "s:bottom"),
        line((8, 0), (8, 3), "s:right"),
        arc((8, 3), (6, 5), (6, 3), 2.0, 1, "s:filletR"),
        line((6, 5), (1, 5), "s:top"),
        arc((1, 5), (0, 4), (1, 4), 1.0, 1, "s:filletL"),
        line((0, 4), (0, 0), "s:left"),
    ]
    solid = PrismBuilder("y", 0.0, 6.0, ("s:front", "s:back")).build(segs)
    _assert_valid(solid, "clamp")
    box = _box([0, 0, 0], [8, 6, 5])

    def member(X):
        X = np.atleast_2d(X)
        sl = (X[:, 0] < 1) & (X[:, 2] > 4) & ((X[:, 0] - 1) ** 2 + (X[:, 2] - 4) ** 2 > 1.0)
        sr = (X[:, 0] > 6) & (X[:, 2] > 3) & ((X[:, 0] - 6) ** 2 + (X[:, 2] - 3) ** 2 > 4.0)
        return box(X) & ~sl & ~sr

    edits = {"push": PushPullEdit(("s:top",), Motion.translation([0, 0, -1], 4.2))}
    return Fixture("clamp", solid, member, edits,
                   expected={"genus": 0, "tau": [5.0 / 7.0, 20.0 / 21.0]})


def build_slot_rounds():
    """Channel with coved (round) floor corners, walls rising to a lip.

    Pushing the slot floor up makes the rounds ride along with it; at
    floor height 3.2 the wall faces vanish and the rounds meet the lip
    corners (end-point incidence at t = 32/35).
    """
    segs = [
        line((0, -2), (10, -2), "s:bottom"),
        line((10, -2), (10, 4), "s:right"),
        line((10, 4), (7, 4), "s:topR"),
        line((7, 4), (7, 0.8), "s:wallR"),
        arc((7, 0.8), (6.2, 0.0), (6.2, 0.8), 0.8, -1, "s:roundR"),
        line((6.2, 0.0), (3.8, 0.0), "s:floor"),
        arc((3.8, 0.0), (3.0, 0.8), (3.8, 0.8), 0.8, -1, "s:roundL"),
        line((3.0, 0.8), (3.0, 4), "s:wallL"),
        line((3.0, 4), (0, 4), "s:topL"),
        line((0, 4), (0, -2), "s:left"),
    ]
    solid = PrismBuilder("y", 0.0, 6.0, ("s:front", "s:back")).build(segs)
    _assert_valid(solid, "slot_rounds")

    def member(X):
        X = np.atleast_2d(X)
        box = _box([0, 0, -2], [10, 6, 4])(X)
        void = (X[:, 0] > 3) & (X[:, 0] < 7) & (X[:, 2] > 0)
        fill_l = (X[:, 0] < 3.8) & (X[:, 2] < 0.8) & \
            ((X[:, 0] - 3.8) ** 2 + (X[:, 2] - 0.8) ** 2 > 0.64)
        fill_r = (X[:, 0] > 6.2) & (X[:, 2] < 0.8) & \
            ((X[:, 0] - 6.2) ** 2 + (X[:, 2] - 0.8) ** 2 > 0.64)
        return box & ~(void & ~fill_l & ~fill_r)

    edits = {"push": PushPullEdit(("s:floor",), Motion.translation([0, 0, 1], 3.5))}
    return Fixture("slot_rounds", solid, member, edits,
                   expected={"genus": 0, "tau": [32.0 / 35.0]})


def build_rod():
    """Flat link: two cylindrical ends joined by a straight bar.

    Pushing the small end toward the large one shortens the link; the
    end circles meet the bar corners when the center distance reaches
    sqrt(3.75) + sqrt(0.75), an end-point incidence at t ~ 0.799.
    """
    xb = np.sqrt(4.0 - 0.25)
    xs = 6.0 - np.sqrt(1.0 - 0.25)
    segs = [
        line((xs, 0.5), (xb, 0.5), "s:barT"),
        arc((xb, 0.5), (xb, -0.5), (0.0, 0.0), 2.0, 1, "s:big"),
        line((xb, -0.5), (xs, -0.5), "s:barB"),
        arc((xs, -0.5), (xs, 0.5), (6.0, 0.0), 1.0, 1, "s:small"),
    ]
    solid = PrismBuilder("z", 0.0, 1.0, ("s:bottom", "s:top")).build(segs)
    _assert_valid(solid, "rod")

    def member(X):
        X = np.atleast_2d(X)
        slab = (X[:, 2] >= -1e-12) & (X[:, 2] <= 1.0 + 1e-12)
        big = X[:, 0] ** 2 + X[:, 1] ** 2 <= 4.0
        small = (X[:, 0] - 6.0) ** 2 + X[:, 1] ** 2 <= 1.0
        bar = (X[:, 0] >= 0) & (X[:, 0] <= 6.0) & (np.abs(X[:, 1]) <= 0.5)
        return slab & (big | small | bar)

    tau = (6.0 - (np.sqrt(3.75) + np.sqrt(0.75))) / 4.0
    edits = {"push": PushPullEdit(("s:small",), Motion.translation([-1, 0, 0], 4.0))}
    return Fixture("rod", solid, member, edits,
                   expected={"genus": 0, "tau": [tau]})


def _bracket_numbers():
    # Barrel walls: material inside the wall cylinders, which bulge into
    # the channel.  Coves touch the walls externally, lip rounds sit
    # inside them, so every tangency keeps a consistent material side.
    aw = np.array([9.0, -3.5])    # right wall cylinder axis
    R = 6.0
    rf = 0.5                      # floor cove radius
    rg = 0.5                      # lip round radius
    z_rim = 2.2
    af = np.array([aw[0] - np.sqrt((R + rf) ** 2 - (rf - aw[1]) ** 2), rf])
    ag = np.array([aw[0] - np.sqrt((R - rg) ** 2 - (z_rim - rg - aw[1]) ** 2), z_rim - rg])
    t_fw = af + (aw - af) / np.linalg.norm(aw - af) * rf    # cove / wall tangency
    t_gw = ag + (ag - aw) / np.linalg.norm(ag - aw) * rg    # wall / lip tangency
    return aw, R, rf, rg, z_rim, af, ag, t_fw, t_gw


def build_bracket():
    """Channel with curved walls: floor, cove, wall barrel, round, rim.

    The smooth chain on each side makes the driven-face choosing scheme
    meaningful: pushing the floor down can drive just the coves (ring1),
    the coves and the wall cylinders (ring2), or resize the coves
    (ring1 resizable).
    """
    aw, R, rf, rg, z_rim, af, ag, t_fw, t_gw = _bracket_numbers()
    X = 9.5

    def m(p):  # mirror in x
        return (-p[0], p[1])

    segs = [
        line((-X, -1.0), (X, -1.0), "s:bottom"),
        line((X, -1.0), (X, z_rim), "s:right"),
        line((X, z_rim), (ag[0], z_rim), "s:rimR"),
        arc((ag[0], z_rim), tuple(t_gw), tuple(ag), rg, 1, "s:lipR"),
        arc(tuple(t_gw), tuple(t_fw), tuple(aw), R, 1, "s:wallR"),
        arc(tuple(t_fw), (af[0], 0.0), tuple(af), rf, -1, "s:coveR"),
        line((af[0], 0.0), (-af[0], 0.0), "s:floor"),
        arc((-af[0], 0.0), m(t_fw), (-af[0], af[1]), rf, -1, "s:coveL"),
        arc(m(t_fw), m(t_gw), (-aw[0], aw[1]), R, 1, "s:wallL"),
        arc(m(t_gw), (-ag[0], z_rim), (-ag[0], ag[1]), rg, 1, "s:lipL"),
        line((-ag[0], z_rim), (-X, z_rim), "s:rimL"),
        line((-X, z_rim), (-X, -1.0), "s:left"),
    ]
    solid = PrismBuilder("y", 0.0, 4.0, ("s:front", "s:back")).build(segs)
    _assert_valid(solid, "bracket")

    def member(Xp):
        Xp = np.atleast_2d(Xp)
        x, z = Xp[:, 0], Xp[:, 2]
        box = _box([-X, 0, -1.0], [X, 4.0, z_rim])(Xp)
        wall = ((x - aw[0]) ** 2 + (z - aw[1]) ** 2 <= R ** 2) | \
               ((x + aw[0]) ** 2 + (z - aw[1]) ** 2 <= R ** 2)
        lip = ((x - ag[0]) ** 2 + (z - ag[1]) ** 2 <= rg ** 2) | \
              ((x + ag[0]) ** 2 + (z - ag[1]) ** 2 <= rg ** 2)
        cove = ((x - af[0]) ** 2 + (z - af[1]) ** 2 <= rf ** 2) | \
               ((x + af[0]) ** 2 + (z - af[1]) ** 2 <= rf ** 2)
        void = ((z > 0) & ~wall & ~lip) | cove
        return box & ~void

    edits = {"push": PushPullEdit(("s:floor",), Motion.translation([0, 0, -1], 0.4))}
    return Fixture("bracket", solid, member, edits, expected={"genus": 0})


def build_pierced_groove():
    """The groove block after its top has been pushed to z=1.

    This is the analytically constructed truth for the state just past
    the groove fixture's critical point, used to cross-check repairs and
    as the base model for the separation (lost-connection) edit.
    """
    w = np.sqrt(3.0)  # tunnel meets the top plane z=1 at x = 5 +- sqrt(3)
    segs = [
        line((0, -4), (10, -4), "s:bottom"),
        line((10, -4), (10, 1), "s:right"),
        line((10, 1), (5 + w, 1), "s:topR"),
        arc((5 + w, 1), (5 - w, 1), (5, 0), 2.0, -1, "s:hole"),
        line((5 - w, 1), (0, 1), "s:topL"),
        line((0, 1), (0, -4), "s:left"),
    ]
    solid = PrismBuilder("y", 0.0, 6.0, ("s:front", "s:back")).build(segs)
    _assert_valid(solid, "pierced_groove")
    box = _box([0, 0, -4], [10, 6, 1])
    hole = _inside_tunnel((5.0, 0.0), 2.0, "y")

    def member(X):
        return box(X) & ~hole(X)

    edits = {
        # Pulling the cut top plane up re-seals the tunnel at z=2 (t=2/3).
        "retract": PushPullEdit(("s:topL", "s:topR"), Motion.translation([0, 0, 1], 1.5)),
        "deepen": PushPullEdit(("s:topL", "s:topR"), Motion.translation([0, 0, -1], 0.8)),
    }
    return Fixture("pierced_groove", solid, member, edits,
                   expected={"genus": 0, "tau": [2.0 / 3.0]})


BUILDERS = {
    "cube": build_cube,
    "groove_block": build_groove_block,
    "block_fillet": build_block_fillet,
    "staircase": build_staircase,
    "boss_plate": build_boss_plate,
    "clamp": build_clamp,
    "slot_rounds": build_slot_rounds,
    "rod": build_rod,
    "bracket": build_bracket,
    "pierced_groove": build_pierced_groove,
}


def get_fixture(name) -> Fixture:
    try:
        return BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; have {sorted(BUILDERS)}")


def all_fixtures():
    return {name: fn() for name, fn in BUILDERS.items()}
