"""Tangent-constraint systems for driven faces.

When a face is pushed, its smooth (G1) neighbors must follow to keep
the tangencies.  The choosing scheme picks which neighbors are driven:
ring1 takes the faces directly G1-adjacent to the pushed set, ring2
additionally their G1 neighbors.  Every smooth surface pair touching
the moving club contributes one distance equation from the supported
catalog, and each equation is matched by one scalar unknown on a driven
surface (a positional offset along a fixed direction, or with the
resizable flag a size parameter), so the system stays square.

Driven surfaces translate only; they never rotate.  That restriction
keeps the catalog equations scalar and is sufficient for prismatic
models whose smooth joins are fillet-like.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import tol
from .errors import IllPosed, NoConvergence, UnsupportedPair
from .quadric import CONE, CYLINDER, PLANE, SPHERE, QuadricSurface

RING1 = "ring1"
RING2 = "ring2"


@dataclass(frozen=True)
class ChoosingScheme:
    ring: str = RING1
    resizable: bool = False

    def __post_init__(self):
        if self.ring not in (RING1, RING2):
            raise ValueError(f"unknown ring {self.ring!r}")

    def to_json(self):
        return {"ring": self.ring, "resizable": self.resizable}

    @staticmethod
    def from_json(d):
        if d is None:
            return ChoosingScheme()
        return ChoosingScheme(d.get("ring", RING1), bool(d.get("resizable", False)))


@dataclass
class Unknown:
    surface: str
    kind: str                  # "offset" | "radius" | "half_angle"
    direction: np.ndarray = None
    partner: str = None        # surface whose tangency this unknown serves

    def label(self):
        if self.kind == "offset":
            d = np.round(self.direction, 6)
            return f"{self.surface} offset along {tuple(d)}"
        return f"{self.surface} {self.kind}"


def _position_key(kind):
    return {PLANE: None, SPHERE: "center", CYLINDER: "point", CONE: "apex"}[kind]


def _anchor_point(s: QuadricSurface):
    if s.kind == PLANE:
        return s.canonical["normal"] * s.canonical["offset"]
    return np.asarray(s.canonical[_position_key(s.kind)], dtype=float)


def _axis_perp(point, axis, target):
    """Perpendicular from an axis line to a target point."""
    rel = np.asarray(target, dtype=float) - np.asarray(point, dtype=float)
    return rel - (rel @ axis) * np.asarray(axis, dtype=float)


@dataclass
class TangencyResidual:
    kind: str                  # catalog entry name
    a: str                     # surface ids
    b: str
    sign: float = 1.0          # material-side sign of the distance
    ka: float = 0.0            # radius coefficients (cyl/sphere pairs)
    kb: float = 0.0

    def value(self, surfaces):
        sa, sb = surfaces[self.a], surfaces[self.b]
        if self.kind == "plane_cyl":
            n, d = sa.canonical["normal"], sa.canonical["offset"]
            return self.sign * (n @ sb.canonical["point"] - d) - sb.canonical["radius"]
        if self.kind == "plane_sphere":
            n, d = sa.canonical["normal"], sa.canonical["offset"]
            return self.sign * (n @ sb.canonical["center"] - d) - sb.canonical["radius"]
        if self.kind == "plane_cone":
            n, d = sa.canonical["normal"], sa.canonical["offset"]
            return self.sign * (n @ sb.canonical["apex"] - d)
        if self.kind == "cyl_cyl":
            perp = _axis_perp(sa.canonical["point"], sa.canonical["axis"],
                              sb.canonical["point"])
            return np.linalg.norm(perp) - (self.ka * sa.canonical["radius"]
                                           + self.kb * sb.canonical["radius"])
        if self.kind == "cyl_sphere":
            perp = _axis_perp(sa.canonical["point"], sa.canonical["axis"],
                              sb.canonical["center"])
            return np.linalg.norm(perp) - (self.ka * sa.canonical["radius"]
                                           + self.kb * sb.canonical["radius"])
        raise ValueError(self.kind)

    def label(self):
        return f"{self.kind}({self.a},{self.b})"


def _make_residual(sa: QuadricSurface, sb: QuadricSurface):
    """Catalog lookup; the pair is normalized so planes come first."""
    if sb.kind == PLANE and sa.kind != PLANE:
        sa, sb = sb, sa
    ka = sa.kind
    kb = sb.kind
    if ka == PLANE and kb == CYLINDER:
        n = sa.canonical["normal"]
        if abs(n @ sb.canonical["axis"]) > 1e-7:
            raise UnsupportedPair(f"cylinder {sb.id} axis not parallel to plane {sa.id}")
        v = n @ sb.canonical["point"] - sa.canonical["offset"]
        return TangencyResidual("plane_cyl", sa.id, sb.id, sign=np.sign(v) or 1.0)
    if ka == PLANE and kb == SPHERE:
        v = sa.canonical["normal"] @ sb.canonical["center"] - sa.canonical["offset"]
        return TangencyResidual("plane_sphere", sa.id, sb.id, sign=np.sign(v) or 1.0)
    if ka == PLANE and kb == CONE:
        n = sa.canonical["normal"]
        want = np.pi / 2 - sb.canonical["half_angle"]
        got = np.arccos(np.clip(abs(n @ sb.canonical["axis"]), -1, 1))
        if abs(got - want) > 1e-6:
            raise UnsupportedPair(f"cone {sb.id} not tangent-compatible with plane {sa.id}")
        v = n @ sb.canonical["apex"] - sa.canonical["offset"]
        return TangencyResidual("plane_cone", sa.id, sb.id, sign=np.sign(v) or 1.0)
    if ka == CYLINDER and kb == CYLINDER:
        if np.linalg.norm(np.cross(sa.canonical["axis"], sb.canonical["axis"])) > 1e-7:
            raise UnsupportedPair(f"cylinders {sa.id},{sb.id} axes not parallel")
        dist = np.linalg.norm(_axis_perp(sa.canonical["point"], sa.canonical["axis"],
                                         sb.canonical["point"]))
        ra, rb = sa.canonical["radius"], sb.canonical["radius"]
        coeffs = min([(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0)],
                     key=lambda c: abs(dist - (c[0] * ra + c[1] * rb)))
        return TangencyResidual("cyl_cyl", sa.id, sb.id, ka=coeffs[0], kb=coeffs[1])
    if ka in (CYLINDER, SPHERE) and kb in (CYLINDER, SPHERE) and ka != kb:
        cyl, sph = (sa, sb) if ka == CYLINDER else (sb, sa)
        dist = np.linalg.norm(_axis_perp(cyl.canonical["point"], cyl.canonical["axis"],
                                         sph.canonical["center"]))
        rc, rs = cyl.canonical["radius"], sph.canonical["radius"]
        coeffs = min([(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0)],
                     key=lambda c: abs(dist - (c[0] * rc + c[1] * rs)))
        return TangencyResidual("cyl_sphere", cyl.id, sph.id, ka=coeffs[0], kb=coeffs[1])
    raise UnsupportedPair(f"no tangency equation for {sa.kind}-{sb.kind} "
                          f"({sa.id}, {sb.id})")


def _offset_direction(owner: QuadricSurface, partner: QuadricSurface):
    """Direction along which moving the owner controls the pair distance."""
    if owner.kind == PLANE:
        return np.array(owner.canonical["normal"], dtype=float)
    if partner.kind == PLANE:
        return np.array(partner.canonical["normal"], dtype=float)
    axis = owner.canonical.get("axis")
    perp = _anchor_point(partner) - _anchor_point(owner)
    if axis is not None:
        perp = perp - (perp @ axis) * axis
    n = np.linalg.norm(perp)
    if n < 1e-12:
        raise UnsupportedPair(f"coincident anchors for {owner.id},{partner.id}")
    return perp / n


@dataclass
class WellConstrainedReport:
    equations: int
    unknowns: int
    rank: int
    cond: float
    verdict: str               # "well" | "under" | "over"
    labels: list = field(default_factory=list)

    def __str__(self):
        return (f"{self.verdict}: {self.equations} equations, "
                f"{self.unknowns} unknowns, rank {self.rank}, cond {self.cond:.2e}")


class ConstraintSystem:
    """Square system of tangency residuals over driven-surface unknowns."""

    def __init__(self, M, edit, scheme, unknowns, residuals, driven, preserved_edges):
        self.M = M
        self.edit = edit
        self.scheme = scheme
        self.unknowns = unknowns
        self.residual_defs = residuals
        self.driven = driven                  # surface ids
        self.preserved_edges = preserved_edges  # edge ids whose G1 must hold
        self.scale = M.model_scale

    @property
    def size(self):
        return len(self.unknowns)

    def seed(self):
        return np.zeros(len(self.unknowns))

    def realize(self, t, q, only=None):
        """Surface map at parameter t with driven parameters q.

        ``only`` restricts the output to a subset of surface ids, which
        keeps the per-iteration cost of root finding proportional to
        the handful of surfaces an event actually references.
        """
        q = np.asarray(q, dtype=float)
        T = self.edit.transform_at(t)
        pushed_surfaces = {self.M.faces[f].surface for f in self.edit.faces}
        out = {}
        deltas = {}
        size_deltas = {}
        for u, qi in zip(self.unknowns, q):
            if u.kind == "offset":
                deltas[u.surface] = deltas.get(u.surface, 0.0) + qi * u.direction
            else:
                size_deltas.setdefault(u.surface, {})[u.kind] = qi
        items = (self.M.surfaces.items() if only is None
                 else [(sid, self.M.surfaces[sid]) for sid in only])
        for sid, s in items:
            if sid in pushed_surfaces:
                out[sid] = s.transformed(T)
                continue
            if sid not in deltas and sid not in size_deltas:
                out[sid] = s
                continue
            canonical = dict(s.canonical)
            key = _position_key(s.kind)
            if sid in deltas:
                if key is None:
                    n = canonical["normal"]
                    canonical["offset"] = float(canonical["offset"] + n @ deltas[sid])
                else:
                    canonical[key] = np.asarray(canonical[key], float) + deltas[sid]
            for kind, dq in size_deltas.get(sid, {}).items():
                ckey = "radius" if kind == "radius" else "half_angle"
                canonical[ckey] = float(canonical[ckey] + dq)
            rebuilt = {
                PLANE: lambda c: QuadricSurface.plane(sid, c["normal"], c["offset"]),
                SPHERE: lambda c: QuadricSurface.sphere(sid, c["center"], c["radius"]),
                CYLINDER: lambda c: QuadricSurface.cylinder(sid, c["point"], c["axis"], c["radius"]),
                CONE: lambda c: QuadricSurface.cone(sid, c["apex"], c["axis"], c["half_angle"]),
            }[s.kind](canonical)
            out[sid] = rebuilt
        return out

    def residuals(self, t, q, surfaces=None):
        if surfaces is None:
            fast = self._fast_states()
            if fast is not None:
                states = {sid: fn(t, q) for sid, fn in fast.items()}
                from .events import _constraint_row

                return np.array([_constraint_row(r, states)
                                 for r in self.residual_defs])
            surfaces = self.realize(t, q, only=self._residual_surfaces())
        return np.array([r.value(surfaces) for r in self.residual_defs])

    def _residual_surfaces(self):
        out = set()
        for r in self.residual_defs:
            out |= {r.a, r.b}
        return sorted(out)

    def _fast_states(self):
        if getattr(self, "_fast", None) is False:
            return None
        if getattr(self, "_fast", None) is None:
            from .events import _compile_state

            states = {}
            ok = (self.edit.motion.kind == "translate"
                  and all(u.kind != "half_angle" for u in self.unknowns))
            if ok:
                for sid in self._residual_surfaces():
                    fn = _compile_state(self.M, self, sid)
                    if fn is None:
                        ok = False
                        break
                    states[sid] = fn
            self._fast = states if ok else False
        return self._fast or None

    def jacobian(self, t, q):
        h = 1e-7 * self.scale
        J = np.zeros((len(self.residual_defs), len(self.unknowns)))
        q = np.asarray(q, dtype=float)
        for j in range(len(self.unknowns)):
            dq = np.zeros_like(q)
            dq[j] = h
            J[:, j] = (self.residuals(t, q + dq) - self.residuals(t, q - dq)) / (2 * h)
        return J

    def size_floor_violated(self, q):
        for u, qi in zip(self.unknowns, q):
            if u.kind == "radius":
                r0 = self.M.surfaces[u.surface].canonical["radius"]
                if r0 + qi < 1e-9 * self.scale:
                    return True
            if u.kind == "half_angle":
                a0 = self.M.surfaces[u.surface].canonical["half_angle"]
                if not 0 < a0 + qi < np.pi / 2:
                    return True
        return False


def _smooth_pairs(M, smooth_edges):
    """(surface id, surface id) -> list of edge ids realizing the tangency."""
    pairs = {}
    uses = M.edge_uses()
    for eid in smooth_edges:
        fids = [u[0] for u in uses[eid]]
        sa = M.faces[fids[0]].surface
        sb = M.faces[fids[1]].surface
        if sa == sb:
            continue
        key = tuple(sorted((sa, sb)))
        pairs.setdefault(key, []).append(eid)
    return pairs


def assemble_tangency_system(M, edit, scheme=None) -> ConstraintSystem:
    """Build the driven-face system for an edit under a choosing scheme.

    Raises ``IllPosed`` when the resulting system is not square and
    full-rank, and ``UnsupportedPair`` for smooth pairs outside the
    distance-equation catalog.
    """
    scheme = scheme or edit.scheme or ChoosingScheme()
    smooth = M.smooth_edges()
    pairs = _smooth_pairs(M, smooth)
    pushed = {M.faces[f].surface for f in edit.faces if f in M.faces}
    missing = [f for f in edit.faces if f not in M.faces]
    if missing:
        raise KeyError(f"edit references unknown faces {missing}")

    adj = {}
    for (sa, sb) in pairs:
        adj.setdefault(sa, set()).add(sb)
        adj.setdefault(sb, set()).add(sa)

    ring1 = set().union(*(adj.get(s, set()) for s in pushed)) - pushed if pushed else set()
    driven = set(ring1)
    if scheme.ring == RING2:
        ring2 = set().union(*(adj.get(s, set()) for s in ring1)) if ring1 else set()
        driven |= ring2 - pushed
    club = pushed | driven

    # BFS distance from the pushed surfaces orders unknown allocation
    # outward, so inner tangencies are served by inner driven faces.
    dist = {s: 0 for s in pushed}
    frontier = list(pushed)
    while frontier:
        nxt = []
        for s in frontier:
            for other in adj.get(s, ()):
                if other not in dist:
                    dist[other] = dist[s] + 1
                    nxt.append(other)
        frontier = nxt

    preserved = sorted(k for k in pairs if k[0] in club or k[1] in club)
    unknowns = []
    residuals = []
    alloc_count = {}
    preserved_edges = []
    for key in preserved:
        sa, sb = key
        owners = [s for s in key if s in driven]
        if not owners:
            raise IllPosed(
                f"smooth pair {key} touches the pushed set but has no driven face")
        owner = max(owners, key=lambda s: (dist.get(s, 99), -alloc_count.get(s, 0), s))
        partner = sb if owner == sa else sa
        res = _make_residual(M.surfaces[sa], M.surfaces[sb])
        direction = _offset_direction(M.surfaces[owner], M.surfaces[partner])
        unknowns.append(Unknown(owner, "offset", direction, partner))
        residuals.append(res)
        alloc_count[owner] = alloc_count.get(owner, 0) + 1
        preserved_edges.extend(pairs[key])

    if scheme.resizable:
        for i, u in enumerate(unknowns):
            s = M.surfaces[u.surface]
            if u.partner in pushed and s.kind in (CYLINDER, SPHERE):
                unknowns[i] = Unknown(u.surface, "radius", partner=u.partner)
            elif u.partner in pushed and s.kind == CONE:
                unknowns[i] = Unknown(u.surface, "half_angle", partner=u.partner)

    cs = ConstraintSystem(M, edit, scheme, unknowns, residuals, sorted(driven),
                          sorted(preserved_edges))
    report = dof_check(cs)
    if report.verdict != "well":
        raise IllPosed(f"constraint system is {report.verdict}-constrained "
                       f"({report})", report)
    return cs


def dof_check(cs: ConstraintSystem) -> WellConstrainedReport:
    """Equation/unknown counts plus Jacobian rank at the seed."""
    m, n = len(cs.residual_defs), len(cs.unknowns)
    labels = [r.label() for r in cs.residual_defs]
    if n == 0 and m == 0:
        return WellConstrainedReport(0, 0, 0, 1.0, "well", labels)
    J = cs.jacobian(0.0, cs.seed())
    sv = np.linalg.svd(J, compute_uv=False) if min(m, n) else np.zeros(0)
    rank = int((sv > sv.max() * 1e-12).sum()) if sv.size else 0
    cond = float(sv.max() / sv.min()) if sv.size and sv.min() > 0 else np.inf
    if m > n or (m == n and rank < m and m > 0):
        verdict = "over" if m > n else "under"
    elif m < n or rank < n:
        verdict = "under"
    elif cond > tol.WELL_POSED_COND:
        verdict = "under"
    else:
        verdict = "well"
    return WellConstrainedReport(m, n, rank, cond, verdict, labels)


def solve_driven(cs: ConstraintSystem, t, seed=None, max_iter=60):
    """Driven parameters at t, continuing from the seed branch.

    Raises ``NoConvergence`` when Newton stalls or a size parameter is
    squeezed below zero: the tangencies cannot be maintained at this t.
    """
    if cs.size == 0:
        return np.zeros(0)
    q = np.array(seed if seed is not None else cs.seed(), dtype=float)
    converged = False
    for _ in range(max_iter):
        r = cs.residuals(t, q)
        worst = np.abs(r).max() / cs.scale
        # Polish well past the reporting tolerance: downstream root
        # finding distinguishes tangency from crossing at the level of
        # these residuals.
        if worst < 1e-14:
            converged = True
            break
        if worst < tol.ROOT_RESIDUAL:
            converged = True
        J = cs.jacobian(t, q)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        damp = 1.0
        stalled = True
        for _ in range(12):
            cand = q + damp * step
            if np.abs(cs.residuals(t, cand)).max() / cs.scale < worst:
                q = cand
                stalled = False
                break
            damp *= 0.5
        if stalled:
            if converged:
                break
            raise NoConvergence(f"driven-face solve stalled at t={t} "
                                f"(residual {worst:.2e})", t)
    if not converged:
        raise NoConvergence(f"driven-face solve did not converge at t={t}", t)
    if cs.size_floor_violated(q):
        raise NoConvergence(f"size parameter vanished at t={t}", t)
    return q
