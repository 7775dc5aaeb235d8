"""Newton solvers for quadric intersection problems.

Both solvers are batched over seed points: iterations run on (N, 3)
arrays, damping is applied per row, and rows that stop improving are
frozen.  Roots of the three-surface system are deduplicated and flagged
as near-singular when the gradient Jacobian is ill conditioned, which
is the signature of a tangential (double) intersection.
"""

from dataclasses import dataclass

import numpy as np

from . import tol


@dataclass
class TripleRoots:
    """Distinct roots of ``F1 = F2 = F3 = 0`` with tangency flags."""

    points: np.ndarray        # (K, 3)
    near_singular: np.ndarray  # (K,) bool

    @property
    def regular(self):
        return self.points[~self.near_singular]

    def __len__(self):
        return len(self.points)


def _residual_matrix(surfaces, pts, model_scale):
    """(N, k) scale-relative distance residuals."""
    cols = []
    for s in surfaces:
        vals = s.value(pts)
        g = np.linalg.norm(s.gradient(pts), axis=1)
        cols.append(tol.distance_residual(vals, g, model_scale))
    return np.column_stack(cols)


def _damped_newton(surfaces, seeds, model_scale, max_iter=100, max_halvings=8):
    """Run damped Newton on each seed; returns points and converged mask."""
    pts = np.atleast_2d(np.asarray(seeds, dtype=float)).copy()
    n = len(pts)
    active = np.ones(n, dtype=bool)
    k = len(surfaces)
    # Iterate down to the floating-point noise floor, not just the
    # reporting tolerance: tangential double roots converge linearly and
    # their position error is the square root of the residual.
    floor = 1e-15
    for _ in range(max_iter):
        res = _residual_matrix(surfaces, pts, model_scale)
        worst = res.max(axis=1)
        active &= worst > floor
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        sub = pts[idx]
        F = np.column_stack([s.value(sub) for s in surfaces])
        J = np.stack([s.gradient(sub) for s in surfaces], axis=1)  # (m, k, 3)
        # Pseudo-inverse handles both square and rank-deficient rows.
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(J), F)
        # Guard against wild steps far outside the model.
        lim = 10.0 * model_scale
        norms = np.linalg.norm(step, axis=1)
        too_big = norms > lim
        if too_big.any():
            step[too_big] *= (lim / norms[too_big])[:, None]
        before = worst[idx]
        cand = sub + step
        for _ in range(max_halvings):
            after = _residual_matrix(surfaces, cand, model_scale).max(axis=1)
            bad = after > before
            if not bad.any():
                break
            step[bad] *= 0.5
            cand[bad] = sub[bad] + step[bad]
        else:
            after = _residual_matrix(surfaces, cand, model_scale).max(axis=1)
            stuck = after > before
            active[idx[stuck]] = False
            cand[stuck] = sub[stuck]
        pts[idx] = cand
        if k == 0:
            break
    res = _residual_matrix(surfaces, pts, model_scale).max(axis=1)
    return pts, res <= tol.ROOT_RESIDUAL


def _is_near_singular(surfaces, p):
    """Tangential-root test at a converged point.

    The raw condition threshold rarely fires in double precision (a
    polished double root still sits ~1e-8 off the exact one), so nearly
    coplanar unit gradients are flagged as well.
    """
    J = np.stack([s.gradient(p) for s in surfaces])
    if np.linalg.cond(J) > tol.NEAR_SINGULAR_COND:
        return True
    norms = np.linalg.norm(J, axis=1)
    if (norms < 1e-12).any():
        return True
    det = abs(np.linalg.det(J / norms[:, None]))
    return det < 1e-6


def _is_plane(s):
    if s.kind == "plane":
        return True
    if s.kind != "general":
        return False
    return np.abs(s.Q[:3, :3]).max() <= 1e-14 * max(np.abs(s.Q).max(), 1e-30)


def _plane_data(s):
    if s.kind == "plane":
        return s.canonical["normal"], s.canonical["offset"]
    n = 2.0 * s.Q[:3, 3]
    d = -s.Q[3, 3]
    ln = np.linalg.norm(n)
    return n / ln, d / ln


def _line_quadric_roots(p0, axis, q, surfaces, model_scale, line_flag=False):
    """Roots of one quadric along the line p0 + s axis, with dead band.

    Tangencies held by the driven-face solver satisfy their distance
    equations only to the root tolerance, which perturbs the constant
    term by ~|grad F| * tol * scale; a discriminant inside that noise is
    one double root, not zero or two.
    """
    empty = np.zeros((0, 3)), np.zeros(0, dtype=bool)
    a = float(axis @ q.Q[:3, :3] @ axis)
    b = float(q.gradient(p0) @ axis)
    c = float(q.value(p0))
    sep = tol.ROOT_DEDUP * model_scale
    if abs(a) < 1e-14:
        if abs(b) < 1e-14:
            return empty
        s = -c / b
        return (p0 + s * axis)[None, :], np.array([line_flag])
    disc = b * b - 4 * a * c
    gn = max(np.linalg.norm(q.gradient(p0 - (b / (2 * a)) * axis)), 1.0)
    lim = max((sep * a) ** 2,
              16.0 * abs(a) * gn * tol.ROOT_RESIDUAL * model_scale)
    if disc < -lim:
        return empty
    if disc <= lim:
        s = -b / (2 * a)
        return (p0 + s * axis)[None, :], np.array([True])
    sq = np.sqrt(disc)
    roots = np.array([p0 + ((-b - sq) / (2 * a)) * axis,
                      p0 + ((-b + sq) / (2 * a)) * axis])
    # Pair tangencies along the line are exact in the discriminant, so
    # clearly separated roots need no further singularity testing.
    flags = np.array([line_flag, line_flag])
    return roots, flags


def has_closed_form(s1, s2, s3):
    """Whether the triple solves exactly without seeds."""
    surfaces = (s1, s2, s3)
    n_planes = sum(1 for s in surfaces if _is_plane(s))
    if n_planes >= 2:
        return True
    cyls = [s for s in surfaces if s.kind == "cylinder"]
    if len(cyls) >= 2:
        return np.linalg.norm(np.cross(cyls[0].canonical["axis"],
                                       cyls[1].canonical["axis"])) <= 1e-12
    return False


def _closed_form_triple(surfaces, model_scale):
    """Exact roots for plane-rich or parallel-cylinder configurations.

    Two planes give a line and the third surface a quadratic along it;
    two cylinders with parallel axes reduce to a circle pair in the
    cross-section whose intersections are lines.  Both paths express
    tangency exactly as a vanishing discriminant, so root completeness
    does not depend on seeds.  Returns None when no form applies.
    """
    empty = np.zeros((0, 3)), np.zeros(0, dtype=bool)
    planes = [s for s in surfaces if _is_plane(s)]
    others = [s for s in surfaces if not _is_plane(s)]
    if len(planes) == 3:
        N = np.array([_plane_data(s)[0] for s in planes])
        d = np.array([_plane_data(s)[1] for s in planes])
        if abs(np.linalg.det(N)) < 1e-12:
            return empty
        p = np.linalg.solve(N, d)
        return p[None, :], np.array([False])
    if len(planes) == 2:
        (n1, d1), (n2, d2) = _plane_data(planes[0]), _plane_data(planes[1])
        axis = np.cross(n1, n2)
        ln = np.linalg.norm(axis)
        if ln < 1e-12:
            return empty
        axis /= ln
        A2 = np.vstack([n1, n2])
        p0, *_ = np.linalg.lstsq(A2, np.array([d1, d2]), rcond=None)
        return _line_quadric_roots(p0, axis, others[0], surfaces, model_scale)
    cyls = [s for s in surfaces if s.kind == "cylinder"]
    if len(cyls) >= 2:
        ca, cb = cyls[0], cyls[1]
        third = next(s for s in surfaces if s is not ca and s is not cb)
        axis = ca.canonical["axis"]
        if np.linalg.norm(np.cross(axis, cb.canonical["axis"])) > 1e-12:
            return None
        pa, ra = ca.canonical["point"], ca.canonical["radius"]
        pb, rb = cb.canonical["point"], cb.canonical["radius"]
        rel = pb - pa
        rel_perp = rel - (rel @ axis) * axis
        d = float(np.linalg.norm(rel_perp))
        band = max(tol.ROOT_DEDUP * model_scale,
                   32.0 * tol.ROOT_RESIDUAL * model_scale)
        mode = None
        for target in (ra + rb, abs(ra - rb)):
            if abs(d - target) <= band:
                mode = "tangent"
        if mode is None and (d > ra + rb or d < abs(ra - rb)):
            return empty
        if d < 1e-12:
            return empty
        u = rel_perp / d
        v = np.cross(axis, u)
        # cross-section circle intersection around pa
        x = (d * d + ra * ra - rb * rb) / (2 * d)
        if mode == "tangent":
            feet = [pa + x * u]
        else:
            y2 = ra * ra - x * x
            if y2 <= 0:
                feet = [pa + x * u]
                mode = "tangent"
            else:
                y = np.sqrt(y2)
                feet = [pa + x * u + y * v, pa + x * u - y * v]
        pts = []
        flags = []
        for foot in feet:
            r, f = _line_quadric_roots(foot, axis, third, surfaces, model_scale,
                                       line_flag=(mode == "tangent"))
            pts.extend(r)
            flags.extend(f)
        if not pts:
            return empty
        return np.array(pts), np.array(flags, dtype=bool)
    return None


def solve_triple(s1, s2, s3, seeds, model_scale=1.0):
    """All distinct roots of three surfaces reachable from the seeds.

    Tangential roots (ill-conditioned gradient Jacobian or vanishing
    discriminant) are kept but flagged, never dropped.  Configurations
    with at least two planes are solved in closed form, where root
    completeness is exact regardless of the seeds.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        raise ValueError("seeds must be non-empty")
    surfaces = (s1, s2, s3)
    exact = _closed_form_triple(surfaces, model_scale)
    if exact is not None:
        pts_out, flags_out = exact
        order = np.lexsort(pts_out.T[::-1]) if len(pts_out) else []
        return TripleRoots(pts_out[order] if len(pts_out) else pts_out,
                           flags_out[order] if len(pts_out) else flags_out)
    pts, ok = _damped_newton(surfaces, seeds, model_scale)
    roots = []
    flags = []
    for p in pts[ok]:
        if any(np.linalg.norm(p - q) <= tol.ROOT_DEDUP * model_scale for q in roots):
            continue
        roots.append(p)
        flags.append(_is_near_singular(surfaces, p))
    # A root pair closer than the positional noise of a tangential root
    # (sqrt of the residual tolerance) is one double root.
    merge_dist = 4.0 * np.sqrt(tol.ROOT_RESIDUAL) * model_scale
    merged = []
    mflags = []
    for p, f in zip(roots, flags):
        for i, q in enumerate(merged):
            if np.linalg.norm(p - q) <= merge_dist:
                merged[i] = 0.5 * (p + q)
                mflags[i] = True
                break
        else:
            merged.append(p)
            mflags.append(f)
    if merged:
        order = np.lexsort(np.array(merged).T[::-1])
        pts_out = np.array(merged)[order]
        flags_out = np.array(mflags, dtype=bool)[order]
    else:
        pts_out = np.zeros((0, 3))
        flags_out = np.zeros(0, dtype=bool)
    return TripleRoots(pts_out, flags_out)


def _project_line(n1, d1, n2, d2, P):
    axis = np.cross(n1, n2)
    ln = np.linalg.norm(axis)
    if ln < 1e-12:
        return None
    axis /= ln
    A2 = np.vstack([n1, n2])
    p0, *_ = np.linalg.lstsq(A2, np.array([d1, d2]), rcond=None)
    s = (P - p0) @ axis
    return p0 + s[:, None] * axis


def _project_circle(plane, cyl, P):
    n = plane.canonical["normal"]
    d = plane.canonical["offset"]
    axis = cyl.canonical["axis"]
    if np.linalg.norm(np.cross(n, axis)) > 1e-12:
        return None
    a0 = cyl.canonical["point"]
    r = cyl.canonical["radius"]
    center = a0 + (d - float(n @ a0)) / float(n @ axis) * axis
    rel = P - center
    rel -= np.outer(rel @ n, n) / float(n @ n)
    nrm = np.linalg.norm(rel, axis=1)
    ok = nrm > 1e-12
    out = np.where(ok[:, None], center + r * rel / np.maximum(nrm, 1e-300)[:, None],
                   center + r * np.array([1.0, 0, 0]))
    return out, ok


def _project_plane_cyl_lines(plane, cyl, P, model_scale):
    """Projection when the plane is parallel to the cylinder axis.

    The intersection is zero, one (tangent) or two lines parallel to
    the axis; each point projects onto the nearest one.  The tangent
    dead band matches the root solvers so driven tangencies do not
    flicker between zero and two lines.
    """
    n, d = plane.canonical["normal"], plane.canonical["offset"]
    axis = cyl.canonical["axis"]
    if abs(float(n @ axis)) > 1e-12:
        return None
    a0 = cyl.canonical["point"]
    r = cyl.canonical["radius"]
    h = d - float(n @ a0)          # signed axis-to-plane distance along n
    band = max(tol.ROOT_DEDUP * model_scale, 32.0 * tol.ROOT_RESIDUAL * model_scale)
    if abs(abs(h) - r) <= band:
        offsets = [0.0]
    elif abs(h) > r:
        return np.broadcast_to(P, P.shape).copy(), np.zeros(len(P), dtype=bool)
    else:
        w = np.sqrt(r * r - h * h)
        offsets = [w, -w]
    u = np.cross(axis, n)
    feet = [a0 + h * n + w * u for w in offsets]
    outs = []
    for foot in feet:
        s = (P - foot) @ axis
        outs.append(foot + s[:, None] * axis)
    if len(outs) == 1:
        return outs[0], np.ones(len(P), dtype=bool)
    d0 = np.linalg.norm(outs[0] - P, axis=1)
    d1 = np.linalg.norm(outs[1] - P, axis=1)
    pick = (d1 < d0)[:, None]
    return np.where(pick, outs[1], outs[0]), np.ones(len(P), dtype=bool)


def project_to_curve(sa, sb, seeds, model_scale=1.0):
    """Project points onto the intersection curve of two surfaces.

    Plane pairs (lines) and plane-cylinder pairs with the axis along
    the plane normal (circles) project exactly; everything else runs
    Gauss-Newton with the pseudo-inverse of the 2x3 gradient Jacobian,
    whose minimum-norm steps stay close to the original points.
    """
    P = np.atleast_2d(np.asarray(seeds, dtype=float))
    if _is_plane(sa) and _is_plane(sb):
        (n1, d1), (n2, d2) = _plane_data(sa), _plane_data(sb)
        out = _project_line(n1, d1, n2, d2, P)
        if out is not None:
            return out, np.ones(len(P), dtype=bool)
        return P.copy(), np.zeros(len(P), dtype=bool)
    pl, cy = None, None
    if _is_plane(sa) and sb.kind == "cylinder":
        pl, cy = sa, sb
    elif _is_plane(sb) and sa.kind == "cylinder":
        pl, cy = sb, sa
    if pl is not None:
        res = _project_circle(pl, cy, P)
        if res is None:
            res = _project_plane_cyl_lines(pl, cy, P, model_scale)
        if res is not None:
            return res
    return _damped_newton((sa, sb), seeds, model_scale)


def project_to_surface(s, seeds, model_scale=1.0):
    """Project points onto one surface along its gradient."""
    return _damped_newton((s,), seeds, model_scale)


def curve_tangent(sa, sb, p):
    """Tangent direction of the intersection curve of two surfaces at p."""
    t = np.cross(sa.gradient(p), sb.gradient(p))
    n = np.linalg.norm(t)
    if n < 1e-14:
        return None
    return t / n
