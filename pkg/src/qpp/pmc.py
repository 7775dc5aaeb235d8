"""Point-membership classification by ray casting.

A ray from a query point is intersected with every carrier surface (a
quadratic per surface), hits are kept when they fall inside a face of
that surface, and the crossing parity decides inside/outside.  Rays
that graze a surface or pass too close to an edge are discarded and the
point retries with the next direction from a fixed deterministic set,
so results are reproducible.
"""

import numpy as np

from . import tol
from .surfparam import FaceChart


def _ray_directions(n=24):
    """Deterministic, well-spread unit directions (spherical Fibonacci)."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5 ** 0.5) * i
    d = np.column_stack([np.sin(phi) * np.cos(theta),
                         np.sin(phi) * np.sin(theta),
                         np.cos(phi)])
    # Avoid axis-aligned directions, which graze planar fixture faces.
    d += 0.013 * np.array([1.0, -0.7, 0.41])
    return d / np.linalg.norm(d, axis=1)[:, None]


_DIRS = _ray_directions()


class SolidClassifier:
    """Reusable classifier for one solid (charts are built once)."""

    def __init__(self, M):
        self.M = M
        self.scale = M.model_scale
        self.charts = {}
        self.faces_by_surface = {}
        for f in M.faces.values():
            self.charts[f.id] = FaceChart(M, f)
            self.faces_by_surface.setdefault(f.surface, []).append(f.id)

    # -- single-surface ray intersection, batched over points ----------

    def _ray_hits(self, sid, P, d):
        """Roots s of F(P + s d) = 0 as (N, 2) array padded with nan."""
        s = self.M.surfaces[sid]
        A3 = s.Q[:3, :3]
        a = float(d @ A3 @ d)
        grads = s.gradient(P)
        b = grads @ d  # dF/ds
        c = s.value(P)
        out = np.full((len(P), 2), np.nan)
        if abs(a) < 1e-14:
            lin = np.abs(b) > 1e-14
            out[lin, 0] = -c[lin] / b[lin]
            return out, np.zeros(len(P), dtype=bool)
        disc = b * b - 4 * a * c
        bad = (np.abs(disc) < (1e-9 * self.scale * abs(a)) ** 2 * 4) & (disc > -np.inf)
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        out[ok, 0] = (-b[ok] - sq[ok]) / (2 * a)
        out[ok, 1] = (-b[ok] + sq[ok]) / (2 * a)
        grazing = ok & (np.abs(sq) < 1e-7 * self.scale * abs(a) * 2)
        return out, grazing | (bad & ok)

    def near_surface(self, P):
        """Scale-relative distance from each point to the nearest face."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        best = np.full(len(P), np.inf)
        for sid, fids in self.faces_by_surface.items():
            s = self.M.surfaces[sid]
            d = s.distance_estimate(P) / self.scale
            cand = np.nonzero(d < np.minimum(best, 1e-3))[0]
            if len(cand) == 0:
                continue
            inside_any = np.zeros(len(cand), dtype=bool)
            for fid in fids:
                inside_any |= self.charts[fid].contains(P[cand])
            upd = cand[inside_any]
            best[upd] = np.minimum(best[upd], d[upd])
        return best

    def classify(self, points, boundary_tol=tol.ON_SURFACE):
        """Labels 'in' / 'out' / 'on' for each query point."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(P)
        labels = np.full(n, "", dtype=object)
        near = self.near_surface(P)
        on = near <= boundary_tol
        labels[on] = "on"
        todo = np.nonzero(~on)[0]
        votes = np.zeros(n, dtype=int)
        valid = np.zeros(n, dtype=int)
        for d in _DIRS:
            if len(todo) == 0:
                break
            sub = P[todo]
            parity = np.zeros(len(sub), dtype=int)
            ok = np.ones(len(sub), dtype=bool)
            for sid, fids in self.faces_by_surface.items():
                roots, grazing = self._ray_hits(sid, sub, d)
                ok &= ~grazing
                for col in range(2):
                    s_par = roots[:, col]
                    cand = np.nonzero(np.isfinite(s_par) & (s_par > 1e-9 * self.scale))[0]
                    if len(cand) == 0:
                        continue
                    hits = sub[cand] + np.outer(s_par[cand], d)
                    hit_any = np.zeros(len(cand), dtype=bool)
                    too_close = np.zeros(len(cand), dtype=bool)
                    for fid in fids:
                        chart = self.charts[fid]
                        inside = chart.contains(hits)
                        hit_any |= inside
                        bd = chart.boundary_distance(hits)
                        guard = max(1e-6 * self.scale, 2.0 * chart.max_sagitta)
                        too_close |= bd < guard
                    parity[cand] += hit_any.astype(int)
                    ok[cand] &= ~too_close
            votes[todo[ok]] += parity[ok] % 2
            valid[todo[ok]] += 1
            todo = todo[valid[todo] < 3]
        undecided = valid == 0
        res = np.where(votes * 2 > valid, "in", "out")
        labels[~on] = res[~on]
        labels[undecided & ~on] = "out"
        return labels

    def inside(self, points, boundary_tol=tol.ON_SURFACE):
        """Closed-regularized membership: boundary points count as inside."""
        lab = self.classify(points, boundary_tol)
        return (lab == "in") | (lab == "on")


def classify_points(M, points, boundary_tol=tol.ON_SURFACE):
    return SolidClassifier(M).classify(points, boundary_tol)


def monte_carlo_volume(M, n=100000, seed=0, classifier=None, margin=0.05):
    """Volume estimate and its standard error by uniform sampling."""
    lo, hi = M.bbox()
    pad = margin * (hi - lo).max()
    lo, hi = lo - pad, hi + pad
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(n, 3))
    cls = classifier or SolidClassifier(M)
    lab = cls.classify(X)
    inside = (lab == "in") | (lab == "on")
    box = float(np.prod(hi - lo))
    p = inside.mean()
    vol = box * p
    stderr = box * np.sqrt(max(p * (1 - p), 1e-12) / n)
    return vol, stderr
