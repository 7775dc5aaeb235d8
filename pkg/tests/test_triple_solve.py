import numpy as np
import pytest

from qpp.quadric import QuadricSurface
from qpp.nsolve import solve_triple, project_to_curve


def _grid_scan_roots(s1, s2, s3, lo, hi, n=64, coarse=0.08):
    """Independent root oracle: residual-field scan on a dense grid.

    Returns cluster representatives of grid cells where all three
    scale-relative distances are below the cell diagonal.
    """
    axes = [np.linspace(lo[k], hi[k], n) for k in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    cell = np.linalg.norm((np.asarray(hi) - np.asarray(lo)) / (n - 1))
    mask = np.ones(len(pts), dtype=bool)
    for s in (s1, s2, s3):
        mask &= s.distance_estimate(pts) < max(cell, coarse)
    cands = pts[mask]
    clusters = []
    for p in cands:
        hits = [c for c in clusters
                if min(np.linalg.norm(p - q) for q in c) < 4 * cell]
        if hits:
            merged = [q for c in hits for q in c] + [p]
            clusters = [c for c in clusters if c not in hits] + [merged]
        else:
            clusters.append([p])
    return [np.mean(c, axis=0) for c in clusters]


def test_three_planes():
    p1 = QuadricSurface.plane("x", [1, 0, 0], 1)
    p2 = QuadricSurface.plane("y", [0, 1, 0], 2)
    p3 = QuadricSurface.plane("z", [0, 0, 1], 3)
    roots = solve_triple(p1, p2, p3, [[0, 0, 0]], model_scale=5.0)
    assert len(roots) == 1
    assert np.allclose(roots.points[0], [1, 2, 3], atol=1e-9)
    assert not roots.near_singular[0]


def test_cylinder_two_planes_two_roots():
    cyl = QuadricSurface.cylinder("c", [0, 0, 0], [0, 0, 1], 2.0)
    py = QuadricSurface.plane("y0", [0, 1, 0], 0)
    pz = QuadricSurface.plane("z0", [0, 0, 1], 0)
    roots = solve_triple(cyl, py, pz, [[1.5, 0.3, 0.2], [-1.5, 0.3, 0.2]], model_scale=4.0)
    got = sorted(tuple(np.round(p, 6)) for p in roots.points)
    assert got == [(-2.0, 0.0, 0.0), (2.0, 0.0, 0.0)]


def test_tangential_root_flagged():
    # Expected location verified against the dense residual-field scan below.
    cyl = QuadricSurface.cylinder("c", [0, 0, 0], [0, 0, 1], 2.0)
    py = QuadricSurface.plane("y2", [0, 1, 0], 2.0)
    pz = QuadricSurface.plane("z0", [0, 0, 1], 0)
    seeds = [[0.5, 1.9, 0.1], [-0.5, 1.9, -0.1], [0.1, 2.1, 0.0]]
    roots = solve_triple(cyl, py, pz, seeds, model_scale=4.0)
    assert len(roots) == 1
    assert roots.near_singular[0]
    assert np.allclose(roots.points[0], [0, 2, 0], atol=1e-6)
    oracle = _grid_scan_roots(cyl, py, pz, [-3, -3, -3], [3, 3, 3])
    assert len(oracle) == 1
    assert np.linalg.norm(oracle[0] - roots.points[0]) < 0.2


def test_residuals_below_tolerance():
    cyl = QuadricSurface.cylinder("c", [1, 2, 0], [0, 0, 1], 1.5)
    sp = QuadricSurface.sphere("s", [1, 0, 0], 2.5)
    pl = QuadricSurface.plane("p", [0, 0, 1], 0.5)
    rng = np.random.default_rng(5)
    roots = solve_triple(cyl, sp, pl, rng.normal(size=(40, 3)) * 3, model_scale=5.0)
    assert len(roots) >= 1
    for p in roots.points:
        for s in (cyl, sp, pl):
            assert s.distance_estimate(p) / 5.0 < 1e-9


def test_completeness_against_grid_scan():
    cyl = QuadricSurface.cylinder("c", [0, 0, 0], [0, 0, 1], 2.0)
    sp = QuadricSurface.sphere("s", [1.0, 0.5, 0.0], 2.2)
    pl = QuadricSurface.plane("p", [0.1, 0, 1], 0.3)
    rng = np.random.default_rng(9)
    seeds = rng.uniform(-3, 3, size=(120, 3))
    roots = solve_triple(cyl, sp, pl, seeds, model_scale=6.0)
    oracle = _grid_scan_roots(cyl, sp, pl, [-4, -4, -4], [4, 4, 4])
    assert len(oracle) >= 1
    for o in oracle:
        d = min(np.linalg.norm(o - p) for p in roots.points)
        # Grid clusters are only cell-accurate; every cluster must own a root.
        assert d < 0.3


def test_empty_when_no_root():
    p1 = QuadricSurface.plane("a", [0, 0, 1], 0)
    p2 = QuadricSurface.plane("b", [0, 0, 1], 1)
    p3 = QuadricSurface.plane("c", [1, 0, 0], 0)
    roots = solve_triple(p1, p2, p3, [[0, 0, 0.5]], model_scale=2.0)
    assert len(roots) == 0


def test_seeds_required():
    p = QuadricSurface.plane("a", [0, 0, 1], 0)
    with pytest.raises(ValueError):
        solve_triple(p, p, p, np.zeros((0, 3)))


def test_project_to_curve():
    cyl = QuadricSurface.cylinder("c", [0, 0, 0], [0, 0, 1], 2.0)
    pl = QuadricSurface.plane("p", [0, 0, 1], 1.0)
    pts, ok = project_to_curve(cyl, pl, [[2.5, 0.3, 1.4], [-1.7, 0.2, 0.6]], model_scale=4.0)
    assert ok.all()
    assert np.allclose(pl.value(pts), 0, atol=1e-8)
    assert np.allclose(np.linalg.norm(pts[:, :2], axis=1), 2.0, atol=1e-8)
