import numpy as np
import pytest

from qpp.geom import RigidTransform
from qpp.quadric import QuadricSurface, eval_and_grad, transform_surface
from qpp.errors import NonRigidTransform


def test_cylinder_on_surface_point():
    cyl = QuadricSurface.cylinder("c", [0, 0, 0], [0, 0, 1], 2.0)
    val, grad = eval_and_grad(cyl, [2, 0, 0])
    assert val == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(grad, [4, 0, 0])


def test_plane_point():
    pl = QuadricSurface.plane("p", [0, 0, 1], 5.0)
    val, grad = eval_and_grad(pl, [0, 0, 5])
    assert val == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(grad, [0, 0, 1])


def test_sphere_center_zero_gradient():
    sp = QuadricSurface.sphere("s", [0, 0, 0], 3.0)
    val, grad = eval_and_grad(sp, [0, 0, 0])
    assert val == pytest.approx(-9.0)
    assert np.allclose(grad, [0, 0, 0])


def test_translate_plane():
    pl = QuadricSurface.plane("p", [0, 0, 1], 0.0)
    moved = transform_surface(pl, RigidTransform.translation([0, 0, 3]))
    assert moved.canonical["offset"] == pytest.approx(3.0)
    assert np.allclose(moved.canonical["normal"], [0, 0, 1])
    assert moved.id == pl.id


def test_rotate_cylinder():
    cyl = QuadricSurface.cylinder("c", [0, 0, 0], [0, 0, 1], 1.5)
    moved = transform_surface(cyl, RigidTransform.rotation([0, 0, 0], [1, 0, 0], np.pi / 2))
    assert np.allclose(moved.canonical["axis"], [0, -1, 0], atol=1e-12)
    assert moved.canonical["radius"] == pytest.approx(1.5)


def test_identity_transform_bitwise():
    cone = QuadricSurface.cone("k", [1, 2, 3], [0, 1, 0], 0.3)
    same = transform_surface(cone, RigidTransform.identity())
    assert np.array_equal(same.canonical["apex"], cone.canonical["apex"])
    assert np.array_equal(same.canonical["axis"], cone.canonical["axis"])
    assert same.canonical["half_angle"] == cone.canonical["half_angle"]


def test_non_rigid_rejected():
    pl = QuadricSurface.plane("p", [0, 0, 1], 1.0)
    shear = RigidTransform(np.array([[1, 0.1, 0], [0, 1, 0], [0, 0, 1.0]]), np.zeros(3))
    with pytest.raises(NonRigidTransform):
        transform_surface(pl, shear)


def _random_surface(rng, sid):
    kind = rng.choice(["plane", "sphere", "cylinder", "cone", "general"])
    p = rng.normal(size=3) * 3
    d = rng.normal(size=3)
    if kind == "plane":
        return QuadricSurface.plane(sid, d, rng.normal() * 2)
    if kind == "sphere":
        return QuadricSurface.sphere(sid, p, 0.5 + rng.random() * 3)
    if kind == "cylinder":
        return QuadricSurface.cylinder(sid, p, d, 0.5 + rng.random() * 3)
    if kind == "cone":
        return QuadricSurface.cone(sid, p, d, 0.1 + rng.random())
    Q = rng.normal(size=(4, 4))
    return QuadricSurface.general(sid, Q + Q.T)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    scale = 10.0
    h = 1e-6 * scale
    for i in range(1000):
        s = _random_surface(rng, f"s{i}")
        p = rng.normal(size=3) * 5
        grad = s.gradient(p)
        fd = np.zeros(3)
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            fd[k] = (s.value(p + dp) - s.value(p - dp)) / (2 * h)
        assert np.abs(grad - fd).max() <= 1e-5 * (1 + np.linalg.norm(grad))


def test_transform_consistency():
    rng = np.random.default_rng(11)
    for i in range(300):
        s = _random_surface(rng, f"s{i}")
        axis = rng.normal(size=3)
        T = RigidTransform.rotation(rng.normal(size=3), axis, rng.normal()).compose(
            RigidTransform.translation(rng.normal(size=3) * 4))
        moved = transform_surface(s, T)
        p = rng.normal(size=3) * 5
        f0 = s.value(p)
        f1 = moved.value(T.apply_point(p))
        assert abs(f1 - f0) <= 1e-9 * (1 + abs(f0))


def test_canonical_regenerates_matrix():
    rng = np.random.default_rng(3)
    for i in range(200):
        s = _random_surface(rng, f"s{i}")
        assert s.canonical_consistency() <= 1e-9
        for key in ("normal", "axis"):
            if key in s.canonical:
                assert abs(np.linalg.norm(s.canonical[key]) - 1.0) <= 1e-12
