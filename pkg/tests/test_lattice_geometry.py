import itertools
import math

import numpy as np
import pytest

from svsmooth.errors import BudgetExceededError
from svsmooth.lattice_geometry import (Ellipsoid, Parallelepiped,
                                       build_sd_net, count_lattice_points,
                                       cover_audit, cover_ellipsoid,
                                       lattice_direction_net, net_size_bound,
                                       sandwich_check)


def _rotation2(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def test_parallelepiped_contains_closed_boundary():
    box = Parallelepiped(np.zeros(2), np.eye(2), np.array([2.0, 4.0]))
    assert box.contains(np.array([1.0, 2.0]))  # corner, closed
    assert box.contains(np.array([0.0, 0.0]))
    assert not box.contains(np.array([1.0 + 1e-12, 0.0]))
    assert box.circumradius == pytest.approx(math.sqrt(5.0))
    got = box.contains(np.array([[0.5, 0.5], [3.0, 0.0]]))
    np.testing.assert_array_equal(got, [True, False])
    with pytest.raises(ValueError, match="orthonormal"):
        Parallelepiped(np.zeros(2), np.ones((2, 2)), np.ones(2))
    with pytest.raises(ValueError):
        Parallelepiped(np.zeros(2), np.eye(2), np.array([1.0, -1.0]))


def test_ellipsoid_contains():
    e = Ellipsoid(np.zeros(2), np.eye(2), np.array([2.0, 1.0]))
    assert e.contains(np.array([2.0, 0.0]))
    assert not e.contains(np.array([2.0, 0.5]))
    rot = Ellipsoid(np.array([1.0, 1.0]), _rotation2(0.7), np.array([3.0, 0.5]))
    inside = rot.center + rot.axes @ np.array([2.9, 0.0])
    assert rot.contains(inside)


def _brute_count(box, lim=20):
    pts = np.array(list(itertools.product(range(-lim, lim + 1),
                                          repeat=box.dim)), dtype=np.float64)
    return int(np.count_nonzero(box.contains(pts)))


def test_count_lattice_points_axis_aligned():
    box = Parallelepiped(np.zeros(2), np.eye(2), np.array([3.0, 3.0]))
    assert count_lattice_points(box) == 9  # {-1,0,1}^2


def test_count_lattice_points_matches_brute_force(rng):
    for _ in range(10):
        angle = float(rng.random() * math.pi)
        center = rng.standard_normal(2) * 2.0
        widths = 1.0 + rng.random(2) * 5.0
        box = Parallelepiped(center, _rotation2(angle), widths)
        assert count_lattice_points(box) == _brute_count(box)


def test_count_lattice_points_guards():
    with pytest.raises(ValueError, match="dimension"):
        count_lattice_points(Parallelepiped(np.zeros(9), np.eye(9), np.ones(9)))
    big = Parallelepiped(np.zeros(2), np.eye(2), np.full(2, 5000.0))
    with pytest.raises(ValueError, match="circumradius"):
        count_lattice_points(big)
    medium = Parallelepiped(np.zeros(8), np.eye(8), np.full(8, 30.0))
    with pytest.raises(BudgetExceededError):
        count_lattice_points(medium, budget=1000)


def test_cover_ellipsoid_covers_by_audit():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    e = Ellipsoid(np.array([0.5, -1.0, 2.0]), q, np.array([2.0, 1.0, 0.25]))
    boxes = cover_ellipsoid(e)
    m = math.ceil(2.0 * math.sqrt(3))
    assert len(boxes) == m**3
    assert cover_audit(e, boxes, samples=20_000, seed=1) == 0


def test_cover_ellipsoid_guards():
    with pytest.raises(ValueError, match="dimension"):
        cover_ellipsoid(Ellipsoid(np.zeros(13), np.eye(13), np.ones(13)))
    with pytest.raises(BudgetExceededError):
        cover_ellipsoid(Ellipsoid(np.zeros(9), np.eye(9), np.ones(9)),
                        max_boxes=1000)
    e = Ellipsoid(np.zeros(2), np.eye(2), np.ones(2))
    with pytest.raises(ValueError, match="cover_ellipsoid output"):
        cover_audit(e, cover_ellipsoid(e)[:-1], samples=10)


def test_cover_audit_detects_broken_cover():
    e = Ellipsoid(np.zeros(2), np.eye(2), np.array([2.0, 1.0]))
    boxes = cover_ellipsoid(e)
    # shrink every box; the audit must notice points escaping their cell
    broken = [Parallelepiped(b.center, b.axes, b.widths * 0.2) for b in boxes]
    assert cover_audit(e, broken, samples=2000, seed=3) > 0


def test_sandwich_check_random_and_adversarial(rng):
    for k in range(5):
        J = rng.standard_normal((int(rng.integers(1, 4)), 3)) * (k + 0.3)
        assert sandwich_check(J, samples=20_000, seed=k)
    report = sandwich_check(np.zeros((1, 3)), samples=5000)
    assert report.ok and report.counterexample is None
    with pytest.raises(ValueError):
        sandwich_check(np.ones(3))


def _brute_directions(n, D, annulus):
    lim = int(math.floor(3.0 * D))
    prims = set()
    for p in itertools.product(range(-lim, lim + 1), repeat=n):
        nrm2 = sum(c * c for c in p)
        if nrm2 == 0 or nrm2 > 9.0 * D * D:
            continue
        if annulus and 4.0 * nrm2 <= 9.0 * D * D:
            continue
        g = math.gcd(*(abs(c) for c in p))
        prims.add(tuple(c // g for c in p))
    arr = np.array(sorted(prims), dtype=np.float64)
    return arr / np.linalg.norm(arr, axis=1, keepdims=True)


def test_lattice_direction_net_matches_brute_force():
    for n, D in ((2, 2.0), (3, 1.5)):
        for annulus in (False, True):
            got = lattice_direction_net(n, D, annulus=annulus)
            expect = _brute_directions(n, D, annulus)
            np.testing.assert_allclose(got, expect, atol=1e-15)


def test_annulus_and_ball_nets_are_equal():
    # every direction in the ball is hit by an integer multiple in the annulus
    for n, D in ((2, 3.0), (3, 2.0)):
        ball = lattice_direction_net(n, D, annulus=False)
        ann = lattice_direction_net(n, D, annulus=True)
        np.testing.assert_array_equal(ball, ann)


def test_lattice_direction_net_budget():
    with pytest.raises(BudgetExceededError):
        lattice_direction_net(5, 10.0, point_budget=1000)


def test_build_sd_net_audit():
    res = build_sd_net(3, D=6.0, mu=0.5, gamma=0.1, sample_budget=300, seed=4)
    assert res.gap_bound == pytest.approx(2.0 * 0.5 * math.sqrt(3) / 6.0)
    assert res.audit_members > 0
    assert res.audit_max_gap <= res.gap_bound
    with pytest.raises(ValueError):
        build_sd_net(6, D=2.0, mu=0.5, gamma=0.2)
    with pytest.raises(ValueError):
        build_sd_net(3, D=20.0, mu=0.5, gamma=0.2)


def test_build_sd_net_empty_level_set_reports_nan():
    # alpha = mu sqrt(n) at the covering radius of Z^n empties the level set
    # once the auto-hit scale alpha/gamma falls below D
    res = build_sd_net(2, D=4.0, mu=0.5, gamma=0.2, sample_budget=200, seed=0)
    assert res.audit_members == 0
    assert math.isnan(res.audit_max_gap)


def test_net_size_bound_values():
    # n=1, D=2, mu=1/2, eta=0, C=1: 2^1 * 4 * (2/1)^1 = 16
    assert net_size_bound(1, 2.0, 0.5, 0.0, 1.0) == pytest.approx(16.0)
    assert net_size_bound(400, 2.0, 1e-8, 0.0, 10.0) == math.inf
    with pytest.raises(ValueError):
        net_size_bound(0, 1.0, 0.5, 0.0, 1.0)
