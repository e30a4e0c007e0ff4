"""Kinematics tests for the five-bar tactor stations.

The oracle used throughout is direct circle-circle intersection: the
distal joint P must sit on both circles C(A1, l3) and C(A2, l4), where
A_i are the elbow joints placed by the proximal links. The closed-form
FK/IK must agree with that construction and with each other.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactorsim import geometry as geo
from tactorsim.config import station

D2R = math.pi / 180.0


def circle_intersections(c1, r1, c2, r2):
    """All intersection points of two circles, as a list of (x, y).

    Independent of the package FK: straight coordinate geometry on the
    radical line. Duplicated-root tangency returns one point.
    """
    x1, y1 = c1
    x2, y2 = c2
    d = math.hypot(x2 - x1, y2 - y1)
    if d == 0:
        return []
    if d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h2 = r1 * r1 - a * a
    h = math.sqrt(max(h2, 0.0))
    mx = x1 + a * (x2 - x1) / d
    my = y1 + a * (y2 - y1) / d
    ux, uy = -(y2 - y1) / d, (x2 - x1) / d
    pts = [(mx + h * ux, my + h * uy)]
    if h > 0:
        pts.append((mx - h * ux, my - h * uy))
    return pts


def fk_oracle(geom, q):
    """FK via circle intersection, picking the branch by the elbow rule."""
    a1, a2 = geo.intermediate_joints(geom, q)
    pts = circle_intersections(a1.as_tuple(), geom.l3, a2.as_tuple(), geom.l4)
    if not pts:
        return None
    if len(pts) == 1:
        return pts[0]
    # elbow POSITIVE rotates A1->A2 counterclockwise: pick the point with
    # positive cross product of (A2-A1) x (P-A1); NEGATIVE picks the other.
    def cross(p):
        return (a2.x - a1.x) * (p[1] - a1.y) - (a2.y - a1.y) * (p[0] - a1.x)
    pts.sort(key=cross)
    return pts[-1] if geom.elbow is geo.Elbow.POSITIVE else pts[0]


INDEX = station("index")
THUMB = station("thumb")
ALL_MECHS = [
    pytest.param(INDEX.lower, id="index-lower"),
    pytest.param(INDEX.upper, id="index-upper"),
    pytest.param(THUMB.lower, id="thumb-lower"),
    pytest.param(THUMB.upper, id="thumb-upper"),
]


class TestForwardKinematics:
    def test_straight_up_pose(self):
        # Proximal links vertical: A1=(0,9), A2=(12.5,9); distal circles of
        # radius 15 intersect at x=6.25, y=9+sqrt(225-6.25^2).
        q = geo.JointAngles(90 * D2R, 90 * D2R)
        p = geo.forward_kinematics(INDEX.lower, q)
        y_exp = 9.0 + math.sqrt(15.0**2 - 6.25**2)
        assert p.x == pytest.approx(6.250, abs=1e-3)
        assert p.y == pytest.approx(22.636, abs=1e-3)
        assert p.y == pytest.approx(y_exp, abs=1e-12)

    def test_straight_up_matches_oracle(self):
        q = geo.JointAngles(90 * D2R, 90 * D2R)
        p = geo.forward_kinematics(INDEX.lower, q)
        ox, oy = fk_oracle(INDEX.lower, q)
        assert p.x == pytest.approx(ox, abs=1e-9)
        assert p.y == pytest.approx(oy, abs=1e-9)

    def test_flat_pose(self):
        # Proximal links along +x: A1=(9,0), A2=(21.5,0), d=12.5. The distal
        # circles meet at x=15.25, y=+-sqrt(225-6.25^2); the elbow branch
        # picks the sign.
        q = geo.JointAngles(0.0, 0.0)
        p = geo.forward_kinematics(INDEX.lower, q)
        ox, oy = fk_oracle(INDEX.lower, q)
        assert (ox, oy) == pytest.approx((15.25, math.sqrt(225.0 - 6.25**2)), abs=1e-9)
        assert p.x == pytest.approx(ox, abs=1e-9)
        assert p.y == pytest.approx(oy, abs=1e-9)

    def test_upper_elbow_branch_flips(self):
        # Same pose on the upper mechanism geometry (NEGATIVE elbow) must
        # take the mirror-image intersection, below the A1-A2 chord.
        lengths = dict(l1=9.0, l2=9.0, l3=15.0, l4=15.0)
        down = geo.LinkageGeometry(o1=geo.Point2(0, 0), o2=geo.Point2(12.5, 0),
                                   elbow=geo.Elbow.NEGATIVE, **lengths)
        p = geo.forward_kinematics(down, geo.JointAngles(0.0, 0.0))
        assert p.y == pytest.approx(-math.sqrt(225.0 - 6.25**2), abs=1e-9)
        assert p.x == pytest.approx(15.25, abs=1e-9)

    def test_intermediate_joints_examples(self):
        a1, a2 = geo.intermediate_joints(INDEX.lower, geo.JointAngles(90 * D2R, 90 * D2R))
        assert a1.as_tuple() == pytest.approx((0.0, 9.0), abs=1e-12)
        assert a2.as_tuple() == pytest.approx((12.5, 9.0), abs=1e-12)
        a1, _ = geo.intermediate_joints(INDEX.lower, geo.JointAngles(45 * D2R, 90 * D2R))
        assert a1.as_tuple() == pytest.approx((6.3640, 6.3640), abs=1e-4)

    def test_singular_coincident_elbows(self):
        # theta chosen so A1 == A2: cos(t1) = 12.5/18 with mirrored chain 2.
        t1 = math.acos(12.5 / 18.0)
        q = geo.JointAngles(t1, math.pi - t1)
        a1, a2 = geo.intermediate_joints(INDEX.lower, q)
        assert a1.dist(a2) < 1e-12
        with pytest.raises(geo.Singular):
            geo.forward_kinematics(INDEX.lower, q)

    def test_no_assembly_stretched(self):
        # Elbows pulled apart farther than l3+l4 can span.
        q = geo.JointAngles(math.pi, 0.0)
        a1, a2 = geo.intermediate_joints(INDEX.lower, q)
        assert a1.dist(a2) > INDEX.lower.l3 + INDEX.lower.l4
        with pytest.raises(geo.NoAssembly):
            geo.forward_kinematics(INDEX.lower, q)

    def test_fk_matches_oracle_on_grid(self):
        rng = np.random.default_rng(7)
        for geom in (INDEX.lower, INDEX.upper, THUMB.lower, THUMB.upper):
            hits = 0
            while hits < 200:
                t1, t2 = rng.uniform(-math.pi, math.pi, size=2)
                q = geo.JointAngles(t1, t2)
                try:
                    p = geo.forward_kinematics(geom, q)
                except geo.KinematicsError:
                    continue
                ox, oy = fk_oracle(geom, q)
                assert math.hypot(p.x - ox, p.y - oy) < 1e-9
                hits += 1


class TestInverseKinematics:
    def test_worked_example(self):
        p = geo.Point2(6.25, 9.0 + math.sqrt(15.0**2 - 6.25**2))
        q = geo.inverse_kinematics(INDEX.lower, p)
        assert q.theta1 == pytest.approx(90 * D2R, abs=1e-9)
        assert q.theta2 == pytest.approx(90 * D2R, abs=1e-9)

    def test_unreachable_far(self):
        with pytest.raises(geo.Unreachable):
            geo.inverse_kinematics(INDEX.lower, geo.Point2(6.25, 100.0))

    def test_unreachable_inside_annulus(self):
        # Base origin itself: rho = 0 < |l3 - l1| = 6.
        with pytest.raises(geo.KinematicsError):
            geo.inverse_kinematics(INDEX.lower, geo.Point2(0.0, 0.0))

    def test_singular_at_base(self):
        with pytest.raises(geo.Singular):
            geo.inverse_kinematics(
                INDEX.lower, geo.Point2(INDEX.lower.o1.x, INDEX.lower.o1.y))

    @pytest.mark.parametrize("geom", ALL_MECHS)
    def test_round_trip_ellipse_boundary(self, geom):
        # Every station must reach its whole fingertip ellipse; round-trip
        # errors there must be far below mechanical meaning.
        ell = INDEX.ellipse if geom.l3 == 15.0 else THUMB.ellipse
        # Upper mechanisms live in the same world frame as the ellipse.
        for t in np.linspace(0, 2 * math.pi, 64, endpoint=False):
            p = geo.Point2(ell.center.x + ell.semi_x * math.cos(t),
                           ell.center.y + ell.semi_y * math.sin(t))
            q = geo.inverse_kinematics(geom, p)
            p2 = geo.forward_kinematics(geom, q)
            assert p.dist(p2) < 1e-9


def _reachable_points(geom, n, seed):
    """Random points inside the mechanism's reachable set, via rejection."""
    rng = np.random.default_rng(seed)
    pts = []
    lo = min(geom.o1.x, geom.o2.x) - (geom.l1 + geom.l3)
    hi = max(geom.o1.x, geom.o2.x) + (geom.l1 + geom.l3)
    while len(pts) < n:
        x = rng.uniform(lo, hi)
        y = rng.uniform(geom.o1.y - (geom.l1 + geom.l3), geom.o1.y + (geom.l1 + geom.l3))
        p = geo.Point2(x, y)
        if geo.is_reachable(geom, p):
            # keep clear of annulus boundaries where IK conditioning dies
            r1 = p.dist(geom.o1)
            r2 = p.dist(geom.o2)
            if (abs(geom.l3 - geom.l1) + 0.5 < r1 < geom.l1 + geom.l3 - 0.5
                    and abs(geom.l4 - geom.l2) + 0.5 < r2 < geom.l2 + geom.l4 - 0.5):
                pts.append(p)
    return pts


class TestRoundTripProperties:
    @pytest.mark.parametrize("geom", ALL_MECHS)
    def test_fk_image_round_trips(self, geom):
        # Points the mechanism can actually reach (FK images) must all
        # round-trip: the IK branch search finds an assembling combination.
        rng = np.random.default_rng(17)
        hits = 0
        while hits < 2500:
            q = geo.JointAngles(*rng.uniform(-math.pi, math.pi, size=2))
            try:
                p = geo.forward_kinematics(geom, q)
                q2 = geo.inverse_kinematics(geom, p)
            except geo.KinematicsError:
                continue
            p2 = geo.forward_kinematics(geom, q2)
            assert p.dist(p2) < 1e-6
            hits += 1

    @pytest.mark.parametrize("geom", ALL_MECHS)
    def test_annulus_points_round_trip_or_reject(self, geom):
        # Both-annuli membership is necessary but not sufficient: some of
        # those points have no assembly on the configured elbow branch and
        # must be rejected, never silently mapped elsewhere.
        rejected = 0
        pts = _reachable_points(geom, 400, seed=11)
        for p in pts:
            try:
                q = geo.inverse_kinematics(geom, p)
            except geo.Unreachable:
                rejected += 1
                continue
            p2 = geo.forward_kinematics(geom, q)
            assert p.dist(p2) < 1e-6
        assert rejected < len(pts)

    @pytest.mark.parametrize("st_cfg", [INDEX, THUMB], ids=["index", "thumb"])
    def test_ellipse_always_canonical(self, st_cfg):
        # The operating region must never hit the branch-search fallback:
        # everything inside the fingertip ellipse assembles in working mode.
        rng = np.random.default_rng(23)
        for geom in (st_cfg.lower, st_cfg.upper):
            for _ in range(500):
                t = rng.uniform(0, math.tau)
                r = math.sqrt(rng.uniform(0, 1))
                p = geo.Point2(st_cfg.ellipse.center.x + r * st_cfg.ellipse.semi_x * math.cos(t),
                               st_cfg.ellipse.center.y + r * st_cfg.ellipse.semi_y * math.sin(t))
                q = geo.inverse_kinematics(geom, p)
                p2 = geo.forward_kinematics(geom, q)
                assert p.dist(p2) < 1e-9

    @given(t1=st.floats(-math.pi, math.pi), t2=st.floats(-math.pi, math.pi))
    @settings(max_examples=300, deadline=None)
    def test_fk_ik_round_trip(self, t1, t2):
        geom = INDEX.lower
        q = geo.JointAngles(t1, t2)
        try:
            p = geo.forward_kinematics(geom, q)
        except geo.KinematicsError:
            return
        if not _clear_of_annulus_edges(geom, p):
            return
        q2 = geo.inverse_kinematics(geom, p)
        p2 = geo.forward_kinematics(geom, q2)
        assert p.dist(p2) < 1e-6

    @given(t1=st.floats(-math.pi, math.pi), t2=st.floats(-math.pi, math.pi))
    @settings(max_examples=300, deadline=None)
    def test_fk_ik_recovers_angles(self, t1, t2):
        # Away from singular configurations the IK must recover the exact
        # joint angles, not merely an equivalent pose.
        geom = INDEX.lower
        q = geo.JointAngles(t1, t2)
        try:
            p = geo.forward_kinematics(geom, q)
        except geo.KinematicsError:
            return
        if not _clear_of_annulus_edges(geom, p):
            return
        a1, a2 = geo.intermediate_joints(geom, q)
        # IK prefers the canonical branch pair; only configurations
        # assembled on it are guaranteed exact angle recovery.
        def on_ray_side(base, elbow, sign):
            c = ((p.x - base.x) * (elbow.y - base.y)
                 - (p.y - base.y) * (elbow.x - base.x))
            return sign * c > 1e-6
        s = geom.elbow.sign
        if not (on_ray_side(geom.o1, a1, s) and on_ray_side(geom.o2, a2, -s)):
            return
        q2 = geo.inverse_kinematics(geom, p)
        assert math.remainder(q2.theta1 - q.theta1, math.tau) == pytest.approx(0, abs=1e-8)
        assert math.remainder(q2.theta2 - q.theta2, math.tau) == pytest.approx(0, abs=1e-8)


def _clear_of_annulus_edges(geom, p, margin=1e-6):
    """True when p sits at least margin inside both chain annuli."""
    for i in (1, 2):
        o, l_prox, l_dist = geom.chain(i)
        rho = p.dist(o)
        if not (abs(l_prox - l_dist) + margin < rho < l_prox + l_dist - margin):
            return False
    return True


class TestReachability:
    def test_examples(self):
        assert geo.is_reachable(INDEX.lower, geo.Point2(6.25, 15.5))
        assert not geo.is_reachable(INDEX.lower, geo.Point2(0.0, 0.0))
        assert not geo.is_reachable(INDEX.lower, geo.Point2(6.25, 100.0))

    def test_matches_annulus_brute_force(self):
        rng = np.random.default_rng(3)
        geom = THUMB.lower
        for _ in range(2000):
            p = geo.Point2(rng.uniform(-30, 45), rng.uniform(-30, 45))
            r1 = p.dist(geom.o1)
            r2 = p.dist(geom.o2)
            expect = (abs(geom.l3 - geom.l1) <= r1 <= geom.l1 + geom.l3
                      and abs(geom.l4 - geom.l2) <= r2 <= geom.l2 + geom.l4)
            assert geo.is_reachable(geom, p) == expect

    def test_mask_matches_scalar(self):
        geom = INDEX.upper
        xs = np.linspace(-10, 25, 40)
        ys = np.linspace(5, 50, 40)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        mask = geo.reachable_mask(geom, gx, gy)
        for i in range(0, 40, 7):
            for j in range(0, 40, 7):
                assert mask[i, j] == geo.is_reachable(geom, geo.Point2(gx[i, j], gy[i, j]))


class TestTargetEllipse:
    def test_contains_and_clamp(self):
        ell = INDEX.ellipse
        assert ell.contains(ell.center)
        assert ell.contains(geo.Point2(6.25 + 7.5, 15.5))
        assert not ell.contains(geo.Point2(6.25 + 7.6, 15.5))
        p, clamped = ell.clamp(geo.Point2(6.25, 15.5 + 60.0))
        assert clamped
        assert p.as_tuple() == pytest.approx((6.25, 15.5 + 6.0), abs=1e-9)
        q, clamped = ell.clamp(geo.Point2(6.3, 15.6))
        assert not clamped and q.as_tuple() == (6.3, 15.6)

    def test_clamp_lands_on_boundary(self):
        ell = THUMB.ellipse
        rng = np.random.default_rng(5)
        for _ in range(100):
            raw = geo.Point2(rng.uniform(-30, 40), rng.uniform(-30, 60))
            p, clamped = ell.clamp(raw)
            assert ell.level(p) <= 1.0 + 1e-9
            if clamped:
                assert ell.level(p) == pytest.approx(1.0, abs=1e-9)


class TestWorkspace:
    def test_resolution_gate(self):
        with pytest.raises(geo.ResolutionTooCoarse):
            geo.compute_workspace(INDEX.lower, INDEX.upper, 2.0, INDEX.ellipse)
        # 2*6/10 = 1.2 mm is the coarsest legal resolution for the index.
        geo.compute_workspace(INDEX.lower, INDEX.upper, 1.2, INDEX.ellipse)

    def test_cells_match_scalar_reachability(self):
        grid = geo.compute_workspace(INDEX.lower, INDEX.upper, 1.0, INDEX.ellipse)
        rng = np.random.default_rng(13)
        for _ in range(200):
            i = rng.integers(0, grid.nx)
            j = rng.integers(0, grid.ny)
            x, y = grid.cell_center(i, j)
            p = geo.Point2(x, y)
            assert grid.lower[i, j] == geo.is_reachable(INDEX.lower, p)
            assert grid.upper[i, j] == geo.is_reachable(INDEX.upper, p)
            assert grid.both[i, j] == (grid.lower[i, j] and grid.upper[i, j])

    @pytest.mark.parametrize("st_cfg", [INDEX, THUMB], ids=["index", "thumb"])
    def test_ellipse_covered_by_both(self, st_cfg):
        # The design target: every fingertip-ellipse cell reachable by both
        # mechanisms of the station, checked at 0.1 mm.
        grid = geo.compute_workspace(st_cfg.lower, st_cfg.upper, 0.1, st_cfg.ellipse)
        inside, covered = grid.ellipse_cells_covered()
        assert inside > 0
        assert covered == inside

    def test_intersection_area_sane(self):
        grid = geo.compute_workspace(INDEX.lower, INDEX.upper, 0.25, INDEX.ellipse)
        area = grid.intersection_area_mm2()
        ell_area = math.pi * INDEX.ellipse.semi_x * INDEX.ellipse.semi_y
        assert area >= ell_area
        # Bounded above by either full annulus area.
        outer = math.pi * (INDEX.lower.l1 + INDEX.lower.l3) ** 2
        assert area < outer


class TestAngles:
    @given(a=st.floats(-50, 50))
    @settings(max_examples=200, deadline=None)
    def test_wrap_angle_range_and_identity(self, a):
        w = geo.wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.remainder(w - a, math.tau) == pytest.approx(0, abs=1e-9)

    def test_joint_angles_normalized(self):
        q = geo.JointAngles(3 * math.pi, -3 * math.pi)
        assert q.theta1 == pytest.approx(math.pi)
        assert q.theta2 == pytest.approx(math.pi)
