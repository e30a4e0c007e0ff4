"""Pattern generator/classifier tests.

Oracle for the generators is direct independent evaluation of the three
motion definitions; the classifier is tested as the generator's inverse,
clean and under seeded positional noise.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactorsim import patterns as pat
from tactorsim.config import station
from tactorsim.geometry import Point2, is_reachable

INDEX = station("index")
CENTER = INDEX.ellipse.center


def spec_for(kind, **kw):
    return pat.PatternSpec(kind=kind, center=CENTER, **kw)


class TestGenerate:
    def test_stretching_starts_at_center(self):
        p = pat.generate_pattern(spec_for(pat.PatternKind.STRETCHING), 0.0)
        assert p.upper == CENTER
        assert p.lower == CENTER

    def test_stretching_endpoints(self):
        spec = spec_for(pat.PatternKind.STRETCHING, amplitude=4.0)
        p = pat.generate_pattern(spec, spec.duration)
        assert p.upper.as_tuple() == pytest.approx((CENTER.x + 4.0, CENTER.y))
        assert p.lower.as_tuple() == pytest.approx((CENTER.x - 4.0, CENTER.y))

    def test_stretching_linear_in_time(self):
        spec = spec_for(pat.PatternKind.STRETCHING, amplitude=4.0, duration=2.0)
        for u in (0.25, 0.5, 0.9):
            p = pat.generate_pattern(spec, u * spec.duration)
            assert p.upper.x - CENTER.x == pytest.approx(4.0 * u, abs=1e-12)
            assert p.midpoint().as_tuple() == pytest.approx(CENTER.as_tuple(), abs=1e-12)

    def test_slipping_travels_down_together(self):
        spec = spec_for(pat.PatternKind.SLIPPING, amplitude=4.0)
        top = pat.generate_pattern(spec, 0.0)
        bot = pat.generate_pattern(spec, spec.duration)
        assert top.upper == top.lower
        assert top.upper.as_tuple() == pytest.approx((CENTER.x, CENTER.y + 4.0))
        assert bot.upper.as_tuple() == pytest.approx((CENTER.x, CENTER.y - 4.0))
        mid = pat.generate_pattern(spec, spec.duration / 2)
        assert mid.upper.as_tuple() == pytest.approx(CENTER.as_tuple(), abs=1e-12)

    def test_twisting_half_sweep(self):
        # Independent oracle: each tactor rotated sweep/2 = 45 degrees from
        # its start along the radius-3 circle; separation stays 6 mm.
        spec = spec_for(pat.PatternKind.TWISTING, amplitude=3.0,
                        twist_sweep=math.pi / 2)
        p = pat.generate_pattern(spec, spec.duration / 2)
        ang = math.pi / 4
        assert p.upper.as_tuple() == pytest.approx(
            (CENTER.x + 3 * math.cos(ang), CENTER.y + 3 * math.sin(ang)), abs=1e-12)
        assert p.lower.as_tuple() == pytest.approx(
            (CENTER.x - 3 * math.cos(ang), CENTER.y - 3 * math.sin(ang)), abs=1e-12)
        assert p.separation() == pytest.approx(6.0, abs=1e-12)

    def test_twisting_antipodal_throughout(self):
        spec = spec_for(pat.PatternKind.TWISTING, amplitude=3.0)
        for s in pat.sample_pattern(spec, 50):
            assert s.separation() == pytest.approx(6.0, abs=1e-12)
            assert s.midpoint().dist(CENTER) < 1e-12

    def test_out_of_range(self):
        spec = spec_for(pat.PatternKind.STRETCHING)
        with pytest.raises(pat.OutOfRange):
            pat.generate_pattern(spec, -1e-9)
        with pytest.raises(pat.OutOfRange):
            pat.generate_pattern(spec, spec.duration + 1e-9)

    def test_workspace_exceeded(self):
        # semi_x of the index ellipse is 7.5 mm; an 8 mm stretch leaves it.
        spec = spec_for(pat.PatternKind.STRETCHING, amplitude=8.0)
        with pytest.raises(pat.WorkspaceExceeded):
            pat.generate_pattern(spec, spec.duration, ellipse=INDEX.ellipse)
        # within bounds nothing raises
        ok = spec_for(pat.PatternKind.STRETCHING, amplitude=7.0)
        pat.generate_pattern(ok, ok.duration, ellipse=INDEX.ellipse)

    @pytest.mark.parametrize("kind", list(pat.PatternKind))
    @pytest.mark.parametrize("st_name", ["index", "thumb"])
    def test_samples_reachable_by_both_mechanisms(self, kind, st_name):
        cfg = station(st_name)
        spec = pat.default_spec(kind, cfg.ellipse.center)
        for s in pat.sample_pattern(spec, 60, ellipse=cfg.ellipse):
            assert is_reachable(cfg.upper, s.upper)
            assert is_reachable(cfg.lower, s.lower)


class TestSyncTargets:
    def test_zero_angle_reference(self):
        m = pat.SyncMapping(radius=3.0)
        p = pat.object_sync_targets(0.0, m, CENTER)
        assert p.upper.as_tuple() == pytest.approx((CENTER.x, CENTER.y + 3.0), abs=1e-12)
        assert p.lower.as_tuple() == pytest.approx((CENTER.x, CENTER.y - 3.0), abs=1e-12)
        assert not p.clamped

    def test_quarter_turn(self):
        m = pat.SyncMapping(radius=3.0, gain=1.0)
        p = pat.object_sync_targets(math.pi / 2, m, CENTER)
        assert p.upper.as_tuple() == pytest.approx((CENTER.x - 3.0, CENTER.y), abs=1e-12)
        assert p.lower.as_tuple() == pytest.approx((CENTER.x + 3.0, CENTER.y), abs=1e-12)

    def test_antipodal_distance_constant_over_sweep(self):
        m = pat.SyncMapping(radius=3.0)
        for th in np.linspace(0, math.radians(75), 40):
            p = pat.object_sync_targets(float(th), m, CENTER, ellipse=INDEX.ellipse)
            assert p.separation() == pytest.approx(6.0, abs=1e-12)
            assert not p.clamped

    @pytest.mark.parametrize("gain", [1.0, 2.0, 0.5])
    def test_periodicity(self, gain):
        m = pat.SyncMapping(radius=3.0, gain=gain)
        for th in (0.1, 1.0, 2.7):
            a = pat.object_sync_targets(th, m, CENTER)
            b = pat.object_sync_targets(th + math.tau / gain, m, CENTER)
            assert a.upper.dist(b.upper) < 1e-9
            assert a.lower.dist(b.lower) < 1e-9

    def test_clamping_flag_and_boundary(self):
        m = pat.SyncMapping(radius=10.0)  # exceeds the 6 mm minor semi-axis
        p = pat.object_sync_targets(0.0, m, CENTER, ellipse=INDEX.ellipse)
        assert p.clamped
        for q in (p.upper, p.lower):
            assert INDEX.ellipse.level(q) == pytest.approx(1.0, abs=1e-9)

    def test_default_radius_obeys_clamping_guard(self):
        m = pat.SyncMapping()
        for st_name in ("index", "thumb"):
            semi_minor = min(station(st_name).ellipse.semi_x,
                             station(st_name).ellipse.semi_y)
            assert m.radius * abs(m.gain) <= semi_minor


class TestClassifier:
    def test_clean_identity_all_kinds(self):
        for kind in pat.PatternKind:
            spec = pat.default_spec(kind, CENTER)
            traj = pat.sample_pattern(spec, 150)
            assert pat.classify_pattern(traj) is kind

    @given(kind=st.sampled_from(list(pat.PatternKind)),
           amplitude=st.floats(1.5, 5.5),
           duration=st.floats(0.5, 3.0),
           sweep=st.floats(math.pi / 6, 2 * math.pi / 3),
           n=st.integers(10, 200))
    @settings(max_examples=150, deadline=None)
    def test_identity_property(self, kind, amplitude, duration, sweep, n):
        spec = pat.PatternSpec(kind=kind, center=CENTER, amplitude=amplitude,
                               duration=duration, twist_sweep=sweep)
        traj = pat.sample_pattern(spec, n)
        assert pat.classify_pattern(traj) is kind

    def test_constant_trajectory_ambiguous(self):
        p = pat.TactorPair(upper=Point2(5.0, 15.0), lower=Point2(7.0, 15.0))
        with pytest.raises(pat.Ambiguous):
            pat.classify_pattern([p] * 40)

    def test_too_few_samples_rejected(self):
        spec = pat.default_spec(pat.PatternKind.STRETCHING, CENTER)
        traj = pat.sample_pattern(spec, 9)
        with pytest.raises(ValueError):
            pat.classify_pattern(traj)

    @pytest.mark.parametrize("kind", list(pat.PatternKind))
    def test_noise_robustness(self, kind):
        # 0.2 mm iid positional noise on every tactor coordinate; the
        # classifier must stay >= 95% correct over 1000 seeded runs.
        rng = np.random.default_rng(20260819)
        spec = pat.default_spec(kind, CENTER)
        clean = pat.sample_pattern(spec, 150)
        correct = 0
        runs = 1000
        for _ in range(runs):
            noisy = []
            for s in clean:
                dux, duy, dlx, dly = rng.normal(0.0, 0.2, size=4)
                noisy.append(pat.TactorPair(
                    upper=Point2(s.upper.x + dux, s.upper.y + duy),
                    lower=Point2(s.lower.x + dlx, s.lower.y + dly), t=s.t))
            try:
                if pat.classify_pattern(noisy) is kind:
                    correct += 1
            except pat.Ambiguous:
                pass
        assert correct / runs >= 0.95, f"{kind}: {correct}/{runs}"

    def test_features_have_expected_scale(self):
        spec = pat.default_spec(pat.PatternKind.TWISTING, CENTER)
        f = pat.pattern_features(pat.sample_pattern(spec, 100))
        # net rotation 90 deg at mean half-length 3 mm -> pi/2 * 3
        assert f[pat.PatternKind.TWISTING] == pytest.approx(3 * math.pi / 2, rel=1e-6)
        assert f[pat.PatternKind.STRETCHING] == pytest.approx(0.0, abs=1e-9)
        assert f[pat.PatternKind.SLIPPING] == pytest.approx(0.0, abs=1e-9)
