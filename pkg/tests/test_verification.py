"""Randomized audit reports: each must self-validate on small budgets."""

import math

import numpy as np
import pytest

from skinmesh.kinetics import sample_patch, velocity_under_cell
from skinmesh.verification import (
    LENGTH_TOL,
    REPORTERS,
    SPEED_TOL,
    _triangle_height,
    height_report,
    length_report,
    reflection_report,
    scheduler_safety_report,
    shrinking_patch_fixture,
    speed_report,
)


def test_reporters_registry_names():
    assert set(REPORTERS) == {"speed", "length-lemma", "height-lemma", "reflection"}


class TestSpeedReport:
    def test_passes_across_patch_kinds(self):
        report = speed_report(trials=120, seed=2)
        assert report["passed"] is True
        assert report["trials"] == 120
        assert report["max_deviation"] < SPEED_TOL
        assert report["violations"] == []
        kinds = report["patch_counts"]
        assert kinds.get("sphere", 0) > 0
        assert kinds.get("hyperboloid_one_sheet", 0) + kinds.get(
            "hyperboloid_two_sheet", 0
        ) > 0


class TestLengthReport:
    def test_ratio_window_holds_with_tight_radial_extremes(self):
        report = length_report(trials=60, seed=3)
        assert report["passed"] is True
        assert report["violations"] == []
        assert report["min_margin"] >= 0.0
        assert report["cross_cell_pairs"] > 0
        # the shrinking-patch construction attains the lower edge of the
        # window, so the tightness gap is at the numerics floor
        assert report["radial_tightness_gap"] < LENGTH_TOL
        assert report["tolerance"] == LENGTH_TOL


class TestHeightReport:
    def test_report_is_internally_consistent(self):
        report = height_report(trials=30, seed=3)
        assert report["trials"] == 30
        assert report["cross_cell_triples"] > 0
        # the shrinking-patch triple attains the lower window edge exactly
        assert report["radial_tightness_gap"] < LENGTH_TOL
        assert report["passed"] is (
            not report["violations"]
            and report["radial_tightness_gap"] <= LENGTH_TOL
        )

    def test_heights_escape_the_pair_window_at_scale(self):
        """Pair distances obey their window; triangle heights do not.

        A triangle can slide toward collinearity while every chord stays
        inside its own bounds, so a large enough random sample always
        produces height ratios outside [1-theta, 1/(1-theta)] and the
        report must surface them as replayable violations."""
        report = height_report(trials=60, seed=1)
        assert report["passed"] is False
        assert report["min_margin"] < -LENGTH_TOL
        assert report["violations"]
        for violation in report["violations"]:
            lo = 1.0 - violation["theta"]
            hi = 1.0 / (1.0 - violation["theta"])
            outside_window = (
                violation["height_ratio"] < lo - LENGTH_TOL
                or violation["height_ratio"] > hi + LENGTH_TOL
            )
            radius_bound = 1.0 / (1.0 - violation["theta"]) ** 3
            assert outside_window or violation["radius_ratio"] >= radius_bound
            assert len(violation["spheres"]) >= 2
            assert len(violation["points"]) == 3

    def test_collapsing_triple_confirmed_by_independent_integrator(self):
        """A replayable counterexample to the height window.

        Searching random surface triples finds one whose height ratio
        leaves [1-theta, 1/(1-theta)] even though all pairwise distances
        stay inside their bounds, and an independent RK4 integration of
        the true motion confirms the advected positions."""
        from skinmesh.verification import (
            _advance_safely,
            _distinct_sample,
            _pool,
            _random_complex,
        )
        from skinmesh.kinetics import skin_value

        rng = np.random.default_rng(0)
        found = None
        for _ in range(40):
            complex_, _spheres = _random_complex(rng)
            pool = _pool(complex_, rng)
            for _ in range(40):
                triple = _distinct_sample(rng, pool, 3, min_distance=1e-3)
                if triple is None:
                    break
                pts = [p.world for p in triple]
                h0 = _triangle_height(*pts)
                diam = max(
                    np.linalg.norm(pts[i] - pts[j])
                    for i in range(3)
                    for j in range(i + 1, 3)
                )
                if h0 < 1e-6 * diam:
                    continue
                theta = float(rng.uniform(0.02, 0.6))
                rho0 = min(p.rho for p in triple)
                dt = (2.0 * theta - theta * theta) * rho0 * rho0
                moved = _advance_safely(complex_, triple, dt)
                if moved is None:
                    continue
                h1 = _triangle_height(*(p.world for p in moved))
                lo, hi = 1.0 - theta, 1.0 / (1.0 - theta)
                if h1 / h0 > hi + 1e-3 or h1 / h0 < lo - 1e-3:
                    found = (complex_, triple, moved, theta, dt)
                    break
            if found:
                break
        assert found is not None, "no height-window violation found"

        complex_, triple, moved, theta, dt = found
        # every chord still sits inside the pair window
        lo, hi = 1.0 - theta, 1.0 / (1.0 - theta)
        for i in range(3):
            for j in range(i + 1, 3):
                d0 = float(np.linalg.norm(triple[i].world - triple[j].world))
                d1 = float(np.linalg.norm(moved[i].world - moved[j].world))
                assert lo - LENGTH_TOL <= d1 / d0 <= hi + LENGTH_TOL
        # confirm with an independent integrator of dx/dt = v / sqrt(2)
        for p, end in zip(triple, moved):
            x = p.world.copy()
            h = dt / 400

            def field(x):
                cell = complex_.locate(x)
                return velocity_under_cell(complex_, cell.index, x) / math.sqrt(2.0)

            for _ in range(400):
                k1 = field(x)
                k2 = field(x + 0.5 * h * k1)
                k3 = field(x + 0.5 * h * k2)
                k4 = field(x + h * k3)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            np.testing.assert_allclose(x, end.world, atol=1e-9)
            assert abs(skin_value(complex_, x) - (p.t + dt)) < 1e-9


class TestReflectionReport:
    def test_folding_preserves_length_and_velocity(self):
        report = reflection_report(trials=40, seed=4)
        assert report["passed"] is True
        assert report["crossings_seen"] > 0
        assert report["max_length_error"] <= report["tolerance"]
        assert report["contraction_failures"] == 0


class TestSchedulerSafety:
    def test_small_budget_run_is_clean(self):
        report = scheduler_safety_report(windows=3, seed=7, samples_per_interval=120)
        assert report["passed"] is True
        assert report["unacceptable_samples"] == 0
        assert report["checks"] > 0
        assert report["false_positives"] > 0
        assert report["intervals_audited"] >= report["checks"]
        assert len(report["windows_detail"]) == 3
        for window in report["windows_detail"]:
            assert window["unacceptable_samples"] == 0

    def test_report_is_deterministic_for_a_seed(self):
        a = scheduler_safety_report(windows=2, seed=11, samples_per_interval=60)
        b = scheduler_safety_report(windows=2, seed=11, samples_per_interval=60)
        assert a == b


class TestShrinkingPatchFixture:
    def test_central_patch_shrinks_toward_its_apex(self):
        complex_, cell = shrinking_patch_fixture(offset=0.1)
        frame = cell.frame
        assert frame.orientation < 0
        assert frame.axis_sign > 0
        assert frame.rhs(0.0) == pytest.approx(0.1)
        assert frame.rhs(0.1) == pytest.approx(0.0)  # apex time = offset
        np.testing.assert_allclose(frame.translation, 0.0, atol=1e-12)

    def test_patch_points_move_inward(self):
        complex_, cell = shrinking_patch_fixture(offset=0.1)
        rng = np.random.default_rng(1)
        p = sample_patch(complex_, cell, 0.0, 1, rng)[0]
        v = velocity_under_cell(complex_, cell.index, p.world)
        assert float(v @ (p.world - cell.frame.translation)) < 0.0
