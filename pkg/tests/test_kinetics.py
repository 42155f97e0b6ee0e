"""Point motion under growth: speed law, closed-form advection, sampling."""

import math

import numpy as np
import pytest

from skinmesh.errors import InputError, SingularityError
from skinmesh.kinetics import (
    SurfacePoint,
    advance,
    farthest_point_sample,
    length_scale_bounds,
    project_to_surface,
    reflect_segment,
    sample_surface,
    skin_value,
    skin_value_direct,
    surface_point_from_world,
    velocity,
    velocity_under_cell,
)

SQRT2 = math.sqrt(2.0)


def rk4_world(complex_, cell_index, x0, dt, steps):
    """Integrate the true world-space motion dx/dt = v / sqrt(2)."""

    def f(x):
        return velocity_under_cell(complex_, cell_index, x) / SQRT2

    x = np.array(x0, dtype=float)
    h = dt / steps
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


class TestSpeedLaw:
    def test_speed_times_twice_scale_is_one(self, dumbbell_complex, rng):
        for p in sample_surface(dumbbell_complex, 0.0, rng, per_cell=30):
            v = velocity(dumbbell_complex, p)
            assert np.linalg.norm(v) * 2.0 * p.rho == pytest.approx(1.0, abs=1e-12)

    def test_single_sphere_world_growth_rate(self, unit_ball_complex):
        # radius sqrt((2 + t)/2) grows at 1/(4 r); the frame-magnitude
        # velocity is sqrt(2) times that world rate
        r = math.sqrt(1.0)
        x = np.array([r, 0.0, 0.0])
        v = velocity_under_cell(unit_ball_complex, 0, x)
        world_rate = np.linalg.norm(v) / SQRT2
        assert world_rate == pytest.approx(1.0 / (4.0 * r), abs=1e-14)

    def test_velocity_points_outward_on_growing_sphere(self, unit_ball_complex):
        x = np.array([0.7, 0.3, -0.2])
        v = velocity_under_cell(unit_ball_complex, 0, x)
        assert float(v @ x) > 0.0

    def test_velocity_refuses_apex(self, unit_ball_complex):
        with pytest.raises(SingularityError):
            velocity_under_cell(unit_ball_complex, 0, [0.0, 0.0, 0.0])
        p = SurfacePoint(np.zeros(3), 0, np.zeros(3), 0.0)
        with pytest.raises(SingularityError):
            velocity(unit_ball_complex, p)


class TestAdvance:
    def test_single_sphere_radius_law_is_exact(self, unit_ball_complex):
        start = project_to_surface(unit_ball_complex, [1.1, 0.2, 0.1], 0.0)
        for dt in (0.05, 0.8, 3.0):
            end = advance(unit_ball_complex, start, dt)
            assert np.linalg.norm(end.world) == pytest.approx(
                math.sqrt((2.0 + dt) / 2.0), abs=1e-14
            )
            # purely radial motion
            cos = float(end.world @ start.world) / (
                np.linalg.norm(end.world) * np.linalg.norm(start.world)
            )
            assert cos == pytest.approx(1.0, abs=1e-14)

    def test_zero_step_is_identity(self, unit_ball_complex):
        start = project_to_surface(unit_ball_complex, [0.9, 0.1, 0.4], 0.0)
        end = advance(unit_ball_complex, start, 0.0)
        np.testing.assert_allclose(end.world, start.world, atol=0.0)
        assert end.t == start.t

    def test_negative_step_rejected(self, unit_ball_complex):
        start = project_to_surface(unit_ball_complex, [1.0, 0.0, 0.0], 0.0)
        with pytest.raises(InputError):
            advance(unit_ball_complex, start, -0.1)

    def test_matches_rk4_on_hyperboloid_patch(self, dumbbell_complex):
        start = project_to_surface(dumbbell_complex, [0.0, 1.0, 0.0], 0.0)
        assert dumbbell_complex.cells[start.cell_index].dim == 1
        dt = 0.05
        end = advance(dumbbell_complex, start, dt)
        oracle = rk4_world(dumbbell_complex, start.cell_index, start.world, dt, 2000)
        np.testing.assert_allclose(end.world, oracle, atol=1e-10)
        assert end.t == pytest.approx(dt)

    def test_matches_rk4_on_sphere_patch(self, dumbbell_complex):
        start = project_to_surface(dumbbell_complex, [2.0, 0.1, 0.0], 0.0)
        assert dumbbell_complex.cells[start.cell_index].dim == 0
        dt = 0.08
        end = advance(dumbbell_complex, start, dt)
        oracle = rk4_world(dumbbell_complex, start.cell_index, start.world, dt, 2000)
        np.testing.assert_allclose(end.world, oracle, atol=1e-10)

    def test_shrinking_patch_scale_ratio_is_exact(self, patch_complex):
        """After (2 theta - theta^2) rho0^2 of growth a shrinking sphere
        patch has its scale reduced by exactly 1 - theta."""
        complex_, cell = patch_complex
        assert cell.frame.orientation < 0 and cell.frame.axis_sign > 0
        rng = np.random.default_rng(5)
        from skinmesh.kinetics import sample_patch

        start = sample_patch(complex_, cell, 0.0, 1, rng)[0]
        theta = 0.2
        dt = (2.0 * theta - theta * theta) * start.rho**2
        end = advance(complex_, start, dt)
        assert end.rho / start.rho == pytest.approx(1.0 - theta, abs=1e-13)

    def test_apex_passage_refused(self, patch_complex):
        complex_, cell = patch_complex
        rng = np.random.default_rng(6)
        from skinmesh.kinetics import sample_patch

        start = sample_patch(complex_, cell, 0.0, 1, rng)[0]
        # the patch's sphere radius hits zero at rho0^2 of elapsed growth
        with pytest.raises(SingularityError):
            advance(complex_, start, 2.0 * start.rho**2)


class TestTrajectory:
    def test_recorded_endpoints_and_scale_window(self, dumbbell_complex):
        start = project_to_surface(dumbbell_complex, [0.0, 0.9, 0.3], 0.0)
        theta = 0.3
        dt = (2.0 * theta - theta * theta) * start.rho**2
        end, traj = advance(dumbbell_complex, start, dt, record=True)
        np.testing.assert_allclose(traj.positions(0.0), start.world, atol=1e-12)
        np.testing.assert_allclose(traj.positions(dt), end.world, atol=1e-12)
        lo, hi = length_scale_bounds(start.rho, theta)
        rhos = traj.rhos(np.linspace(0.0, dt, 200))
        assert (rhos > lo - 1e-12).all() and (rhos < hi + 1e-12).all()

    def test_positions_are_continuous(self, dumbbell_complex):
        start = project_to_surface(dumbbell_complex, [0.4, 0.8, 0.0], 0.0)
        end, traj = advance(dumbbell_complex, start, 1.2, record=True)
        ts = np.linspace(traj.t_start, traj.t_end, 600)
        pts = traj.positions(ts)
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        rho_min = traj.rhos(ts).min()
        # max world speed is 1 / (2 sqrt(2) rho)
        bound = (ts[1] - ts[0]) / (2.0 * SQRT2 * rho_min)
        assert steps.max() <= 2.0 * bound

    def test_speed_integral_matches_quadrature(self, dumbbell_complex):
        start = project_to_surface(dumbbell_complex, [0.0, 1.0, 0.0], 0.0)
        end, traj = advance(dumbbell_complex, start, 0.6, record=True)
        ts = np.linspace(traj.t_start, traj.t_end, 20001)
        rhos = traj.rhos(ts)
        numeric = np.trapezoid(1.0 / (2.0 * rhos**2), ts)
        assert traj.speed_integral() == pytest.approx(numeric, rel=1e-6)

    def test_time_outside_recording_rejected(self, dumbbell_complex):
        start = project_to_surface(dumbbell_complex, [0.0, 1.0, 0.0], 0.0)
        _, traj = advance(dumbbell_complex, start, 0.1, record=True)
        with pytest.raises(InputError):
            traj.positions(0.2)


class TestProjection:
    def test_projected_points_lie_on_surface(self, dumbbell_complex, rng):
        for _ in range(20):
            x = rng.uniform(-1.5, 1.5, size=3)
            t = rng.uniform(-0.2, 0.5)
            try:
                p = project_to_surface(dumbbell_complex, x, t)
            except Exception:
                continue
            assert skin_value(dumbbell_complex, p.world) == pytest.approx(t, abs=1e-10)
            assert p.rho == pytest.approx(np.linalg.norm(p.xi))

    def test_wrap_rejects_off_surface_point(self, unit_ball_complex):
        with pytest.raises(InputError):
            surface_point_from_world(unit_ball_complex, [0.5, 0.0, 0.0], 0.0)
        p = surface_point_from_world(
            unit_ball_complex, [0.5, 0.0, 0.0], 0.0, check=False
        )
        assert p.cell_index == 0


def test_frame_form_matches_direct_envelope(dumbbell_complex, rng):
    """The per-cell quadric equals the minimum over the sphere family."""
    spheres = dumbbell_complex.spheres
    for _ in range(60):
        x = rng.uniform(-1.8, 1.8, size=3)
        try:
            cell = dumbbell_complex.locate(x)
        except Exception:
            continue
        direct = skin_value_direct(spheres, cell.simplex, x)
        assert cell.frame.value(x) == pytest.approx(direct, abs=1e-9)


class TestReflection:
    def test_same_cell_segment_folds_to_itself(self, dumbbell_complex):
        u = np.array([0.0, 1.0, 0.0])
        v = np.array([0.05, 1.02, 0.01])
        path = reflect_segment(dumbbell_complex, u, v)
        assert path.crossings == ()
        np.testing.assert_allclose(path.image, v, atol=1e-12)

    def test_folded_length_preserved_and_image_no_farther(self, dumbbell_complex, rng):
        points = sample_surface(dumbbell_complex, 0.0, rng, per_cell=25)
        folded = 0
        for u, v in zip(points[:-1], points[1:]):
            try:
                path = reflect_segment(dumbbell_complex, u.world, v.world)
            except Exception:
                continue
            chord = np.linalg.norm(v.world - u.world)
            assert path.path_length() == pytest.approx(chord, rel=1e-9)
            assert np.linalg.norm(path.image - u.world) <= chord + 1e-9
            folded += len(path.crossings) > 0
        assert folded > 0, "no cross-cell pair sampled"


class TestSampling:
    def test_samples_lie_on_surface_in_their_cell(self, dumbbell_complex, rng):
        pts = sample_surface(dumbbell_complex, 0.2, rng, per_cell=20)
        assert len(pts) > 0
        for p in pts:
            cell = dumbbell_complex.cells[p.cell_index]
            assert cell.frame.value(p.world) == pytest.approx(0.2, abs=1e-9)
            assert cell.contains(p.world, tol=1e-9)

    def test_farthest_point_sample_covers_and_separates(self, unit_ball_complex, rng):
        pts = sample_surface(unit_ball_complex, 0.0, rng, per_cell=300)
        spacing = 0.4
        picks = farthest_point_sample(pts, spacing, rng)
        coords = np.array([p.world for p in pts])
        chosen = np.array([p.world for p in picks])
        dists = np.linalg.norm(coords[:, None, :] - chosen[None, :, :], axis=2)
        rhos = np.array([p.rho for p in pts])
        assert (dists.min(axis=1) <= spacing * rhos + 1e-12).all()
        # later picks keep their distance from all earlier ones
        for j in range(1, len(picks)):
            d = np.linalg.norm(chosen[:j] - chosen[j], axis=1)
            assert d.min() > spacing * picks[j].rho - 1e-12

    def test_empty_candidate_list(self, rng):
        assert farthest_point_sample([], 0.5, rng) == []


def test_length_scale_bounds_validation():
    lo, hi = length_scale_bounds(2.0, 0.25)
    assert (lo, hi) == (1.5, 2.5)
    with pytest.raises(InputError):
        length_scale_bounds(2.0, 1.5)
    with pytest.raises(InputError):
        length_scale_bounds(-1.0, 0.5)
