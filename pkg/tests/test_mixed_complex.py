"""Piecewise-quadric cells: frames, point location, and gluing continuity."""

import numpy as np
import pytest

from skinmesh.errors import DomainError, InputError, NumericError
from skinmesh.mixed_complex import (
    ONE_SHEET,
    SPHERE,
    TWO_SHEET,
    StandardFrame,
    build_mixed_complex,
)
from skinmesh.spheres import WeightedSphere


class TestStandardFrame:
    def make(self, signs, offset=-1.0):
        return StandardFrame(
            rotation=np.eye(3), translation=np.zeros(3), signs=signs, offset=offset
        )

    def test_world_frame_round_trip(self, rng):
        theta = 0.7
        rot = np.array(
            [
                [np.cos(theta), -np.sin(theta), 0.0],
                [np.sin(theta), np.cos(theta), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        frame = StandardFrame(rot, np.array([0.3, -0.2, 1.1]), (1, 1, -1), 0.5)
        x = rng.normal(size=(10, 3))
        np.testing.assert_allclose(frame.to_world(frame.to_frame(x)), x, atol=1e-12)

    def test_frame_coordinates_scale_lengths_by_sqrt2(self):
        frame = self.make((1, 1, 1))
        xi = frame.to_frame([1.0, 0.0, 0.0])
        assert np.linalg.norm(xi) == pytest.approx(np.sqrt(2.0))

    def test_rejects_skewed_rotation(self):
        with pytest.raises(NumericError):
            StandardFrame(np.eye(3) + 0.01, np.zeros(3), (1, 1, 1), 0.0)

    def test_rejects_reflection(self):
        flip = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(NumericError):
            StandardFrame(flip, np.zeros(3), (1, 1, 1), 0.0)

    def test_patch_kind_from_signature_and_level(self):
        assert self.make((1, 1, 1)).patch_kind(0.0) == SPHERE
        assert self.make((-1, -1, -1), offset=1.0).patch_kind(0.0) == SPHERE
        growing_neck = self.make((1, 1, -1), offset=-1.0)
        assert growing_neck.patch_kind(0.0) == ONE_SHEET
        assert growing_neck.rhs(0.0) == pytest.approx(1.0)
        pinched = self.make((1, 1, -1), offset=1.0)
        assert pinched.patch_kind(0.0) == TWO_SHEET

    def test_orientation_flips_rhs(self):
        shrinking = self.make((-1, -1, 1), offset=0.5)
        assert shrinking.orientation == -1
        assert shrinking.axis_sign == -1
        assert shrinking.rhs(0.0) == pytest.approx(0.5)

    def test_gradient_matches_central_differences(self, rng):
        frame = StandardFrame(np.eye(3), np.array([0.2, 0.0, -0.1]), (1, 1, -1), -0.3)
        h = 1e-6
        for x in rng.normal(size=(5, 3)):
            grad = frame.gradient_world(x)
            fd = np.zeros(3)
            for axis in range(3):
                e = np.zeros(3)
                e[axis] = h
                fd[axis] = (frame.value(x + e) - frame.value(x - e)) / (2.0 * h)
            np.testing.assert_allclose(grad, fd, atol=1e-6)


class TestSingleSphere:
    def test_one_cell_covering_the_ball_region(self, unit_ball_complex):
        assert len(unit_ball_complex) == 1
        cell = unit_ball_complex.locate([0.0, 0.0, 0.0])
        assert cell.dim == 0
        assert cell.patch_kind_at_reference == SPHERE

    def test_value_is_scaled_power_distance(self, unit_ball_complex, rng):
        # one sphere, weight 2: g(x) = 2 |x - c|^2 - w
        for x in rng.uniform(-1.0, 1.0, size=(20, 3)):
            expected = 2.0 * float(x @ x) - 2.0
            assert unit_ball_complex.locate(x).frame.value(x) == pytest.approx(expected, abs=1e-12)

    def test_surface_radius_law(self, unit_ball_complex):
        for t in (0.0, 0.3, 1.7):
            radius = np.sqrt((2.0 + t) / 2.0)
            x = radius * np.array([1.0, 0.0, 0.0])
            value = unit_ball_complex.values_at([x])[0]
            assert value == pytest.approx(t, abs=1e-12)


class TestDumbbell:
    def test_cell_census(self, dumbbell_complex):
        assert len(dumbbell_complex.cells_of_dim(0)) == 2
        assert len(dumbbell_complex.cells_of_dim(1)) == 1
        assert len(dumbbell_complex) == 3

    def test_vertex_cells_are_sphere_patches(self, dumbbell_complex):
        kinds = {c.patch_kind_at_reference for c in dumbbell_complex.cells_of_dim(0)}
        assert kinds == {SPHERE}
        neck = dumbbell_complex.cells_of_dim(1)[0]
        assert neck.patch_kind_at_reference in {ONE_SHEET, TWO_SHEET}
        assert neck.patch_kind_at_reference == neck.frame.patch_kind(0.0)

    def test_value_is_continuous_across_shared_faces(self, dumbbell_complex, rng):
        """Adjacent cells must assign (nearly) equal g on a common face."""

        def interior(cell):
            mix = rng.dirichlet(np.ones(len(cell.vertices)))
            return mix @ cell.vertices

        neck = dumbbell_complex.cells_of_dim(1)[0]
        checked = 0
        for cap in dumbbell_complex.cells_of_dim(0):
            for _ in range(10):
                a, b = interior(cap), interior(neck)
                for _ in range(80):  # walk onto the cap's boundary
                    mid = 0.5 * (a + b)
                    if cap.margin(mid) <= 0.0:
                        a = mid
                    else:
                        b = mid
                x = 0.5 * (a + b)
                if neck.margin(x) > 1e-9:
                    continue  # left the complex through another face
                assert cap.frame.value(x) == pytest.approx(
                    neck.frame.value(x), abs=1e-8
                )
                checked += 1
        assert checked >= 10

    def test_locate_ties_break_to_lowest_index(self, dumbbell_complex, rng):
        for x in rng.uniform(-1.5, 1.5, size=(50, 3)):
            try:
                cell = dumbbell_complex.locate(x)
            except DomainError:
                continue
            holders = [c.index for c in dumbbell_complex.cells if c.contains(x)]
            assert cell.index == min(holders)

    def test_values_at_agrees_with_scalar_locate(self, dumbbell_complex, rng):
        points = rng.uniform(-3.0, 3.0, size=(200, 3))
        batch = dumbbell_complex.values_at(points)
        for x, v in zip(points, batch):
            try:
                expected = dumbbell_complex.locate(x).frame.value(x)
            except DomainError:
                assert np.isinf(v)
                continue
            assert v == pytest.approx(expected, abs=1e-12)

    def test_point_outside_every_cell_raises(self, dumbbell_complex):
        with pytest.raises(DomainError):
            dumbbell_complex.locate([500.0, 0.0, 0.0])

    def test_grown_spheres_add_time_to_weights(self, dumbbell_complex):
        grown = dumbbell_complex.grown_spheres(0.25)
        assert all(g.weight == pytest.approx(1.75) for g in grown)


def test_translation_symmetry(rng):
    shift = np.array([3.0, -1.0, 2.0])
    base = [
        WeightedSphere([-0.8, 0.0, 0.0], 1.5),
        WeightedSphere([0.8, 0.0, 0.0], 1.5),
    ]
    moved = [WeightedSphere(s.center + shift, s.weight) for s in base]
    original = build_mixed_complex(base)
    translated = build_mixed_complex(moved)
    points = rng.uniform(-2.0, 2.0, size=(100, 3))
    np.testing.assert_allclose(
        original.values_at(points),
        translated.values_at(points + shift),
        atol=1e-9,
    )


def test_empty_input_rejected():
    with pytest.raises(InputError):
        build_mixed_complex([])
