"""Shared fixtures: small sphere sets and their mixed complexes."""

import numpy as np
import pytest

from skinmesh.mixed_complex import build_mixed_complex
from skinmesh.params import ParameterSet
from skinmesh.spheres import WeightedSphere
from skinmesh.verification import shrinking_patch_fixture


@pytest.fixture(scope="session")
def unit_ball_complex():
    """One sphere of weight 2: the surface at t=0 is the unit sphere."""
    return build_mixed_complex([WeightedSphere(np.zeros(3), 2.0)])


@pytest.fixture(scope="session")
def dumbbell_complex():
    """Two overlapping spheres with a hyperboloid neck between them."""
    spheres = [
        WeightedSphere(np.array([-0.8, 0.0, 0.0]), 1.5),
        WeightedSphere(np.array([0.8, 0.0, 0.0]), 1.5),
    ]
    return build_mixed_complex(spheres)


@pytest.fixture(scope="session")
def patch_complex():
    """Four-sphere complex with a bounded shrinking sphere patch.

    Returns (complex, cell) where the cell holds the dim-3 patch whose
    points all flow toward a common apex.
    """
    return shrinking_patch_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_params():
    return ParameterSet()
