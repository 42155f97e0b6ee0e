"""Weighted spheres and their distance functions.

A weighted sphere is a center z with a weight w that plays the role of a
squared radius; w may be negative, in which case the sphere has imaginary
radius but its power distance is still perfectly usable.  Growth over time
is modeled by raising every weight by the same amount t, so a sphere's
weight at time t is w + t and t carries units of length squared.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class WeightedSphere:
    """Center plus weight (squared radius, possibly negative)."""

    center: np.ndarray
    weight: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.shape != (3,):
            raise InputError(f"sphere center must be a 3-vector, got shape {center.shape}")
        if not np.all(np.isfinite(center)) or not np.isfinite(self.weight):
            raise InputError("sphere center and weight must be finite")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "weight", float(self.weight))

    def at_time(self, t: float) -> "WeightedSphere":
        """The same sphere grown to time t (weight raised by t)."""
        return WeightedSphere(self.center, self.weight + t)

    def lifted(self) -> float:
        """Height ||z||^2 - w of the center on the standard paraboloid."""
        return float(self.center @ self.center) - self.weight


def weighted_distance(sphere: WeightedSphere, x) -> float:
    """Power distance ||x - z||^2 - w from point x to the sphere.

    Zero exactly on the sphere, negative inside, positive outside.
    """
    x = np.asarray(x, dtype=float)
    d = x - sphere.center
    return float(d @ d) - sphere.weight


def convex_combination(spheres, gammas) -> WeightedSphere:
    """Sphere whose distance function is the convex combination of the inputs.

    With coefficients gamma_i >= 0 summing to one, the combination has
    center sum(gamma_i z_i) and the weight that makes its power distance
    equal sum(gamma_i f_i) everywhere.

    Parameters
    ----------
    spheres : sequence of WeightedSphere
    gammas : sequence of float
        Same length as ``spheres``, nonnegative, summing to one.

    Returns
    -------
    WeightedSphere
    """
    gammas = np.asarray(gammas, dtype=float)
    if len(spheres) != gammas.shape[0]:
        raise InputError("one coefficient per sphere required")
    if np.any(gammas < -1e-12) or abs(gammas.sum() - 1.0) > 1e-9:
        raise InputError("coefficients must be nonnegative and sum to one")
    centers = np.array([s.center for s in spheres])
    center = gammas @ centers
    # ||z||^2 - w must interpolate affinely for the distance functions to add up.
    lifted = float(gammas @ np.array([s.lifted() for s in spheres]))
    weight = float(center @ center) - lifted
    return WeightedSphere(center, weight)


_COMMENT = re.compile(r"#.*$")


def parse_spheres(text: str) -> list[WeightedSphere]:
    """Parse sphere-list text: one ``x y z w`` line per sphere, # comments."""
    spheres = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT.sub("", raw).strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise InputError(f"line {lineno}: expected 4 numbers, got {len(parts)}: {raw!r}")
        try:
            x, y, z, w = (float(p) for p in parts)
        except ValueError:
            raise InputError(f"line {lineno}: could not parse numbers: {raw!r}") from None
        spheres.append(WeightedSphere(np.array([x, y, z]), w))
    return spheres


def load_spheres(path) -> list[WeightedSphere]:
    """Read a .spheres file (see parse_spheres for the format)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read sphere file {path}: {exc}") from exc
    spheres = parse_spheres(text)
    if not spheres:
        raise InputError(f"sphere file {path} contains no spheres")
    return spheres
