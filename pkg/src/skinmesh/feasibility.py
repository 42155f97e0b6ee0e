"""Feasibility conditions for the scheduling parameters.

The quality machinery only works when the sampling density bound epsilon,
the size constant C, and the quality bound Q satisfy a handful of closed
inequalities.  This module evaluates them, finds the largest usable
epsilon, and rasterizes the feasible region of the (C, Q) plane.

Two further conditions constrain element sizes produced by restructuring
operations.  Their derivations live outside this package; they are exposed
as direct numeric checks on caller-supplied sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError

# Largest epsilon considered when bracketing the density-bound root.
_EPS_BRACKET = (0.1, 0.4)


def _density_margin(eps: float) -> float:
    """Margin function whose positive root is the largest usable epsilon."""
    s = 2.0 * eps / (1.0 - eps)
    if abs(s) > 1.0:
        # arcsin argument out of range: far beyond feasibility.
        return -float("inf")
    return 2.0 * math.cos(math.asin(s) + math.asin(eps)) - s


def epsilon_max(tol: float = 1e-12) -> float:
    """Largest sampling-density bound epsilon for which the margin is nonnegative.

    Found by bisection on a fixed bracket; raises if the bracket does not
    straddle the root (which would mean the margin function changed).
    """
    lo, hi = _EPS_BRACKET
    flo, fhi = _density_margin(lo), _density_margin(hi)
    if not (flo > 0.0 > fhi):
        raise NumericError(
            f"density margin does not change sign on [{lo}, {hi}]: f({lo})={flo}, f({hi})={fhi}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _density_margin(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shrinkage_margin(eps: float, c: float, q: float) -> float:
    """Margin delta available after accounting for mesh-size interference.

    delta = eps - 2C(eps + 1)/(Q + 2C).  Must be positive for the point
    membership condition below to have any chance.
    """
    if q + 2.0 * c <= 0.0:
        raise InputError("Q + 2C must be positive")
    return eps - 2.0 * c * (eps + 1.0) / (q + 2.0 * c)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the closed-form feasibility conditions at one (eps, C, Q)."""

    eps: float
    c: float
    q: float
    delta: float
    density_ok: bool      # 0 < eps <= largest usable epsilon
    separation_ok: bool   # Q^2 - 4CQ > 2
    membership_ok: bool   # delta^2/(1+delta^2) - delta^2/4 > C^2 Q^2

    @property
    def feasible(self) -> bool:
        return self.density_ok and self.separation_ok and self.membership_ok


def check_conditions(eps: float, c: float, q: float, eps_max: float | None = None) -> ConditionReport:
    """Evaluate the three closed-form conditions at one parameter point."""
    if c <= 0.0 or q <= 0.0:
        raise InputError("C and Q must be positive")
    if eps_max is None:
        eps_max = epsilon_max()
    density_ok = 0.0 < eps <= eps_max + 1e-15
    separation_ok = q * q - 4.0 * c * q > 2.0
    delta = shrinkage_margin(eps, c, q)
    d2 = delta * delta
    membership_ok = delta > 0.0 and d2 / (1.0 + d2) - d2 / 4.0 > c * c * q * q
    return ConditionReport(eps, c, q, delta, density_ok, separation_ok, membership_ok)


def feasible_on_range(eps: float, c: float, q_lo: float, q_hi: float, samples: int = 128) -> bool:
    """True if the conditions hold across a Q grid spanning [q_lo, q_hi]."""
    if q_lo > q_hi:
        raise InputError("empty Q range")
    eps_max = epsilon_max()
    qs = np.linspace(q_lo, q_hi, samples)
    return all(check_conditions(eps, c, float(q), eps_max).feasible for q in qs)


def check_restructuring_sizes(
    c: float,
    q: float,
    h: float,
    edge_ratios=(),
    triangle_ratios=(),
) -> bool:
    """Check caller-supplied post-restructuring sizes against their bounds.

    ``edge_ratios`` holds R/rho values of edges created by restructuring;
    each must exceed C/Q.  ``triangle_ratios`` holds R/rho values of created
    triangles; each must stay below min(Q, 2/Q) * C * h.  The constant h is
    the caller's safety factor, slightly below one.
    """
    if not (0.0 < h <= 1.0):
        raise InputError("h must lie in (0, 1]")
    edge_floor = c / q
    tri_ceiling = min(q, 2.0 / q) * c * h
    edges_ok = all(r > edge_floor for r in edge_ratios)
    tris_ok = all(r < tri_ceiling for r in triangle_ratios)
    return edges_ok and tris_ok


def rasterize_region(
    c_range: tuple[float, float],
    q_range: tuple[float, float],
    resolution: tuple[int, int],
    eps: float,
) -> list[tuple[float, float, bool]]:
    """Evaluate the feasible region on a (C, Q) grid.

    Returns one (c, q, feasible) row per grid cell, C varying fastest,
    suitable for writing straight to CSV.
    """
    (c_lo, c_hi), (q_lo, q_hi) = c_range, q_range
    nc, nq = resolution
    if nc < 1 or nq < 1:
        raise InputError("resolution must be at least 1x1")
    if c_lo <= 0.0 or q_lo <= 0.0:
        raise InputError("C and Q ranges must be positive")
    eps_max = epsilon_max()
    rows = []
    for q in np.linspace(q_lo, q_hi, nq):
        for c in np.linspace(c_lo, c_hi, nc):
            report = check_conditions(eps, float(c), float(q), eps_max)
            rows.append((float(c), float(q), report.feasible))
    return rows
