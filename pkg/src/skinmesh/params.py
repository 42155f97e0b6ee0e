"""Parameter bundle shared by the scheduler, the mesher, and the driver."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import InputError
from .feasibility import epsilon_max, feasible_on_range

# Defaults keep the conditions comfortably satisfied across [Q0, Q1].
DEFAULT_C = 0.06
DEFAULT_Q0 = 1.6
DEFAULT_Q1 = 2.3
DEFAULT_SIGMA = 0.9
DEFAULT_H = 0.993
DEFAULT_ELL = 6
DEFAULT_M = 80


@dataclass(frozen=True)
class ParameterSet:
    """Size constant, quality window, density bound, and safety knobs.

    ``c`` scales all element-size thresholds.  ``q0 <= q1`` bound the mesh
    quality: fresh elements are held to q0, and q1 marks the point past
    which an element must never be observed.  ``eps`` is the surface
    sampling density bound (defaults to the largest feasible value).
    ``sigma`` in (0, 1] shortens every scheduled interval as a safety
    margin.  ``h``, ``ell`` and ``m`` govern restructuring-size checks and
    are passed through to user-supplied validators.
    """

    c: float = DEFAULT_C
    q0: float = DEFAULT_Q0
    q1: float = DEFAULT_Q1
    eps: float = field(default=-1.0)  # sentinel: resolved to epsilon_max()
    sigma: float = DEFAULT_SIGMA
    h: float = DEFAULT_H
    ell: int = DEFAULT_ELL
    m: int = DEFAULT_M

    def __post_init__(self):
        if self.eps == -1.0:
            object.__setattr__(self, "eps", epsilon_max())
        if self.c <= 0.0:
            raise InputError("C must be positive")
        if not (0.0 < self.q0 <= self.q1):
            raise InputError("need 0 < Q0 <= Q1")
        if not (0.0 < self.eps < 1.0):
            raise InputError("eps must lie in (0, 1)")
        if not (0.0 < self.sigma <= 1.0):
            raise InputError("sigma must lie in (0, 1]")

    def with_updates(self, **kwargs) -> "ParameterSet":
        return replace(self, **kwargs)

    def is_feasible(self, samples: int = 128) -> bool:
        """Conditions hold on a grid spanning the whole quality window."""
        return feasible_on_range(self.eps, self.c, self.q0, self.q1, samples)

    # Classification thresholds.  Edge ratios live above c/q, triangle
    # ratios below c*q, with the band between the q0 and q1 thresholds
    # acting as the early-warning buffer.
    @property
    def edge_floor_strict(self) -> float:
        return self.c / self.q0

    @property
    def edge_floor_hard(self) -> float:
        return self.c / self.q1

    @property
    def triangle_ceiling_strict(self) -> float:
        return self.c * self.q0

    @property
    def triangle_ceiling_hard(self) -> float:
        return self.c * self.q1
