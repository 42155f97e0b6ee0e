"""Relaxed scheduling of element size checks.

Every mesh element is classified by its size ratio R/rho, where R is the
element's world-space size (half-length for edges, circumradius for
triangles) and rho is its governing length scale.  Between the strict
quality bound Q0 and the hard bound Q1 lies a buffer: an element seen
inside the buffer is restructured immediately, and an element must never
be seen past the buffer.  For an acceptable element, a closed-form bound
on how fast the geometry can deform yields a guaranteed-safe interval, so
the next check can be scheduled that far in the future instead of after
every step.  Checks that come back acceptable are the tolerated false
positives of the scheme.

Time is the growth parameter t (length squared), shared with the sphere
weights.  The travel fraction theta below measures how far a point can
move relative to its length scale within an interval; (2*theta - theta^2)
times rho squared converts it back into time.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import InputError, SafetyViolationError
from .params import ParameterSet


class Classification(Enum):
    ACCEPTABLE = "acceptable"
    BORDERLINE = "borderline"
    UNACCEPTABLE = "unacceptable"


def classify_edge(ratio: float, p: ParameterSet) -> Classification:
    """Classify an edge by its ratio R/rho against the lower size buffer."""
    if ratio > p.edge_floor_strict:
        return Classification.ACCEPTABLE
    if ratio > p.edge_floor_hard:
        return Classification.BORDERLINE
    return Classification.UNACCEPTABLE


def classify_triangle(ratio: float, p: ParameterSet) -> Classification:
    """Classify a triangle by its ratio R/rho against the upper size buffer."""
    if ratio < p.triangle_ceiling_strict:
        return Classification.ACCEPTABLE
    if ratio < p.triangle_ceiling_hard:
        return Classification.BORDERLINE
    return Classification.UNACCEPTABLE


def classify(kind: str, ratio: float, p: ParameterSet) -> Classification:
    if kind == "edge":
        return classify_edge(ratio, p)
    if kind == "triangle":
        return classify_triangle(ratio, p)
    raise InputError(f"unknown element kind {kind!r}")


def edge_theta(r0: float, rho0: float, p: ParameterSet) -> float:
    """Travel fraction an edge can absorb before it may reach the hard floor.

    Shrinking distances and drifting length scales are both bounded by the
    travel fraction theta; solving the worst case for an edge of half-length
    r0 and scale rho0 gives theta = (r0 Q1 - C rho0) / (r0 Q1 + C rho0).

    Raises for an edge already past the hard floor; exactly on the floor
    the returned fraction is zero.
    """
    if r0 <= 0.0 or rho0 <= 0.0:
        raise InputError("edge size and length scale must be positive")
    num = r0 * p.q1 - p.c * rho0
    if num < 0.0:
        raise SafetyViolationError(
            f"edge ratio {r0 / rho0:.6g} is below the hard floor {p.edge_floor_hard:.6g}"
        )
    return num / (r0 * p.q1 + p.c * rho0)


def triangle_theta(r0: float, rho0: float, p: ParameterSet) -> float:
    """Travel fraction a triangle can absorb before it may reach the hard ceiling.

    Circumradius growth compounds through both side stretching and height
    loss, giving theta = 1 - (r0 / (C Q1 rho0))^(1/4).
    """
    if r0 <= 0.0 or rho0 <= 0.0:
        raise InputError("triangle size and length scale must be positive")
    ratio = r0 / (p.c * p.q1 * rho0)
    if ratio > 1.0:
        raise SafetyViolationError(
            f"triangle ratio {r0 / rho0:.6g} is above the hard ceiling {p.triangle_ceiling_hard:.6g}"
        )
    return 1.0 - ratio ** 0.25


def safe_interval(theta: float, rho0: float) -> float:
    """Time needed for a point of scale rho0 to travel the fraction theta."""
    if not (0.0 <= theta < 1.0):
        raise InputError("theta must lie in [0, 1)")
    return (2.0 * theta - theta * theta) * rho0 * rho0


def worst_case_edge_theta(p: ParameterSet) -> float:
    """Travel fraction for an edge sitting exactly on the strict floor."""
    return (p.q1 - p.q0) / (p.q1 + p.q0)


def worst_case_triangle_theta(p: ParameterSet) -> float:
    """Travel fraction for a triangle sitting exactly on the strict ceiling."""
    return 1.0 - (p.q0 / p.q1) ** 0.25


DEFAULT_HEADROOMS = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


def interval_table(kind: str, p: ParameterSet, headrooms=DEFAULT_HEADROOMS):
    """Rows (A, theta, dt / rho^2) for elements A times better than required.

    A is the headroom factor: an edge with ratio A * C/Q0, or a triangle
    with ratio C * Q0 / A.  A = 1 is the worst acceptable element.
    """
    rows = []
    for a in headrooms:
        if a < 1.0:
            raise InputError("headroom factor must be at least 1")
        if kind == "edge":
            theta = edge_theta(a * p.c / p.q0, 1.0, p)
        elif kind == "triangle":
            theta = triangle_theta(p.c * p.q0 / a, 1.0, p)
        else:
            raise InputError(f"unknown element kind {kind!r}")
        rows.append((a, theta, safe_interval(theta, 1.0)))
    return rows


@dataclass
class MeshElement:
    """An edge or triangle under scheduler supervision.

    ``vertices`` are mesh vertex ids.  ``generation`` is stamped by the
    registry; events carrying an older generation are stale and dropped.
    ``size`` is the world-space size R, ``rho`` the classification length
    scale (larger endpoint scale for edges, smallest vertex scale for
    triangles), and ``rho_min`` the smallest vertex scale, which governs
    how long the safe interval lasts.
    """

    kind: str
    vertices: tuple
    generation: int = 0
    size: float = float("nan")
    rho: float = float("nan")
    rho_min: float = float("nan")
    classification: Classification | None = None
    next_check: float = float("nan")

    @property
    def key(self):
        return (self.kind, self.vertices)

    @property
    def ratio(self) -> float:
        return self.size / self.rho

    def measure(self, size: float, rho: float, rho_min: float, p: ParameterSet):
        self.size = size
        self.rho = rho
        self.rho_min = rho_min
        self.classification = classify(self.kind, self.ratio, p)
        return self.classification

    def theta(self, p: ParameterSet) -> float:
        if self.kind == "edge":
            return edge_theta(self.size, self.rho, p)
        return triangle_theta(self.size, self.rho, p)


class EventQueue:
    """Min-heap of due checks, earliest first, smaller slack breaking ties."""

    def __init__(self):
        self._heap = []
        self._count = itertools.count()

    def __len__(self):
        return len(self._heap)

    def push(self, due: float, slack: float, element: MeshElement):
        heapq.heappush(self._heap, (due, slack, next(self._count), element, element.generation))

    def pop(self):
        """(due, element, generation) of the earliest event."""
        due, _slack, _n, element, generation = heapq.heappop(self._heap)
        return due, element, generation

    def peek_due(self) -> float:
        return self._heap[0][0] if self._heap else math.inf


def schedule(
    queue: EventQueue,
    element: MeshElement,
    now: float,
    p: ParameterSet,
    lazy_buffer: bool = False,
    theta_floor: float = 1e-2,
):
    """Act on a freshly measured element.

    Acceptable elements are enqueued one damped safe interval ahead and the
    (theta, dt) pair is returned.  Borderline elements normally return
    None to signal immediate restructuring; with ``lazy_buffer`` they are
    instead rescheduled on their residual interval while that interval
    stays meaningful (theta above ``theta_floor``).  An element observed
    past the hard bound violates the early-warning guarantee and raises.
    """
    cls = element.classification
    if cls is None:
        raise InputError("element must be measured before scheduling")
    if cls is Classification.UNACCEPTABLE:
        raise SafetyViolationError(
            f"{element.kind} {element.vertices} observed unacceptable "
            f"(ratio {element.ratio:.6g}) at t={now:.6g}"
        )
    if cls is Classification.BORDERLINE and not lazy_buffer:
        return None
    theta = element.theta(p)
    if cls is Classification.BORDERLINE and theta < theta_floor:
        return None
    dt = p.sigma * safe_interval(theta, element.rho_min)
    if dt <= 0.0:
        return None
    element.next_check = now + dt
    queue.push(element.next_check, dt, element)
    return theta, dt


class RunStats:
    """Counters accumulated by run_until."""

    def __init__(self):
        self.checks = 0
        self.false_positives = 0
        self.contract_signals = 0
        self.insert_signals = 0
        self.stale_dropped = 0

    def as_dict(self):
        return {
            "checks": self.checks,
            "false_positives": self.false_positives,
            "contract_signals": self.contract_signals,
            "insert_signals": self.insert_signals,
            "stale_dropped": self.stale_dropped,
        }


def run_until(
    queue: EventQueue,
    t_end: float,
    world,
    p: ParameterSet,
    log: list | None = None,
    stats: RunStats | None = None,
    lazy_buffer: bool = False,
    max_cascade: int = 10_000,
):
    """Process due checks through t_end against a world adapter.

    The adapter provides the mesh side of the protocol:

    - ``generation_of(element)``: current registry generation for the
      element's key, or None if it no longer exists;
    - ``measure(element, t)``: advance the element's vertices to t and
      refresh size and length scales on the element record;
    - ``restructure(element, t)``: contract the edge or refine the
      triangle, returning newly created elements to be measured and
      scheduled at time t.

    Returns the stats object.  ``log`` collects one dict per event in
    emission order, ready for JSONL serialization.
    """
    stats = stats or RunStats()
    while queue.peek_due() <= t_end:
        due, element, generation = queue.pop()
        current = world.generation_of(element)
        if current is None or current != generation:
            stats.stale_dropped += 1
            continue
        _process(queue, element, due, world, p, log, stats, lazy_buffer, max_cascade)
    return stats


def _process(queue, element, now, world, p, log, stats, lazy_buffer, max_cascade):
    """Measure one element and act, cascading through restructurings.

    Only the popped element counts as a scheduled check; elements created
    by restructuring are registered quietly unless they are themselves
    borderline, in which case the cascade continues.
    """
    pending = [(element, True)]
    steps = 0
    while pending:
        steps += 1
        if steps > max_cascade:
            raise SafetyViolationError(
                f"restructuring cascade exceeded {max_cascade} steps at t={now:.6g}"
            )
        elem, is_check = pending.pop()
        if world.generation_of(elem) != elem.generation:
            continue
        cls = world.measure(elem, now)
        scheduled = schedule(queue, elem, now, p, lazy_buffer=lazy_buffer)
        if scheduled is not None:
            if is_check:
                stats.checks += 1
                if cls is Classification.ACCEPTABLE:
                    stats.false_positives += 1
                theta, dt = scheduled
                _log(log, now, elem, "check", theta, dt)
            continue
        action = "contract-signal" if elem.kind == "edge" else "insert-signal"
        if elem.kind == "edge":
            stats.contract_signals += 1
        else:
            stats.insert_signals += 1
        _log(log, now, elem, action, None, None)
        pending.extend((e, False) for e in world.restructure(elem, now))


def _log(log, t, element, action, theta, dt):
    if log is None:
        return
    log.append(
        {
            "t": t,
            "kind": element.kind,
            "vertices": list(element.vertices),
            "action": action,
            "ratio": element.ratio,
            "theta": theta,
            "dt": dt,
        }
    )
