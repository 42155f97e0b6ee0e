"""Motion of points on the growing skin surface.

The surface at time t is the level set g = t.  A tracked point follows the
normal velocity field grad(g) / ||grad(g)||^2, which keeps it on the level
set as t advances.  Inside one mixed cell, in frame coordinates, this flow
has a closed form: writing P for the squared norm across the positive-sign
axes and M across the negative-sign axes,

    P - M = t - c0        (the point stays on the surface),
    P * M = K             (invariant of the flow),

and the frame direction within each sign group is preserved.  Advancing a
point is therefore exact per cell; the only numerics are the cell-face
crossing times, found by sampling plus bracketed root refinement.

Frame norms double as length scales: rho = ||xi|| is the reciprocal of the
largest normal curvature in the frame metric, the speed is 1/(2*rho), and
a point of scale rho needs time (2*theta - theta^2) * rho^2 to travel the
fraction theta of its scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConvergenceError,
    DegeneracyError,
    DomainError,
    InputError,
    NumericError,
    SingularityError,
)
from .mixed_complex import MixedCell, MixedComplex

# A point this close to a quadric apex (in frame units) cannot be advanced.
APEX_TOL = 1e-6
# Velocity evaluation refuses slightly deeper, matching its weaker needs.
VELOCITY_TOL = 1e-9

_CROSSING_SAMPLES = 65


@dataclass(frozen=True)
class SurfacePoint:
    """A point of the surface at a specific time, with its cell and frame data."""

    world: np.ndarray
    cell_index: int
    xi: np.ndarray
    t: float

    @property
    def rho(self) -> float:
        """Length scale: frame-metric radius of the largest normal curvature."""
        return float(np.linalg.norm(self.xi))


def surface_point_from_world(complex_: MixedComplex, x, t: float, check: bool = True) -> SurfacePoint:
    """Wrap a world point lying on the surface at time t."""
    x = np.asarray(x, dtype=float)
    cell = complex_.locate(x)
    xi = cell.frame.to_frame(x)
    if check:
        residual = abs(cell.frame.value(x) - t)
        scale = 1.0 + abs(t) + float(xi @ xi)
        if residual > 1e-6 * scale:
            raise InputError(f"point {x.tolist()} is not on the surface at t={t} (residual {residual:.3g})")
    return SurfacePoint(x, cell.index, xi, t)


def skin_value(complex_: MixedComplex, x) -> float:
    """g(x): squared growth time at which the surface reaches x."""
    cell = complex_.locate(np.asarray(x, dtype=float))
    return cell.frame.value(x)


def skin_value_direct(spheres, simplex, x) -> float:
    """Direct envelope evaluation over one simplex's sphere family.

    Minimizes 2*f_S(x) - f_S(z_S) over convex combinations S of the member
    spheres by enumerating faces of the coefficient simplex; used to verify
    the frame forms independently.
    """
    x = np.asarray(x, dtype=float)
    centers = np.array([spheres[i].center for i in simplex])
    lifted = np.array([spheres[i].lifted() for i in simplex])
    best = math.inf
    m = len(simplex)
    for mask in range(1, 1 << m):
        idx = [i for i in range(m) if mask >> i & 1]
        z = centers[idx]
        lf = lifted[idx]
        z0 = z[0]
        if len(idx) == 1:
            z_star = z0
            pi_star = lf[0]
        else:
            diffs = z[1:] - z0  # rows span the face
            # Stationarity of the envelope over the affine hull:
            # 2 * d_i . z = 4 * d_i . x - (lifted_i - lifted_0).
            gram = 2.0 * (diffs @ diffs.T)
            target = diffs @ (4.0 * x - 2.0 * z0) - (lf[1:] - lf[0])
            try:
                coef = np.linalg.solve(gram, target)
            except np.linalg.LinAlgError:
                continue
            gamma = np.concatenate([[1.0 - coef.sum()], coef])
            if np.any(gamma < -1e-9):
                continue
            z_star = z0 + coef @ diffs
            pi_star = float(gamma @ lf)
        value = 2.0 * float((x - z_star) @ (x - z_star)) - float(z_star @ z_star) + pi_star
        best = min(best, value)
    return best


def velocity(complex_: MixedComplex, point: SurfacePoint) -> np.ndarray:
    """Surface-point velocity, frame magnitude in world orientation.

    The returned vector points along the world-space normal motion and has
    norm 1/(2*rho), so ||velocity|| * 2 * ||xi|| is identically one.
    """
    cell = complex_.cells[point.cell_index]
    xi = point.xi
    norm2 = float(xi @ xi)
    if norm2 < VELOCITY_TOL * VELOCITY_TOL:
        raise SingularityError(f"velocity undefined: point at frame distance {math.sqrt(norm2):.3g} from apex")
    signs = np.asarray(cell.frame.signs, dtype=float)
    v_frame = signs * xi / (2.0 * norm2)
    return v_frame @ cell.frame.rotation


def velocity_under_cell(complex_: MixedComplex, cell_index: int, x) -> np.ndarray:
    """Velocity formula of one cell's quadric family at an arbitrary world point."""
    cell = complex_.cells[cell_index]
    xi = cell.frame.to_frame(np.asarray(x, dtype=float))
    norm2 = float(xi @ xi)
    if norm2 < VELOCITY_TOL * VELOCITY_TOL:
        raise SingularityError("velocity undefined at the quadric apex")
    signs = np.asarray(cell.frame.signs, dtype=float)
    return (signs * xi / (2.0 * norm2)) @ cell.frame.rotation


def length_scale_bounds(rho0: float, theta: float) -> tuple:
    """Window that the length scale stays inside over one safe interval.

    A point with length scale rho0 keeps its scale within
    ((1 - theta) * rho0, (1 + theta) * rho0) while at most
    (2*theta - theta^2) * rho0^2 of growth elapses.
    """
    if not 0.0 <= theta <= 1.0:
        raise InputError(f"theta must lie in [0, 1], got {theta}")
    if rho0 <= 0.0:
        raise InputError(f"length scale must be positive, got {rho0}")
    return ((1.0 - theta) * rho0, (1.0 + theta) * rho0)


@dataclass(frozen=True)
class TrajectorySegment:
    """One cell's worth of closed-form motion."""

    cell_index: int
    t_start: float
    t_end: float
    offset: float          # quadric constant c0; s(t) = t - c0
    invariant: float       # K = P * M
    dir_plus: np.ndarray   # unit frame direction across positive axes (or 0)
    dir_minus: np.ndarray

    def _split(self, ts):
        s = np.asarray(ts, dtype=float) - self.offset
        root = np.sqrt(s * s + 4.0 * self.invariant)
        p = 0.5 * (s + root)
        m = 0.5 * (root - s)
        return np.clip(p, 0.0, None), np.clip(m, 0.0, None)

    def xi_at(self, ts):
        p, m = self._split(ts)
        return (
            np.sqrt(p)[..., None] * self.dir_plus
            + np.sqrt(m)[..., None] * self.dir_minus
        )

    def rho_at(self, ts):
        p, m = self._split(ts)
        return np.sqrt(p + m)

    def speed_integral(self) -> float:
        """X = integral of dt / (2 * ||xi||^2) across the segment."""
        s0 = self.t_start - self.offset
        s1 = self.t_end - self.offset
        k = self.invariant
        if k > 0.0:
            a = 2.0 * math.sqrt(k)
            return 0.5 * (math.asinh(s1 / a) - math.asinh(s0 / a))
        if s0 == 0.0 or s1 == 0.0 or (s0 < 0.0) != (s1 < 0.0):
            raise SingularityError("speed integral through an apex diverges")
        return 0.5 * abs(math.log(abs(s1) / abs(s0)))


class Trajectory:
    """Recorded piecewise closed-form path of one advanced point."""

    def __init__(self, complex_: MixedComplex, segments):
        self._complex = complex_
        self.segments = segments

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def _segment_index(self, ts):
        bounds = np.array([seg.t_end for seg in self.segments[:-1]])
        return np.searchsorted(bounds, ts, side="right")

    def positions(self, ts) -> np.ndarray:
        """World positions at the given times (within the recorded range)."""
        ts = np.asarray(ts, dtype=float)
        if ts.ndim == 0:
            return self.positions(ts[None])[0]
        if np.any(ts < self.t_start - 1e-12) or np.any(ts > self.t_end + 1e-12):
            raise InputError("requested time outside the recorded trajectory")
        out = np.empty(ts.shape + (3,))
        idx = self._segment_index(ts)
        for seg_i in np.unique(idx):
            seg = self.segments[seg_i]
            frame = self._complex.cells[seg.cell_index].frame
            mask = idx == seg_i
            out[mask] = frame.to_world(seg.xi_at(ts[mask]))
        return out

    def rhos(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        out = np.empty(ts.shape)
        idx = self._segment_index(ts)
        for seg_i in np.unique(idx):
            seg = self.segments[seg_i]
            out[idx == seg_i] = seg.rho_at(ts[idx == seg_i])
        return out

    def speed_integral(self) -> float:
        return sum(seg.speed_integral() for seg in self.segments)


def _segment_for(cell: MixedCell, xi, t0: float, t1: float) -> TrajectorySegment:
    signs = np.asarray(cell.frame.signs)
    plus = signs > 0
    xi_p = np.where(plus, xi, 0.0)
    xi_m = np.where(~plus, xi, 0.0)
    p0 = float(xi_p @ xi_p)
    m0 = float(xi_m @ xi_m)
    dir_plus = xi_p / math.sqrt(p0) if p0 > 0.0 else np.zeros(3)
    dir_minus = xi_m / math.sqrt(m0) if m0 > 0.0 else np.zeros(3)
    return TrajectorySegment(
        cell_index=cell.index,
        t_start=t0,
        t_end=t1,
        offset=cell.frame.offset,
        invariant=p0 * m0,
        dir_plus=dir_plus,
        dir_minus=dir_minus,
    )


def _check_apex(seg: TrajectorySegment, apex_tol: float):
    """Refuse segments that pass too close to the quadric apex."""
    s0 = seg.t_start - seg.offset
    s1 = seg.t_end - seg.offset
    lowest = min(seg.rho_at(seg.t_start), seg.rho_at(seg.t_end))
    if s0 <= 0.0 <= s1:
        lowest = min(lowest, math.sqrt(2.0) * seg.invariant ** 0.25)
    if lowest < apex_tol:
        raise SingularityError(
            f"trajectory approaches a patch apex (frame distance {lowest:.3g}) "
            f"near t={seg.offset:.6g}"
        )


def _exit_time(cell: MixedCell, seg: TrajectorySegment, frame, tol: float):
    """Earliest face-crossing time in the segment, or None if it stays inside.

    Faces are sampled on a fixed grid and each sign change is refined by
    bracketed root finding; the earliest root wins.
    """
    ts = np.linspace(seg.t_start, seg.t_end, _CROSSING_SAMPLES)
    pts = frame.to_world(seg.xi_at(ts))
    margins = cell.halfspaces_a @ pts.T - cell.halfspaces_b[:, None]
    outside = margins > tol
    if not outside.any():
        return None, None
    first_col = int(np.argmax(outside.any(axis=0)))
    lo = ts[max(first_col - 1, 0)]
    hi = ts[first_col]
    best_t, best_face = None, None
    for face in np.nonzero(outside[:, first_col])[0]:
        a_row = cell.halfspaces_a[face]
        b_val = cell.halfspaces_b[face]

        def f(t, a_row=a_row, b_val=b_val):
            return float(a_row @ frame.to_world(seg.xi_at(np.array([t])))[0] - b_val)

        f_lo = f(lo)
        if f_lo > 0.0:
            # Already outside at the bracket start (entry-face jitter); treat
            # the bracket start as the crossing.
            t_root = lo
        else:
            t_root = brentq(f, lo, hi, xtol=1e-13, rtol=8.881784197001252e-16)
        if best_t is None or t_root < best_t:
            best_t, best_face = t_root, face
    return best_t, best_face


def advance(
    complex_: MixedComplex,
    point: SurfacePoint,
    dt: float,
    record: bool = False,
    apex_tol: float = APEX_TOL,
):
    """Advance a surface point by dt in growth time.

    Returns the new SurfacePoint, or (point, Trajectory) when ``record``
    is set.  Raises SingularityError near a patch apex and DomainError if
    the path leaves the clipped complex.
    """
    if dt < 0.0:
        raise InputError("advance requires dt >= 0")
    t_target = point.t + dt
    cell = complex_.cells[point.cell_index]
    xi = np.array(point.xi, dtype=float)
    t_now = point.t
    segments = []
    nudge = 64.0 * complex_.locate_tol
    guard = 0
    while True:
        guard += 1
        if guard > 10_000:
            raise NumericError("advance failed to terminate (cell hand-off loop)")
        seg = _segment_for(cell, xi, t_now, t_target)
        _check_apex(seg, apex_tol)
        t_exit, _face = _exit_time(cell, seg, cell.frame, complex_.locate_tol)
        if t_exit is None or t_exit >= t_target:
            segments.append(seg)
            xi_end = seg.xi_at(np.array([t_target]))[0]
            world = cell.frame.to_world(xi_end)
            new_point = SurfacePoint(world, cell.index, xi_end, t_target)
            break
        seg = _segment_for(cell, xi, t_now, t_exit)
        segments.append(seg)
        xi_exit = seg.xi_at(np.array([t_exit]))[0]
        world_exit = cell.frame.to_world(xi_exit)
        direction = velocity_under_cell(complex_, cell.index, world_exit)
        norm = float(np.linalg.norm(direction))
        if norm < 1e-30:
            raise SingularityError("vanishing velocity at a cell face")
        probe = world_exit + (nudge / norm) * direction
        next_cell = complex_.locate(probe)
        if next_cell.index == cell.index:
            # Grazing contact: continue inside the same cell just past t_exit.
            t_now = t_exit + max(1e-12, 1e-9 * (t_target - t_exit))
            xi = seg.xi_at(np.array([min(t_now, t_target)]))[0]
            if t_now >= t_target:
                world = cell.frame.to_world(xi)
                new_point = SurfacePoint(world, cell.index, xi, t_target)
                break
            continue
        cell = next_cell
        # Re-anchor in the next cell and absorb the hand-off rounding with
        # one Newton correction along the gradient.
        x = world_exit
        value = cell.frame.value(x)
        grad = cell.frame.gradient_world(x)
        gg = float(grad @ grad)
        if gg > 0.0:
            x = x + (t_exit - value) * grad / gg
        xi = cell.frame.to_frame(x)
        t_now = t_exit
    if record:
        return new_point, Trajectory(complex_, segments)
    return new_point


def project_to_surface(complex_: MixedComplex, x, t: float, max_iter: int = 50) -> SurfacePoint:
    """Newton-project a nearby world point onto the surface g = t."""
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        cell = complex_.locate(x)
        value = cell.frame.value(x)
        scale = 1.0 + abs(t) + abs(value)
        if abs(value - t) <= 1e-12 * scale:
            xi = cell.frame.to_frame(x)
            return SurfacePoint(x, cell.index, xi, t)
        grad = cell.frame.gradient_world(x)
        gg = float(grad @ grad)
        if gg < 1e-30:
            raise SingularityError("projection hit a critical point of g")
        x = x + (t - value) * grad / gg
    raise ConvergenceError(f"surface projection did not converge in {max_iter} iterations")


def reflect_across_plane(x, normal, offset):
    """Mirror image of x across the plane normal . y = offset (unit normal)."""
    return x - 2.0 * (float(normal @ x) - offset) * normal


@dataclass(frozen=True)
class ReflectedPath:
    """Result of folding a segment across the cell faces it crosses.

    ``crossings`` are the original intersection points x_1..x_k with cell
    faces; ``waypoints`` are their positions after folding, forming with
    ``image`` a polygonal path from the source whose total length equals
    the straight source-target distance.
    """

    source: np.ndarray
    target: np.ndarray
    crossings: tuple
    waypoints: tuple
    image: np.ndarray

    def path_length(self) -> float:
        pts = [self.source, *self.waypoints, self.image]
        return float(sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])))


def reflect_segment(complex_: MixedComplex, u, v) -> ReflectedPath:
    """Fold the segment from u to v across each crossed cell face, last first.

    The image of v ends up no farther from u than v itself, and carries a
    velocity consistent with u's own quadric family.  Raises on non-generic
    crossings (a face boundary hit within tolerance).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    direction = v - u
    length = float(np.linalg.norm(direction))
    if length == 0.0:
        return ReflectedPath(u, v, (), (), v.copy())
    tol = complex_.locate_tol
    cell = complex_.locate(u)
    s_now = 0.0
    crossings = []
    planes = []
    guard = 0
    while True:
        guard += 1
        if guard > 1000:
            raise NumericError("reflect_segment failed to terminate")
        dots = cell.halfspaces_a @ direction
        gaps = cell.halfspaces_b - cell.halfspaces_a @ u
        s_exit = math.inf
        exit_faces = []
        for j in range(len(dots)):
            if dots[j] <= tol / max(length, 1.0):
                continue
            s_j = gaps[j] / dots[j]
            if s_j < s_now - 1e-12:
                continue
            if s_j < s_exit - 1e-10:
                s_exit, exit_faces = s_j, [j]
            elif abs(s_j - s_exit) <= 1e-10:
                exit_faces.append(j)
        if s_exit >= 1.0:
            break
        if len(exit_faces) > 1:
            raise DegeneracyError(
                "segment crosses a cell-face boundary (non-generic crossing)"
            )
        face = exit_faces[0]
        x_cross = u + s_exit * direction
        crossings.append(x_cross)
        planes.append((cell.halfspaces_a[face].copy(), float(cell.halfspaces_b[face])))
        probe = u + (s_exit + max(64.0 * tol / length, 1e-12)) * direction
        next_cell = complex_.locate(probe)
        if next_cell.index == cell.index:
            raise DegeneracyError("segment grazes a cell face without crossing")
        cell = next_cell
        s_now = s_exit + 1e-12
    folded = [np.array(p) for p in crossings] + [v.copy()]
    for i in reversed(range(len(crossings))):
        normal, offset = planes[i]
        for m in range(i + 1, len(folded)):
            folded[m] = reflect_across_plane(folded[m], normal, offset)
    return ReflectedPath(
        source=u,
        target=v,
        crossings=tuple(np.array(p) for p in crossings),
        waypoints=tuple(folded[:-1]),
        image=folded[-1],
    )


def sample_patch(complex_: MixedComplex, cell: MixedCell, t: float, n: int, rng) -> list:
    """Random surface points on one cell's patch at time t (possibly empty)."""
    frame = cell.frame
    rhs = frame.rhs(t)
    points = []
    margin_tol = -10.0 * complex_.locate_tol
    attempts = 0
    max_attempts = 60 * n
    # Frame extents of the cell bound the useful sampling window.
    xi_vertices = frame.to_frame(cell.vertices)
    axis_extent = float(np.abs(xi_vertices[:, 2]).max()) * 1.05 + 1e-12
    while len(points) < n and attempts < max_attempts:
        attempts += 1
        if frame.axis_sign > 0:
            if rhs <= 0.0:
                return []
            direction = rng.normal(size=3)
            norm = np.linalg.norm(direction)
            if norm < 1e-12:
                continue
            xi = math.sqrt(rhs) * direction / norm
        else:
            if rhs <= 0.0 and axis_extent * axis_extent < -rhs:
                return []  # both sheets outside the cell's axis range
            xi3 = rng.uniform(-axis_extent, axis_extent)
            r2 = rhs + xi3 * xi3
            if r2 <= 0.0:
                continue
            phi = rng.uniform(0.0, 2.0 * math.pi)
            r = math.sqrt(r2)
            xi = np.array([r * math.cos(phi), r * math.sin(phi), xi3])
        world = frame.to_world(xi)
        if cell.margin(world) < margin_tol:
            points.append(SurfacePoint(world, cell.index, xi, t))
    return points


def sample_surface(complex_: MixedComplex, t: float, rng, per_cell: int = 40) -> list:
    """Random surface points across all cells at time t."""
    points = []
    for cell in complex_.cells:
        points.extend(sample_patch(complex_, cell, t, per_cell, rng))
    return points


def farthest_point_sample(points, spacing: float, rng) -> list:
    """Greedy subsample until every candidate is within spacing * rho of a pick.

    ``points`` are SurfacePoints; distances are world distances normalized
    by each candidate's own length scale.
    """
    if not points:
        return []
    coords = np.array([p.world for p in points])
    rhos = np.array([p.rho for p in points])
    start = int(rng.integers(len(points)))
    chosen = [start]
    dist = np.linalg.norm(coords - coords[start], axis=1)
    while True:
        normalized = dist / rhos
        idx = int(np.argmax(normalized))
        if normalized[idx] <= spacing:
            break
        chosen.append(idx)
        dist = np.minimum(dist, np.linalg.norm(coords - coords[idx], axis=1))
    return [points[i] for i in chosen]
